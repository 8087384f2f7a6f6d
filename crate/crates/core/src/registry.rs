//! Named example catalog and the axiom suites the command-line runner dispatches to.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::derivations::{centroid, scder_space, DerivationError, ScderChoice};
use crate::eala::{
    build_eala, check_eala_axioms, core_and_centreless_core, roots_and_nullity, AffineCocycle, Eala, TauSpec,
};
use crate::extensions::{check_cocycle, cocycle_from_derivations, standard_cocycle, DerivationSet, StandardKind};
use crate::gradedlie::{check_invariant_form, check_jacobi_grading, check_lie_torus, window_degrees, GradedLie};
use crate::refsys::box_points;
use crate::report::{CheckResult, Report};
use crate::realizations::{
    quantum_torus, sl_torus, split_sl, twisted_loop, FiniteOrderAut, QuantumMatrix, RealizationError,
};
use crate::scalars::primitive_root;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown example {0:?}")]
    UnknownExample(String),
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("malformed spec at {path}: {msg}")]
    Spec { path: String, msg: String },
    #[error(transparent)]
    Realization(#[from] RealizationError),
}

/// A realization `L` together with the choice of `D` and `tau` for `E(L, D, tau)`.
#[derive(Clone)]
pub struct Instance {
    pub name: String,
    pub l: Arc<dyn GradedLie>,
    pub d: ScderChoice,
    pub tau: AffineCocycle,
}

impl std::fmt::Debug for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Instance").field("name", &self.name).field("l", &self.l.meta().name).finish()
    }
}

pub trait Example: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn build(&self) -> Result<Instance, RegistryError>;
}

struct Entry {
    name: &'static str,
    summary: &'static str,
    build: fn() -> Result<Arc<dyn GradedLie>, RealizationError>,
}

impl Example for Entry {
    fn name(&self) -> &'static str {
        self.name
    }

    fn summary(&self) -> &'static str {
        self.summary
    }

    fn build(&self) -> Result<Instance, RegistryError> {
        Ok(Instance { name: self.name.into(), l: (self.build)()?, d: ScderChoice::Full, tau: AffineCocycle::zero() })
    }
}

fn sl_over(size: usize, q: QuantumMatrix) -> Result<Arc<dyn GradedLie>, RealizationError> {
    Ok(Arc::new(sl_torus(size, &quantum_torus(&q)?)?))
}

fn loop_of(sigma: FiniteOrderAut) -> Result<Arc<dyn GradedLie>, RealizationError> {
    Ok(Arc::new(twisted_loop(&sigma)?))
}

pub fn catalog() -> Vec<Box<dyn Example>> {
    let entries: Vec<Entry> = vec![
        Entry { name: "sl3-split", summary: "split sl_3, nullity 0", build: || Ok(Arc::new(split_sl(3)?)) },
        Entry { name: "sl4-split", summary: "split sl_4, nullity 0", build: || Ok(Arc::new(split_sl(4)?)) },
        Entry {
            name: "sl3-loop",
            summary: "sl_3 over F[t, t^-1], affine A_2^(1)",
            build: || sl_over(3, QuantumMatrix::laurent(1)),
        },
        Entry {
            name: "sl3-laurent2",
            summary: "sl_3 over F[t1^+-1, t2^+-1], nullity 2",
            build: || sl_over(3, QuantumMatrix::laurent(2)),
        },
        Entry {
            name: "sl3-q3",
            summary: "sl_3 over the quantum torus with q a primitive cube root of unity",
            build: || {
                let q = primitive_root(3).map_err(|e| RealizationError::MalformedQ(e.to_string()))?;
                sl_over(3, QuantumMatrix::two(q)?)
            },
        },
        Entry {
            name: "sl3-qgeneric",
            summary: "sl_3 over the quantum torus with generic q",
            build: || sl_over(3, QuantumMatrix::two_generic()),
        },
        Entry {
            name: "affine-a2-twisted",
            summary: "L(sl_3, x -> -x^T), type (A_2, 2)",
            build: || loop_of(FiniteOrderAut::neg_transpose(3)),
        },
        Entry {
            name: "affine-a4-twisted",
            summary: "L(sl_5, x -> -x^T), type (A_4, 2)",
            build: || loop_of(FiniteOrderAut::neg_transpose(5)),
        },
        Entry {
            name: "affine-a3-twisted",
            summary: "L(sl_4, x -> -J x^T J^-1), type (A_3, 2)",
            build: || loop_of(FiniteOrderAut::symplectic(4)),
        },
    ];
    entries.into_iter().map(|e| Box::new(e) as Box<dyn Example>).collect()
}

pub fn find_example(name: &str) -> Result<Box<dyn Example>, RegistryError> {
    catalog().into_iter().find(|e| e.name() == name).ok_or_else(|| RegistryError::UnknownExample(name.into()))
}

// ---------------------------------------------------------------------------
// user specs

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum TorusSpec {
    Laurent { n: usize },
    /// Two variables with `q_12` a primitive root of unity of this order.
    RootOfUnity { order: u32 },
    Generic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedAut {
    Identity,
    NegTranspose,
    Symplectic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutSpec {
    Named(NamedAut),
    Explicit(FiniteOrderAut),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum RealizationSpec {
    SplitSl { size: usize },
    SlTorus { size: usize, torus: TorusSpec },
    TwistedLoop { size: usize, aut: AutSpec },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauChoice {
    Named(TauName),
    Table(TauSpec),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauName {
    Zero,
}

/// `{"L": ..., "D": ..., "tau": ...}`; `D` defaults to all skew centroidal derivations, `tau` to zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EalaSpec {
    #[serde(rename = "L")]
    pub l: RealizationSpec,
    #[serde(rename = "D", default = "default_d")]
    pub d: ScderChoice,
    #[serde(default = "default_tau")]
    pub tau: TauChoice,
}

fn default_d() -> ScderChoice {
    ScderChoice::Full
}

fn default_tau() -> TauChoice {
    TauChoice::Named(TauName::Zero)
}

/// Parses a JSON spec; errors carry the path of the offending field.
pub fn parse_spec(text: &str) -> Result<EalaSpec, RegistryError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| RegistryError::Spec { path: e.path().to_string(), msg: e.inner().to_string() })
}

fn spec_err(path: &str, e: impl ToString) -> RegistryError {
    RegistryError::Spec { path: path.into(), msg: e.to_string() }
}

impl EalaSpec {
    pub fn build(&self) -> Result<Instance, RegistryError> {
        let l: Arc<dyn GradedLie> = match &self.l {
            RealizationSpec::SplitSl { size } => Arc::new(split_sl(*size).map_err(|e| spec_err("L.split-sl.size", e))?),
            RealizationSpec::SlTorus { size, torus } => {
                let q = match torus {
                    TorusSpec::Laurent { n } => QuantumMatrix::laurent(*n),
                    TorusSpec::RootOfUnity { order } => {
                        let z = primitive_root(*order).map_err(|e| spec_err("L.sl-torus.torus.root-of-unity.order", e))?;
                        QuantumMatrix::two(z).map_err(|e| spec_err("L.sl-torus.torus", e))?
                    }
                    TorusSpec::Generic => QuantumMatrix::two_generic(),
                };
                let a = quantum_torus(&q).map_err(|e| spec_err("L.sl-torus.torus", e))?;
                Arc::new(sl_torus(*size, &a).map_err(|e| spec_err("L.sl-torus.size", e))?)
            }
            RealizationSpec::TwistedLoop { size, aut } => {
                let sigma = match aut {
                    AutSpec::Named(NamedAut::Identity) => FiniteOrderAut::identity(*size),
                    AutSpec::Named(NamedAut::NegTranspose) => FiniteOrderAut::neg_transpose(*size),
                    AutSpec::Named(NamedAut::Symplectic) => {
                        if size % 2 != 0 {
                            return Err(spec_err("L.twisted-loop.size", "symplectic twist needs an even size"));
                        }
                        FiniteOrderAut::symplectic(*size)
                    }
                    AutSpec::Explicit(a) => {
                        if a.size() != *size {
                            return Err(spec_err("L.twisted-loop.aut.matrix", format!("expected {size} x {size}")));
                        }
                        a.clone()
                    }
                };
                Arc::new(twisted_loop(&sigma).map_err(|e| spec_err("L.twisted-loop.aut", e))?)
            }
        };
        let tau = match &self.tau {
            TauChoice::Named(TauName::Zero) => AffineCocycle::zero(),
            TauChoice::Table(t) => t.clone().into_cocycle(),
        };
        Ok(Instance { name: l.meta().name.clone(), l, d: self.d.clone(), tau })
    }
}

// ---------------------------------------------------------------------------
// suites

/// Shared state across suites of one run; the EALA is built at most once.
pub struct Context {
    pub inst: Instance,
    pub window: i64,
    eala: Option<Result<Arc<Eala>, String>>,
}

impl Context {
    pub fn new(inst: Instance, window: i64) -> Self {
        Context { inst, window, eala: None }
    }

    pub fn eala(&mut self) -> Result<Arc<Eala>, String> {
        if self.eala.is_none() {
            self.eala = Some(self.build_eala());
        }
        self.eala.clone().expect("just set")
    }

    fn build_eala(&self) -> Result<Arc<Eala>, String> {
        let l = self.inst.l.clone();
        let (d, _) = scder_space(l.as_ref(), &self.inst.d, self.window).map_err(|e| e.to_string())?;
        build_eala(l, d, self.inst.tau.clone(), self.window).map(Arc::new).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub pass: bool,
    pub checks: Report,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub data: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SuiteResult {
    fn from_report(checks: Report) -> Self {
        SuiteResult { pass: checks.pass(), checks, data: BTreeMap::new(), error: None }
    }

    fn error(msg: impl Into<String>) -> Self {
        SuiteResult { pass: false, checks: Report::new(), data: BTreeMap::new(), error: Some(msg.into()) }
    }

    fn with(mut self, key: &str, v: impl Serialize) -> Self {
        self.data.insert(key.into(), serde_json::to_value(v).expect("serializable"));
        self
    }
}

pub trait Suite: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, ctx: &mut Context) -> SuiteResult;
}

struct Jacobi;
struct LieTorusSuite;
struct FormSuite;
struct EarsSuite;
struct EalaSuite;
struct CocycleSuite;
struct CentroidSuite;

/// Degree-0 dimensions `dim L_0^lambda` over the window.
fn zero_root_dims(h: &dyn GradedLie, b: i64) -> BTreeMap<String, usize> {
    window_degrees(h, b).into_iter().filter(|d| d.xi_is_zero()).map(|d| (format!("{:?}", d.lam), h.dim(&d))).collect()
}

impl Suite for Jacobi {
    fn name(&self) -> &'static str {
        "jacobi"
    }

    fn run(&self, ctx: &mut Context) -> SuiteResult {
        SuiteResult::from_report(check_jacobi_grading(ctx.inst.l.as_ref(), ctx.window))
    }
}

impl Suite for LieTorusSuite {
    fn name(&self) -> &'static str {
        "lie-torus"
    }

    fn run(&self, ctx: &mut Context) -> SuiteResult {
        let h = ctx.inst.l.as_ref();
        let r = check_lie_torus(h, ctx.window);
        let family: BTreeMap<String, &Vec<Vec<i64>>> = r.family.iter().map(|(k, v)| (format!("{k:?}"), v)).collect();
        SuiteResult::from_report(r.report.clone())
            .with("family", family)
            .with("zero_root_dims", zero_root_dims(h, ctx.window))
            .with("root_system", h.meta().system_id.map(|s| s.to_string()))
    }
}

impl Suite for FormSuite {
    fn name(&self) -> &'static str {
        "form"
    }

    fn run(&self, ctx: &mut Context) -> SuiteResult {
        match check_invariant_form(ctx.inst.l.as_ref(), ctx.window) {
            Ok(r) => SuiteResult::from_report(r),
            Err(e) => SuiteResult::error(e.to_string()),
        }
    }
}

impl Suite for EarsSuite {
    fn name(&self) -> &'static str {
        "ears"
    }

    fn run(&self, ctx: &mut Context) -> SuiteResult {
        let e = match ctx.eala() {
            Ok(e) => e,
            Err(msg) => return SuiteResult::error(msg),
        };
        let r = roots_and_nullity(&e, ctx.window);
        let mut checks = r.report.clone();
        if let Some(er) = &r.ears {
            checks.merge("ears/", er.report.clone());
        } else {
            let mut c = CheckResult::windowed(ctx.window);
            c.fail("no EARS report");
            checks.add("ears", c);
        }
        let mut out = SuiteResult::from_report(checks).with("nullity", r.nullity).with("null_roots", &r.null);
        if let Some(q) = &r.quotient {
            let datum: BTreeMap<String, Value> = q
                .datum
                .classes
                .iter()
                .map(|(c, a)| (format!("{c:?}"), json!(a.window_points(ctx.window))))
                .collect();
            out = out.with("quotient", q.system.to_string()).with("datum", datum);
        }
        out
    }
}

impl Suite for EalaSuite {
    fn name(&self) -> &'static str {
        "eala"
    }

    fn run(&self, ctx: &mut Context) -> SuiteResult {
        let e = match ctx.eala() {
            Ok(e) => e,
            Err(msg) => return SuiteResult::error(msg),
        };
        let ax = check_eala_axioms(&e, ctx.window);
        let core = core_and_centreless_core(&e, ctx.window);
        let mut checks = ax.report.clone();
        checks.merge("core/", core.report.clone());
        SuiteResult::from_report(checks)
            .with("nullity", ax.nullity)
            .with("core_dims", &core.core_dims)
            .with("centre_dims", &core.centre_dims)
            .with("centreless_dims", &core.centreless_dims)
    }
}

impl Suite for CocycleSuite {
    fn name(&self) -> &'static str {
        "cocycle"
    }

    fn run(&self, ctx: &mut Context) -> SuiteResult {
        let h = ctx.inst.l.as_ref();
        let b = ctx.window;
        let mut checks = Report::new();
        let mut skipped = BTreeMap::new();
        let kinds = [
            ("loop", StandardKind::Loop),
            ("multiloop-fn", StandardKind::MultiloopFn),
            ("universal", StandardKind::UniversalMultiloop),
        ];
        let mut run_one = |name: &str, psi: Result<crate::extensions::Cocycle, String>| match psi
            .and_then(|p| check_cocycle(&p, h, b).map_err(|e| e.to_string()))
        {
            Ok(r) => checks.merge(&format!("{name}/"), r),
            Err(e) => {
                skipped.insert(name.to_string(), e);
            }
        };
        for (name, k) in kinds {
            run_one(name, standard_cocycle(k, h).map_err(|e| e.to_string()));
        }
        let from_d = scder_space(h, &ctx.inst.d, b)
            .map_err(|e: DerivationError| e.to_string())
            .and_then(|(d, _)| {
                cocycle_from_derivations(h, DerivationSet::Centroidal(d), b).map_err(|e| e.to_string())
            });
        run_one("psi-D", from_d);
        SuiteResult::from_report(checks).with("not_applicable", skipped)
    }
}

impl Suite for CentroidSuite {
    fn name(&self) -> &'static str {
        "centroid"
    }

    fn run(&self, ctx: &mut Context) -> SuiteResult {
        let h = ctx.inst.l.as_ref();
        let r = centroid(h, ctx.window);
        let mut checks = Report::new();
        checks.add("centroid", r.to_check());
        let n = h.meta().n;
        if let Some(known) = h.centroid_support() {
            let mut c = CheckResult::windowed(ctx.window);
            // only the points the window can see are comparable
            let want: Vec<Vec<i64>> =
                box_points(n, r.gamma_radius).into_iter().filter(|g| known.contains(g)).collect();
            c.require(r.gamma_window == want, || {
                format!("window support {:?} differs from the realization's centroid support {want:?}", r.gamma_window)
            });
            checks.add("support", c);
        }
        SuiteResult::from_report(checks)
            .with("gamma_window", &r.gamma_window)
            .with("gamma_generators", r.gamma_lattice(n).rows)
    }
}

pub fn suites() -> Vec<Box<dyn Suite>> {
    vec![
        Box::new(Jacobi),
        Box::new(LieTorusSuite),
        Box::new(FormSuite),
        Box::new(EarsSuite),
        Box::new(EalaSuite),
        Box::new(CocycleSuite),
        Box::new(CentroidSuite),
    ]
}

pub fn find_suite(name: &str) -> Result<Box<dyn Suite>, RegistryError> {
    suites().into_iter().find(|s| s.name() == name).ok_or_else(|| RegistryError::UnknownSuite(name.into()))
}
