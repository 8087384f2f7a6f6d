//! `E(L, D, tau) = L + D^gr* + D`, its toral subalgebra, roots and the (EA1)-(EA6) suite.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derivations::{check_skew, DerivationError, DerivationSpace};
use crate::gradedlie::{
    bracket_memo, check_invariant_form, form, window_basis, window_degrees, AlgebraMeta, Basis, Degree, Element,
    GradedLie, Memo,
};
use crate::lattice::Lattice;
use crate::linalg::{self, sparse_from_dense, Echelon};
use crate::refsys::{box_points, build_ars, check_ears, quotient_root_system, EarsReport, QuotientInput, QuotientResult};
use crate::report::{CheckResult, Report};
use crate::scalars::CycScalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EalaError {
    #[error("L carries no invariant form")]
    NoForm,
    #[error("D has n = {got}, L has n = {expected}")]
    RankMismatch { expected: usize, got: usize },
    #[error("ev on D^0 is not injective: D^0 has rank {rank} < n = {n}")]
    EvNotInjective { rank: usize, n: usize },
    #[error("affine cocycle invariant fails: {0}")]
    Tau(String),
    #[error("non-skew member of D: {0}")]
    NotSkew(String),
}

impl From<DerivationError> for EalaError {
    fn from(e: DerivationError) -> Self {
        EalaError::NotSkew(e.to_string())
    }
}

/// A `D`-basis member: torus degree and index in `D^gamma`.
pub type DKey = (Vec<i64>, usize);

/// `tau(d_1, d_2)` in coordinates of `(D^-(g1+g2))^*`; read antisymmetrically, default zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineCocycle {
    pub entries: BTreeMap<(DKey, DKey), Vec<CycScalar>>,
}

impl AffineCocycle {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|v| v.iter().all(|x| x.is_zero()))
    }

    pub fn eval(&self, a: &DKey, b: &DKey, k: usize) -> Vec<CycScalar> {
        if let Some(v) = self.entries.get(&(a.clone(), b.clone())) {
            return v.clone();
        }
        if let Some(v) = self.entries.get(&(b.clone(), a.clone())) {
            return v.iter().map(|x| -x).collect();
        }
        vec![CycScalar::zero(); k]
    }
}

fn vadd(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn vneg(a: &[i64]) -> Vec<i64> {
    a.iter().map(|x| -x).collect()
}

/// `[d_a, d_b]` in coordinates of `D^(ga+gb)` (zero vector when that space is zero).
fn d_bracket(d: &DerivationSpace, a: &DKey, b: &DKey) -> Vec<CycScalar> {
    let t = vadd(&a.0, &b.0);
    let k = d.dim_at(&t);
    match d.bracket_basis(&a.0, a.1, &b.0, b.1) {
        Some((_, c)) => c.into_iter().map(CycScalar::from_rational).collect(),
        None => vec![CycScalar::zero(); k],
    }
}

/// `d . c` for `c in (D^-mu)^*`: `(d . c)(d') = -c([d, d'])`, landing in `(D^-(mu+g))^*`.
fn d_act(d: &DerivationSpace, a: &DKey, mu: &[i64], c: &[CycScalar]) -> Vec<CycScalar> {
    let target = vneg(&vadd(mu, &a.0));
    (0..d.dim_at(&target))
        .map(|r| {
            let br = d_bracket(d, a, &(target.clone(), r));
            br.iter().zip(c).fold(CycScalar::zero(), |acc, (x, y)| acc - &(x * y))
        })
        .collect()
}

/// The five affine-cocycle invariants on `D`-degrees inside the box of radius `b`.
pub fn check_affine_cocycle(tau: &AffineCocycle, d: &DerivationSpace, b: i64) -> Report {
    let sup = d.support_in(b);
    let keys: Vec<DKey> = sup.iter().flat_map(|g| (0..d.dim_at(g)).map(move |i| (g.clone(), i))).collect();
    let dual_dim = |nu: &[i64]| d.dim_at(&vneg(nu));
    let mut graded = CheckResult::windowed(b);
    for ((a, bb), v) in &tau.entries {
        let k = dual_dim(&vadd(&a.0, &bb.0));
        graded.require(v.len() == k, || format!("tau({a:?},{bb:?}) has length {} != {k}", v.len()));
    }
    let mut alt = CheckResult::windowed(b);
    let mut zero_on_d0 = CheckResult::windowed(b);
    let mut sym = CheckResult::windowed(b);
    let mut cyc = CheckResult::windowed(b);
    let t = |x: &DKey, y: &DKey| tau.eval(x, y, dual_dim(&vadd(&x.0, &y.0)));
    for x in &keys {
        alt.require(t(x, x).iter().all(|c| c.is_zero()), || format!("tau(d,d) != 0 at {x:?}"));
        for y in &keys {
            if x.0.iter().all(|&g| g == 0) {
                zero_on_d0.require(t(x, y).iter().all(|c| c.is_zero()), || format!("tau(D^0, D) != 0 at {x:?}, {y:?}"));
            }
            let xy = vadd(&x.0, &y.0);
            let zdeg = vneg(&xy);
            for r in 0..d.dim_at(&zdeg) {
                let z = (zdeg.clone(), r);
                // tau(x,y)(z) = tau(y,z)(x)
                let l = t(x, y)[r].clone();
                let yz = vadd(&y.0, &z.0);
                let xi = d.dim_at(&vneg(&yz));
                let rr = if xi > 0 { t(y, &z)[x.1].clone() } else { CycScalar::zero() };
                sym.require(l == rr, || format!("tau({x:?},{y:?})({z:?}) != tau({y:?},{z:?})({x:?})"));
            }
            for z in &keys {
                let nu = vadd(&xy, &z.0);
                if vneg(&nu).iter().any(|v| v.abs() > b) {
                    continue;
                }
                let k = dual_dim(&nu);
                if k == 0 {
                    continue;
                }
                let mut lhs = vec![CycScalar::zero(); k];
                let mut rhs = vec![CycScalar::zero(); k];
                for (p, q, s) in [(x, y, z), (y, z, x), (z, x, y)] {
                    let c = t(q, s);
                    for (o, v) in lhs.iter_mut().zip(d_act(d, p, &vadd(&q.0, &s.0), &c)) {
                        *o += v;
                    }
                    let br = d_bracket(d, p, q);
                    let pq = vadd(&p.0, &q.0);
                    for (m, cm) in br.iter().enumerate() {
                        if cm.is_zero() {
                            continue;
                        }
                        for (o, v) in rhs.iter_mut().zip(t(&(pq.clone(), m), s)) {
                            *o += cm * &v;
                        }
                    }
                }
                cyc.require(lhs == rhs, || format!("cyclic identity fails on {x:?}, {y:?}, {z:?}"));
            }
        }
    }
    let mut r = Report::new();
    r.add("graded", graded);
    r.add("alternating", alt);
    r.add("zero-on-D0", zero_on_d0);
    r.add("symmetric", sym);
    r.add("cyclic", cyc);
    r
}

/// Which summand a coordinate of `E` belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    L(usize),
    /// Dual basis of `D^-lam`.
    C(usize),
    D(usize),
}

/// `E(L, D, tau)` as a graded handle; at `(0, lam)` coordinates are `L_0^lam`, then `(D^-lam)^*`, then `D^lam`.
pub struct Eala {
    pub l: Arc<dyn GradedLie>,
    pub d: DerivationSpace,
    pub tau: AffineCocycle,
    meta: AlgebraMeta,
}

impl Eala {
    pub fn part(&self, a: &Degree, i: usize) -> Part {
        let kl = self.l.dim(a);
        if i < kl {
            return Part::L(i);
        }
        let kc = self.c_dim(a);
        if i < kl + kc {
            Part::C(i - kl)
        } else {
            Part::D(i - kl - kc)
        }
    }

    pub fn c_dim(&self, a: &Degree) -> usize {
        if a.xi_is_zero() {
            self.d.dim_at(&vneg(&a.lam))
        } else {
            0
        }
    }

    pub fn d_dim(&self, a: &Degree) -> usize {
        if a.xi_is_zero() {
            self.d.dim_at(&a.lam)
        } else {
            0
        }
    }

    /// Offsets of the `C` and `D` blocks in degree `a`.
    pub fn offsets(&self, a: &Degree) -> (usize, usize) {
        let kl = self.l.dim(a);
        (kl, kl + self.c_dim(a))
    }

    /// Coordinates of `d_(gamma,k)` seen as an element of `E`.
    pub fn d_element(&self, gamma: &[i64], k: usize) -> Element {
        let deg = Degree::new(vec![0; self.meta.xi_dim()], gamma.to_vec());
        let (_, od) = self.offsets(&deg);
        Element::basis(self, &deg, od + k)
    }

    /// `psi_D(x, y)` for `L`-basis vectors, in `(D^-(la+mu))^*`.
    fn psi_d(&self, a: &Degree, i: usize, b: &Degree, j: usize, k: usize) -> Vec<CycScalar> {
        let nu = vneg(&vadd(&a.lam, &b.lam));
        let y = Element::basis(self.l.as_ref(), b, j);
        let x = Element::basis(self.l.as_ref(), a, i);
        (0..k)
            .map(|r| {
                let dx = self.d.member(&nu, r).apply(self.l.as_ref(), &x).expect("D acts on L");
                form(self.l.as_ref(), &dx, &y).expect("L has a form")
            })
            .collect()
    }
}

/// Assembles `E(L, D, tau)` after checking skewness of `D`, the affine cocycle and ev-injectivity.
///
/// `L` should already pass the Lie-torus and invariant-form suites.
pub fn build_eala(l: Arc<dyn GradedLie>, d: DerivationSpace, tau: AffineCocycle, b: i64) -> Result<Eala, EalaError> {
    if !l.has_form() {
        return Err(EalaError::NoForm);
    }
    let n = l.meta().n;
    if d.n != n {
        return Err(EalaError::RankMismatch { expected: n, got: d.n });
    }
    if !d.is_skew {
        for g in d.support_in(b) {
            for i in 0..d.dim_at(&g) {
                let m = d.member(&g, i);
                if !m.skew_flavor() {
                    return Err(EalaError::NotSkew(format!("theta(gamma) != 0 at {g:?}#{i}")));
                }
                let c = check_skew(l.as_ref(), &m, b.min(1))?;
                if !c.pass {
                    return Err(EalaError::NotSkew(c.witnesses.join("; ")));
                }
            }
        }
    }
    let d0 = d.basis_at(&vec![0; n]);
    let rows: Vec<Vec<CycScalar>> =
        d0.iter().map(|t| t.theta.iter().cloned().map(CycScalar::from_rational).collect()).collect();
    let rank = if n == 0 { 0 } else { linalg::rank(&rows) };
    if rank < n {
        return Err(EalaError::EvNotInjective { rank, n });
    }
    if !tau.entries.is_empty() {
        let rep = check_affine_cocycle(&tau, &d, b);
        if !rep.pass() {
            return Err(EalaError::Tau(rep.failures().join("; ")));
        }
    }
    let m = l.meta();
    let meta = AlgebraMeta {
        name: format!("E({}, D, tau)", m.name),
        family: "eala".into(),
        system: m.system.clone(),
        system_id: m.system_id,
        n,
    };
    Ok(Eala { l, d, tau, meta })
}

impl GradedLie for Eala {
    fn meta(&self) -> &AlgebraMeta {
        &self.meta
    }

    fn dim(&self, a: &Degree) -> usize {
        self.l.dim(a) + self.c_dim(a) + self.d_dim(a)
    }

    fn bracket(&self, a: &Degree, i: usize, b: &Degree, j: usize) -> Vec<CycScalar> {
        let t = a.add(b);
        let mut out = vec![CycScalar::zero(); self.dim(&t)];
        let (oc, od) = self.offsets(&t);
        match (self.part(a, i), self.part(b, j)) {
            (Part::L(x), Part::L(y)) => {
                for (o, v) in out.iter_mut().zip(self.l.bracket(a, x, b, y)) {
                    *o = v;
                }
                let k = self.c_dim(&t);
                if k > 0 {
                    for (r, v) in self.psi_d(a, x, b, y, k).into_iter().enumerate() {
                        out[oc + r] = v;
                    }
                }
            }
            (Part::D(x), Part::L(y)) | (Part::L(y), Part::D(x)) => {
                let (dd, ld) = if matches!(self.part(a, i), Part::D(_)) { (a, b) } else { (b, a) };
                let sign = if matches!(self.part(a, i), Part::D(_)) { CycScalar::one() } else { CycScalar::from_int(-1) };
                let m = self.d.member(&dd.lam, x);
                if let Some((_, v)) = m.apply_basis(self.l.as_ref(), ld, y).expect("D acts on L") {
                    for (o, w) in out.iter_mut().zip(v) {
                        *o = &w * &sign;
                    }
                }
            }
            (Part::D(x), Part::C(y)) | (Part::C(y), Part::D(x)) => {
                let (dd, cd) = if matches!(self.part(a, i), Part::D(_)) { (a, b) } else { (b, a) };
                let sign = if matches!(self.part(a, i), Part::D(_)) { CycScalar::one() } else { CycScalar::from_int(-1) };
                let mut c = vec![CycScalar::zero(); self.c_dim(cd)];
                c[y] = CycScalar::one();
                let v = d_act(&self.d, &(dd.lam.clone(), x), &cd.lam, &c);
                for (r, w) in v.into_iter().enumerate() {
                    out[oc + r] = &w * &sign;
                }
            }
            (Part::D(x), Part::D(y)) => {
                let ka = (a.lam.clone(), x);
                let kb = (b.lam.clone(), y);
                let k = self.c_dim(&t);
                for (r, w) in self.tau.eval(&ka, &kb, k).into_iter().enumerate() {
                    out[oc + r] = w;
                }
                for (r, w) in d_bracket(&self.d, &ka, &kb).into_iter().enumerate() {
                    out[od + r] = w;
                }
            }
            _ => {}
        }
        out
    }

    fn label(&self, a: &Degree, i: usize) -> String {
        match self.part(a, i) {
            Part::L(x) => self.l.label(a, x),
            Part::C(x) => format!("c{x}{:?}", a.lam),
            Part::D(x) => format!("d{x}{:?}", a.lam),
        }
    }

    fn has_form(&self) -> bool {
        true
    }

    fn form(&self, a: &Degree, i: usize, b: &Degree, j: usize) -> Option<CycScalar> {
        if !a.add(b).is_zero() {
            return Some(CycScalar::zero());
        }
        Some(match (self.part(a, i), self.part(b, j)) {
            (Part::L(x), Part::L(y)) => self.l.form(a, x, b, y)?,
            (Part::C(x), Part::D(y)) | (Part::D(y), Part::C(x)) => {
                if x == y {
                    CycScalar::one()
                } else {
                    CycScalar::zero()
                }
            }
            _ => CycScalar::zero(),
        })
    }

    fn xi_support(&self) -> Vec<Vec<i64>> {
        self.l.xi_support()
    }
}

/// `H = E_0`, its Gram matrix and inverse, and the root functionals on the `L_0^0` part.
pub struct Toral {
    pub zero: Degree,
    pub dim: usize,
    pub gram: Vec<Vec<CycScalar>>,
    pub gram_inv: Vec<Vec<CycScalar>>,
    /// Linear map `xi -> (xi(h_i))_i` from ambient root coordinates, one row per `h_i`.
    pub xi_map: Vec<Vec<CycScalar>>,
    pub xi_map_ok: bool,
}

fn eigenvalue(e: &Eala, h: usize, x: &Basis) -> Option<CycScalar> {
    let v = e.bracket(&e.zero_degree(), h, &x.0, x.1);
    let Some((k, c)) = v.iter().enumerate().find(|(_, c)| !c.is_zero()) else { return Some(CycScalar::zero()) };
    if k != x.1 {
        return None;
    }
    if v.iter().enumerate().any(|(m, c)| m != x.1 && !c.is_zero()) {
        return None;
    }
    Some(c.clone())
}

impl Eala {
    pub fn zero_degree(&self) -> Degree {
        Degree::new(vec![0; self.meta.xi_dim()], vec![0; self.meta.n])
    }

    pub fn toral(&self) -> Toral {
        let zero = self.zero_degree();
        let dim = self.dim(&zero);
        let gram: Vec<Vec<CycScalar>> =
            (0..dim).map(|i| (0..dim).map(|j| self.form(&zero, i, &zero, j).expect("form")).collect()).collect();
        let gram_inv = linalg::inverse(&gram).unwrap_or_default();
        // xi(h_i) read off on L_xi^0 (or the nearest nonzero lam), then fitted linearly
        let kl = self.l.dim(&zero);
        let xd = self.meta.xi_dim();
        let mut samples: Vec<(Vec<i64>, Vec<CycScalar>)> = Vec::new();
        let mut ok = true;
        for xi in self.xi_support() {
            if xi.iter().all(|&x| x == 0) {
                continue;
            }
            let found = box_points(self.meta.n, 2).into_iter().map(|lam| Degree::new(xi.clone(), lam)).find(|d| self.l.dim(d) > 0);
            let Some(d) = found else { continue };
            let vals: Vec<Option<CycScalar>> = (0..kl).map(|h| eigenvalue(self, h, &(d.clone(), 0))).collect();
            if vals.iter().any(|v| v.is_none()) {
                ok = false;
                continue;
            }
            samples.push((xi, vals.into_iter().map(|v| v.unwrap()).collect()));
        }
        // solve xi_map * xi = vals for each h_i
        let mut xi_map = vec![vec![CycScalar::zero(); xd]; kl];
        for (hi, row) in xi_map.iter_mut().enumerate() {
            let mut ech = Echelon::new();
            for (xi, vals) in &samples {
                let mut r: Vec<CycScalar> = xi.iter().map(|&x| CycScalar::from_int(x)).collect();
                r.push(vals[hi].clone());
                ech.insert(&sparse_from_dense(&r));
            }
            match ech.particular_solution(xd) {
                Some(s) => *row = s,
                None => ok = false,
            }
        }
        Toral { zero, dim, gram, gram_inv, xi_map, xi_map_ok: ok }
    }

    /// Declared functional of degree `(xi, lam)` on the basis of `H`.
    pub fn functional(&self, t: &Toral, d: &Degree) -> Vec<CycScalar> {
        let kl = self.l.dim(&t.zero);
        let (_, od) = self.offsets(&t.zero);
        let mut v = vec![CycScalar::zero(); t.dim];
        for (hi, row) in t.xi_map.iter().enumerate().take(kl) {
            v[hi] = row.iter().zip(&d.xi).fold(CycScalar::zero(), |acc, (a, &x)| acc + a * &CycScalar::from_int(x));
        }
        let n = self.meta.n;
        for (k, th) in self.d.basis_at(&vec![0; n]).iter().enumerate() {
            v[od + k] = CycScalar::from_rational(th.eval(&d.lam));
        }
        v
    }

    /// `(alpha | beta)` through the inverse Gram matrix of `H`.
    pub fn dual_form(&self, t: &Toral, a: &[CycScalar], b: &[CycScalar]) -> CycScalar {
        let gb = linalg::mat_vec(&t.gram_inv, b);
        a.iter().zip(&gb).fold(CycScalar::zero(), |acc, (x, y)| acc + x * y)
    }

    /// `t_alpha` with `(t_alpha | h) = alpha(h)`, in `H` coordinates.
    pub fn coroot_vector(&self, t: &Toral, a: &[CycScalar]) -> Vec<CycScalar> {
        linalg::mat_vec(&t.gram_inv, a)
    }

    fn is_core_coord(&self, d: &Degree, i: usize) -> bool {
        !matches!(self.part(d, i), Part::D(_))
    }
}

fn nilpotent_within(memo: &Memo, x: &Element, y: &Element, steps: usize) -> bool {
    let mut cur = y.clone();
    for _ in 0..steps {
        cur = bracket_memo(memo, x, &cur);
        if cur.is_zero() {
            return true;
        }
    }
    false
}

/// Null-root span rank on the window of radius `b`.
fn null_rank(e: &Eala, b: i64) -> (usize, Vec<Vec<i64>>) {
    let xi0 = vec![0; e.meta.xi_dim()];
    let pts: Vec<Vec<i64>> =
        box_points(e.meta.n, b).into_iter().filter(|lam| e.dim(&Degree::new(xi0.clone(), lam.clone())) > 0).collect();
    (Lattice::from_generators(e.meta.n, &pts).rank(), pts)
}

/// Per-axiom report; `nullity` from (EA6).
#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub report: Report,
    pub window: i64,
    pub nullity: usize,
}

impl AxiomReport {
    pub fn pass(&self) -> bool {
        self.report.pass()
    }
}

/// Exponent used for (EA3).
pub const EA3_STEPS: usize = 6;

fn kernel_of_ad(e: &Eala, memo: &Memo, d: &Degree, tests: &[Basis]) -> Vec<Vec<CycScalar>> {
    let k = e.dim(d);
    let mut ech = Echelon::new();
    for (c, j) in tests {
        let cols: Vec<_> = (0..k).map(|i| memo.bracket(d, i, c, *j)).collect();
        let m = cols.first().map_or(0, |v| v.len());
        for row in 0..m {
            let r: Vec<CycScalar> = (0..k).map(|i| cols[i][row].clone()).collect();
            ech.insert(&sparse_from_dense(&r));
        }
        if ech.rank() == k {
            break;
        }
    }
    ech.kernel(k)
}

/// Symmetry, invariance and degreewise nondegeneracy of the form on the window.
pub fn check_ea1(h: &dyn GradedLie, b: i64) -> CheckResult {
    let mut ea1 = CheckResult::windowed(b);
    match check_invariant_form(h, b) {
        Ok(r) => {
            for (name, c) in r.checks {
                let mut c = c;
                c.witnesses = c.witnesses.into_iter().map(|w| format!("{name}: {w}")).collect();
                ea1.absorb(c);
            }
        }
        Err(err) => ea1.fail(err.to_string()),
    }
    ea1
}

pub fn check_eala_axioms(e: &Eala, b: i64) -> AxiomReport {
    let mut rep = Report::new();
    let memo = Memo::new(e);
    let basis = window_basis(e, b);

    rep.add("EA1", check_ea1(e, b));

    // EA2
    let t = e.toral();
    let mut ea2 = CheckResult::windowed(b);
    ea2.require(t.xi_map_ok, || "root functionals on L_0^0 are not additive".into());
    ea2.require(!t.gram_inv.is_empty() || t.dim == 0, || "form on H is degenerate".into());
    for i in 0..t.dim {
        for j in 0..t.dim {
            let v = memo.bracket(&t.zero, i, &t.zero, j);
            ea2.require(v.iter().all(|x| x.is_zero()), || format!("H not abelian at ({i},{j})"));
        }
    }
    let mut seen: BTreeMap<Vec<String>, Degree> = BTreeMap::new();
    for d in window_degrees(e, b) {
        let f = e.functional(&t, &d);
        if let Some(prev) = seen.insert(f.iter().map(|x| x.canonical().to_string()).collect(), d.clone()) {
            ea2.fail(format!("degrees {prev} and {d} share a functional"));
        }
        for i in 0..e.dim(&d) {
            let x = Element::basis(e, &d, i);
            for (hi, fv) in f.iter().enumerate() {
                let hx = bracket_memo(&memo, &Element::basis(e, &t.zero, hi), &x);
                ea2.require(hx == x.scale(fv), || format!("{} is not an eigenvector of h{hi} with eigenvalue {fv}", e.label(&d, i)));
            }
        }
    }
    ea2.set("dim_H", t.dim);
    rep.add("EA2", ea2);

    // EA3
    let mut ea3 = CheckResult::windowed(b);
    let ys: Vec<Element> = basis.iter().map(|(d, i)| Element::basis(e, d, *i)).collect();
    for (d, i) in basis.iter().filter(|(d, _)| !d.xi_is_zero()) {
        let x = Element::basis(e, d, *i);
        for (y, (dy, j)) in ys.iter().zip(&basis) {
            ea3.require(nilpotent_within(&memo, &x, y, EA3_STEPS), || {
                format!("(ad {})^{EA3_STEPS} {} != 0", e.label(d, *i), e.label(dy, *j))
            });
        }
    }
    ea3.set("steps", EA3_STEPS);
    rep.add("EA3", ea3);

    // EA4
    let mut ea4 = CheckResult::windowed(b);
    let s = &e.meta.system;
    if s.nonzero().next().is_some() {
        ea4.require(s.is_irreducible(), || "S is reducible".into());
        let an: Vec<Vec<CycScalar>> =
            window_degrees(e, b).iter().filter(|d| !d.xi_is_zero()).map(|d| e.functional(&t, d)).collect();
        if !an.is_empty() {
            let mut seen = vec![false; an.len()];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(p) = queue.pop_front() {
                for q in 0..an.len() {
                    if !seen[q] && !e.dual_form(&t, &an[p], &an[q]).is_zero() {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
            ea4.require(seen.iter().all(|&x| x), || "window anisotropic roots are not connected".into());
        }
    }
    rep.add("EA4", ea4);

    // EA5: centralizer of the core meets D trivially
    let mut ea5 = CheckResult::windowed(b);
    let core: Vec<Basis> = basis.iter().filter(|(d, i)| e.is_core_coord(d, *i)).cloned().collect();
    for d in window_degrees(e, b).into_iter().filter(|d| d.xi_is_zero()) {
        let ker = kernel_of_ad(e, &memo, &d, &core);
        let (_, od) = e.offsets(&d);
        for v in &ker {
            ea5.require(v[od..].iter().all(|x| x.is_zero()), || format!("centralizer of the core meets D in degree {d}"));
        }
    }
    // the core is an ideal: brackets with D never produce D-parts
    for (d, i) in basis.iter().filter(|(d, i)| !e.is_core_coord(d, *i)) {
        for (c, j) in &core {
            let v = memo.bracket(d, *i, c, *j);
            let t_ = d.add(c);
            let (_, od) = e.offsets(&t_);
            ea5.require(v.len() <= od || v[od..].iter().all(|x| x.is_zero()), || {
                format!("[{}, {}] leaves the core", e.label(d, *i), e.label(c, *j))
            });
        }
    }
    rep.add("EA5", ea5);

    // EA6
    let (r, _) = null_rank(e, b);
    let (r1, _) = null_rank(e, b + 1);
    let mut ea6 = CheckResult::windowed(b);
    ea6.require(r == r1, || format!("null-root rank {r} at B changes to {r1} at B+1"));
    ea6.require(r == e.meta.n, || format!("null-root rank {r} != n = {}", e.meta.n));
    ea6.set("rank", r);
    rep.add("EA6", ea6);

    AxiomReport { report: rep, window: b, nullity: r }
}

/// Core, centre of the core and centreless core, compared with `L + D^gr*` and `L` degreewise.
#[derive(Clone, Debug, Serialize)]
pub struct CoreReport {
    pub report: Report,
    pub core_dims: BTreeMap<String, usize>,
    pub centre_dims: BTreeMap<String, usize>,
    pub centreless_dims: BTreeMap<String, usize>,
}

impl CoreReport {
    pub fn pass(&self) -> bool {
        self.report.pass()
    }
}

pub fn core_and_centreless_core(e: &Eala, b: i64) -> CoreReport {
    let memo = Memo::new(e);
    let degs = window_degrees(e, b);
    let mut span_ok = CheckResult::windowed(b);
    let mut core_dims = BTreeMap::new();
    let mut centre_dims = BTreeMap::new();
    let mut centreless_dims = BTreeMap::new();
    let an: Vec<&Degree> = degs.iter().filter(|d| !d.xi_is_zero()).collect();
    for d in &degs {
        let k = e.dim(d);
        let mut ech = Echelon::new();
        if !d.xi_is_zero() {
            for i in 0..k {
                let mut v = vec![CycScalar::zero(); k];
                v[i] = CycScalar::one();
                ech.insert(&sparse_from_dense(&v));
            }
        } else {
            for a in &an {
                let partner = d.add(&a.neg());
                if partner.lam_radius() > b || e.dim(&partner) == 0 {
                    continue;
                }
                for i in 0..e.dim(a) {
                    for j in 0..e.dim(&partner) {
                        ech.insert(&sparse_from_dense(&memo.bracket(a, i, &partner, j)));
                    }
                }
            }
        }
        let want = e.l.dim(d) + e.c_dim(d);
        let (_, od) = e.offsets(d);
        let inside = ech.rows().all(|(_, r)| r.iter().all(|(c, _)| *c < od));
        span_ok.require(ech.rank() == want && inside, || {
            format!("core at {d} has dim {} (inside L + D^gr*: {inside}), expected {want}", ech.rank())
        });
        core_dims.insert(d.to_string(), ech.rank());
    }

    // centre of K = L + D^gr* and the radical of the form on K
    let kbasis: Vec<Basis> = window_basis(e, b).into_iter().filter(|(d, i)| e.is_core_coord(d, *i)).collect();
    let mut centre = CheckResult::windowed(b);
    let mut radical = CheckResult::windowed(b);
    for d in &degs {
        let kd = e.l.dim(d) + e.c_dim(d);
        if kd == 0 {
            continue;
        }
        let mut ech = Echelon::new();
        for (c, j) in &kbasis {
            let cols: Vec<_> = (0..kd).map(|i| memo.bracket(d, i, c, *j)).collect();
            let m = cols.first().map_or(0, |v| v.len());
            for row in 0..m {
                let r: Vec<CycScalar> = (0..kd).map(|i| cols[i][row].clone()).collect();
                ech.insert(&sparse_from_dense(&r));
            }
            if ech.rank() == kd {
                break;
            }
        }
        let z = ech.kernel(kd);
        let nd = d.neg();
        let knd = e.l.dim(&nd) + e.c_dim(&nd);
        let gram: Vec<Vec<CycScalar>> = (0..knd)
            .map(|j| (0..kd).map(|i| e.form(d, i, &nd, j).expect("form")).collect())
            .collect();
        let rad = linalg::kernel(&gram, kd);
        let same = linalg::rank(&z) == z.len()
            && z.len() == rad.len()
            && {
                let mut both = z.clone();
                both.extend(rad.iter().cloned());
                linalg::rank(&both) == z.len()
            };
        radical.require(same, || format!("radical and centre of the core differ at {d}"));
        let quot = kd - z.len();
        centre.require(quot == e.l.dim(d), || format!("K/Z(K) at {d} has dim {quot}, L has {}", e.l.dim(d)));
        if !z.is_empty() {
            centre_dims.insert(d.to_string(), z.len());
        }
        centreless_dims.insert(d.to_string(), quot);
    }
    let mut report = Report::new();
    report.add("core-equals-L+Dgr*", span_ok);
    report.add("centreless-core-dims", centre);
    report.add("radical-is-centre", radical);
    CoreReport { report, core_dims, centre_dims, centreless_dims }
}

/// Window roots with their classification, pairing checks and the EARS verdict.
#[derive(Debug, Serialize)]
pub struct RootsReport {
    pub report: Report,
    pub anisotropic: Vec<Degree>,
    pub null: Vec<Vec<i64>>,
    pub nullity: usize,
    pub quotient: Option<QuotientResult>,
    pub ears: Option<EarsReport>,
}

impl RootsReport {
    pub fn pass(&self) -> bool {
        self.report.pass() && self.ears.as_ref().is_some_and(|r| r.pass())
    }
}

pub fn roots_and_nullity(e: &Eala, b: i64) -> RootsReport {
    let memo = Memo::new(e);
    let t = e.toral();
    let degs = window_degrees(e, b);
    let mut classes = CheckResult::windowed(b);
    let mut pairing = CheckResult::windowed(b);
    let mut one_dim = CheckResult::windowed(b);
    let mut heis = CheckResult::windowed(b);
    let mut anisotropic = Vec::new();
    let mut null = Vec::new();
    let mut funcs = Vec::new();
    let h_el = |v: &[CycScalar]| Element::homogeneous(t.zero.clone(), v.to_vec());
    for d in &degs {
        let f = e.functional(&t, d);
        let norm = e.dual_form(&t, &f, &f);
        let iso = norm.is_zero();
        classes.require(iso == d.xi_is_zero(), || format!("root {d} has (a|a) = {norm}"));
        if d.xi_is_zero() {
            null.push(d.lam.clone());
        } else {
            anisotropic.push(d.clone());
            one_dim.require(e.dim(d) == 1, || format!("dim E_{d} = {}", e.dim(d)));
        }
        funcs.push(f.clone());
        if d.is_zero() {
            continue;
        }
        let nd = d.neg();
        if !degs.contains(&nd) {
            continue;
        }
        let ta = e.coroot_vector(&t, &f);
        for i in 0..e.dim(d) {
            for j in 0..e.dim(&nd) {
                let xy = memo.bracket(d, i, &nd, j);
                let fxy = e.form(d, i, &nd, j).expect("form");
                let want: Vec<CycScalar> = ta.iter().map(|x| x * &fxy).collect();
                pairing.require(*xy == want, || format!("[x,y] != (x|y) t_a for {}, {}", e.label(d, i), e.label(&nd, j)));
            }
        }
        if d.xi_is_zero() {
            // a pair with (x|y) = 1 spans a Heisenberg algebra with t_lam
            let pair = (0..e.dim(d)).flat_map(|i| (0..e.dim(&nd)).map(move |j| (i, j))).find(|&(i, j)| {
                !e.form(d, i, &nd, j).expect("form").is_zero()
            });
            match pair {
                Some((i, j)) => {
                    let s = e.form(d, i, &nd, j).expect("form").inv().expect("nonzero");
                    let x = Element::basis(e, d, i).scale(&s);
                    let y = Element::basis(e, &nd, j);
                    let tl = h_el(&ta);
                    let xy = bracket_memo(&memo, &x, &y);
                    heis.require(xy == tl, || format!("[x,y] != t_lam at {d}"));
                    heis.require(bracket_memo(&memo, &tl, &x).is_zero() && bracket_memo(&memo, &tl, &y).is_zero(), || {
                        format!("t_lam not central in the Heisenberg triple at {d}")
                    });
                }
                None => heis.fail(format!("form pairs E_{d} and E_-{d} trivially")),
            }
        }
    }
    let (nullity, _) = null_rank(e, b);
    let mut report = Report::new();
    report.add("isotropy-classes", classes);
    report.add("pairing-identity", pairing);
    report.add("anisotropic-dim-1", one_dim);
    report.add("heisenberg", heis);
    let input = QuotientInput { roots: funcs, gram: t.gram_inv.clone() };
    let mut quot = CheckResult::windowed(b);
    let (quotient, ears) = match quotient_root_system(&input) {
        Ok(q) => {
            quot.require(q.classes_consistent, || "fibres differ within a length class".into());
            let ears = match build_ars(&q.datum) {
                Ok(ars) => Some(check_ears(&ars, b)),
                Err(err) => {
                    quot.fail(format!("extracted datum rejected: {err}"));
                    None
                }
            };
            (Some(q), ears)
        }
        Err(err) => {
            quot.fail(err.to_string());
            (None, None)
        }
    };
    if let Some(er) = &ears {
        quot.require(er.nullity.is_none_or(|k| k == nullity), || format!("EARS nullity {:?} != {nullity}", er.nullity));
    }
    report.add("quotient", quot);
    RootsReport { report, anisotropic, null, nullity, quotient, ears }
}

/// JSON form of `E(L, D, tau)` inputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TauSpec {
    pub entries: Vec<(DKey, DKey, Vec<CycScalar>)>,
}

impl TauSpec {
    pub fn into_cocycle(self) -> AffineCocycle {
        AffineCocycle { entries: self.entries.into_iter().map(|(a, b, v)| ((a, b), v)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivations::{DegreeMap, SpaceKind};
    use crate::realizations::{quantum_torus, sl_torus, split_sl, QuantumMatrix};

    fn laurent(n: usize) -> Arc<dyn GradedLie> {
        Arc::new(sl_torus(3, &quantum_torus(&QuantumMatrix::laurent(n)).unwrap()).unwrap())
    }

    #[test]
    fn nullity_zero() {
        let l: Arc<dyn GradedLie> = Arc::new(split_sl(3).unwrap());
        let e = build_eala(l.clone(), DerivationSpace::zero(0), AffineCocycle::zero(), 1).unwrap();
        let z = e.zero_degree();
        assert_eq!(e.dim(&z), 2);
        let ax = check_eala_axioms(&e, 1);
        assert!(ax.pass(), "{:?}", ax.report.failures());
        assert_eq!(ax.nullity, 0);
        let core = core_and_centreless_core(&e, 1);
        assert!(core.pass(), "{:?}", core.report.failures());
        let r = roots_and_nullity(&e, 1);
        assert!(r.pass(), "{:?} {:?}", r.report.failures(), r.ears.as_ref().map(|x| x.report.failures()));
        assert_eq!(r.null, vec![Vec::<i64>::new()]);
    }

    #[test]
    fn affine_loop() {
        let l = laurent(1);
        let d = DerivationSpace::degree_only(1, Lattice::full(1));
        let e = build_eala(l, d, AffineCocycle::zero(), 2).unwrap();
        assert_eq!(e.dim(&e.zero_degree()), 4);
        let ax = check_eala_axioms(&e, 2);
        assert!(ax.pass(), "{:?}", ax.report.failures());
        assert_eq!(ax.nullity, 1);
        let core = core_and_centreless_core(&e, 2);
        assert!(core.pass(), "{:?}", core.report.failures());
        assert_eq!(core.centre_dims.len(), 1);
        let r = roots_and_nullity(&e, 2);
        assert!(r.pass(), "{:?}", r.report.failures());
    }

    #[test]
    fn ev_must_be_injective() {
        let l = laurent(2);
        let mut m = BTreeMap::new();
        m.insert(vec![0, 0], vec![DegreeMap::unit(2, 0)]);
        let d = DerivationSpace { n: 2, gamma: Lattice::full(2), kind: SpaceKind::Custom(m), is_subalgebra: true, is_skew: true };
        assert!(matches!(build_eala(l, d, AffineCocycle::zero(), 1), Err(EalaError::EvNotInjective { .. })));
    }

    #[test]
    fn killed_form_fails_ea1() {
        let e = build_eala(laurent(1), DerivationSpace::degree_only(1, Lattice::full(1)), AffineCocycle::zero(), 1).unwrap();
        let at = Degree::new(vec![1, -1, 0], vec![1]);
        let c = check_ea1(&crate::gradedlie::FormKilledAt { inner: &e, at }, 1);
        assert!(!c.pass);
        assert!(!c.witnesses.is_empty());
    }

    #[test]
    fn tau_invariants() {
        let d = DerivationSpace::degree_only(1, Lattice::full(1));
        let mut tau = AffineCocycle::zero();
        tau.entries.insert(((vec![0], 0), (vec![0], 0)), vec![CycScalar::one()]);
        let r = check_affine_cocycle(&tau, &d, 1);
        assert!(!r.pass());
        assert!(check_affine_cocycle(&AffineCocycle::zero(), &DerivationSpace::full(2, Lattice::full(2)), 1).pass());
    }
}

#[cfg(test)]
mod nullity_two {
    use super::*;
    use crate::realizations::{quantum_torus, sl_torus, QuantumMatrix};
    use crate::scalars::primitive_root;

    fn run(qm: QuantumMatrix) {
        let l: Arc<dyn GradedLie> = Arc::new(sl_torus(3, &quantum_torus(&qm).unwrap()).unwrap());
        let g = l.centroid_support().unwrap();
        let e = build_eala(l, DerivationSpace::degree_only(2, g), AffineCocycle::zero(), 2).unwrap();
        let ax = check_eala_axioms(&e, 2);
        assert!(ax.pass(), "{:?}", ax.report.failures());
        assert_eq!(ax.nullity, 2);
        let core = core_and_centreless_core(&e, 2);
        assert!(core.pass(), "{:?}", core.report.failures());
        let r = roots_and_nullity(&e, 2);
        assert!(r.pass(), "{:?} {:?}", r.report.failures(), r.ears.as_ref().map(|x| x.report.failures()));
    }

    #[test]
    fn laurent_two() {
        run(QuantumMatrix::laurent(2));
    }

    #[test]
    fn quantum_three() {
        run(QuantumMatrix::two(primitive_root(3).unwrap()).unwrap());
    }
}

