//! Doubly graded Lie algebras given by closed-form brackets, sparse elements
//! and the generic window checkers.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Lattice;
use crate::linalg::{self, sparse_from_dense, Echelon};
use crate::refsys::box_points;
use crate::report::{CheckResult, Report};
use crate::rootsys::{pairing, reflect, LengthClass, RootSystem, RootSystemId};
use crate::scalars::{CycScalar, IntegerFrame, Q};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Degree {
    /// Ambient coordinates of the root part.
    pub xi: Vec<i64>,
    pub lam: Vec<i64>,
}

impl Degree {
    pub fn new(xi: Vec<i64>, lam: Vec<i64>) -> Self {
        Degree { xi, lam }
    }

    pub fn add(&self, o: &Degree) -> Degree {
        Degree {
            xi: self.xi.iter().zip(&o.xi).map(|(a, b)| a + b).collect(),
            lam: self.lam.iter().zip(&o.lam).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn neg(&self) -> Degree {
        Degree { xi: self.xi.iter().map(|x| -x).collect(), lam: self.lam.iter().map(|x| -x).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.xi.iter().chain(&self.lam).all(|&x| x == 0)
    }

    pub fn xi_is_zero(&self) -> bool {
        self.xi.iter().all(|&x| x == 0)
    }

    pub fn lam_radius(&self) -> i64 {
        self.lam.iter().map(|x| x.abs()).max().unwrap_or(0)
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?},{:?})", self.xi, self.lam)
    }
}

/// A homogeneous basis vector: degree and index within that degree.
pub type Basis = (Degree, usize);

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraMeta {
    pub name: String,
    pub family: String,
    /// The root system `S`, in the coordinates used by `Degree::xi`.
    pub system: RootSystem,
    pub system_id: Option<RootSystemId>,
    pub n: usize,
}

impl AlgebraMeta {
    pub fn new(name: impl Into<String>, family: impl Into<String>, system: RootSystem, n: usize) -> Self {
        let system_id = system.identify();
        AlgebraMeta { name: name.into(), family: family.into(), system, system_id, n }
    }

    pub fn xi_dim(&self) -> usize {
        self.system.dim
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GradedError {
    #[error("degree {0} is outside the declared support")]
    OutsideSupport(String),
    #[error("the algebra carries no invariant form")]
    NoForm,
    #[error("no sl2 triple at {0}")]
    MissingSl2(String),
    #[error("ad is not nilpotent within {0} steps")]
    NotNilpotent(usize),
}

/// An intensional `(Q(S), Lambda)`-graded Lie algebra.
pub trait GradedLie: Send + Sync {
    fn meta(&self) -> &AlgebraMeta;

    fn dim(&self, d: &Degree) -> usize;

    /// Coordinates of `[b_(a,i), b_(b,j)]` in degree `a + b`.
    fn bracket(&self, a: &Degree, i: usize, b: &Degree, j: usize) -> Vec<CycScalar>;

    fn label(&self, d: &Degree, i: usize) -> String {
        format!("b{i}{d}")
    }

    fn has_form(&self) -> bool {
        false
    }

    fn form(&self, _a: &Degree, _i: usize, _b: &Degree, _j: usize) -> Option<CycScalar> {
        None
    }

    /// Root parts that may carry nonzero spaces.
    fn xi_support(&self) -> Vec<Vec<i64>> {
        self.meta().system.roots.clone()
    }

    /// Form on the coefficient algebra ignoring torus degrees (multiloop realizations).
    fn coefficient_form(&self, _a: &Degree, _i: usize, _b: &Degree, _j: usize) -> Option<CycScalar> {
        None
    }

    /// Known support of the centroid.
    fn centroid_support(&self) -> Option<Lattice> {
        None
    }

    /// Coordinates of `chi^gamma(b_(a,i))` in degree `(a.xi, a.lam + gamma)`.
    fn centroid_element(&self, _gamma: &[i64], _a: &Degree, _i: usize) -> Option<Vec<CycScalar>> {
        None
    }
}

pub fn window_degrees(h: &dyn GradedLie, b: i64) -> Vec<Degree> {
    let n = h.meta().n;
    let lams = box_points(n, b);
    let mut out = Vec::new();
    for xi in h.xi_support() {
        for lam in &lams {
            let d = Degree::new(xi.clone(), lam.clone());
            if h.dim(&d) > 0 {
                out.push(d);
            }
        }
    }
    out
}

/// Structure constants indexed by position: window pairs land in "sum" degrees, which are then
/// bracketed against the window once each.
fn jacobi_failures(h: &dyn GradedLie, basis: &[Basis], memo: &Memo) -> Vec<String> {
    let nb = basis.len();
    let mut sum_off: HashMap<Degree, usize> = HashMap::new();
    let mut sums: Vec<Basis> = Vec::new();
    for (a, _) in basis {
        for (c, _) in basis {
            let d = a.add(c);
            if !sum_off.contains_key(&d) {
                let k = h.dim(&d);
                sum_off.insert(d.clone(), sums.len());
                sums.extend((0..k).map(|m| (d.clone(), m)));
            }
        }
    }
    let ns = sums.len();
    // pair[q * nb + r] = (offset of the sum degree, [b_q, b_r])
    let pair: Vec<(usize, Arc<Vec<CycScalar>>)> = (0..nb * nb)
        .into_par_iter()
        .map(|k| {
            let (y, z) = (&basis[k / nb], &basis[k % nb]);
            (sum_off[&y.0.add(&z.0)], memo.bracket(&y.0, y.1, &z.0, z.1))
        })
        .collect();
    // outer[p * ns + s] = [b_p, sums[s]]
    let outer: Vec<Vec<CycScalar>> = (0..nb * ns)
        .into_par_iter()
        .map(|k| {
            let (x, w) = (&basis[k / ns], &sums[k % ns]);
            let t = x.0.add(&w.0);
            if h.dim(&t) == 0 {
                Vec::new()
            } else {
                h.bracket(&x.0, x.1, &w.0, w.1)
            }
        })
        .collect();
    let frame = IntegerFrame::for_values(pair.iter().flat_map(|(_, v)| v.iter()).chain(outer.iter().flatten()));
    let ints = |v: &[CycScalar]| -> Option<Vec<Vec<i64>>> { v.iter().map(|c| frame.coords(c)).collect() };
    let pair_i: Option<Vec<Vec<Vec<i64>>>> = pair.iter().map(|(_, v)| ints(v)).collect();
    let outer_i: Option<Vec<Vec<Vec<i64>>>> = outer.iter().map(|v| ints(v)).collect();
    let exact = |p: usize, q: usize, r: usize, k: usize| -> bool {
        let mut acc = vec![CycScalar::zero(); k];
        for (x, y, z) in [(p, q, r), (q, r, p), (r, p, q)] {
            let (off, yz) = &pair[y * nb + z];
            for (m, c) in yz.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                for (a, v) in acc.iter_mut().zip(&outer[x * ns + off + m]) {
                    if !v.is_zero() {
                        *a += c * v;
                    }
                }
            }
        }
        acc.iter().all(|c| c.is_zero())
    };
    let scaled = |p: usize, q: usize, r: usize, k: usize| -> bool {
        let (Some(pi), Some(oi)) = (&pair_i, &outer_i) else { return exact(p, q, r, k) };
        let phi = frame.phi();
        let mut acc = vec![0i128; k * phi];
        for (x, y, z) in [(p, q, r), (q, r, p), (r, p, q)] {
            let off = pair[y * nb + z].0;
            for (m, c) in pi[y * nb + z].iter().enumerate() {
                if c.iter().all(|&t| t == 0) {
                    continue;
                }
                for (t, v) in oi[x * ns + off + m].iter().enumerate() {
                    if !frame.mul_add(&mut acc[t * phi..(t + 1) * phi], c, v) {
                        return exact(p, q, r, k);
                    }
                }
            }
        }
        acc.iter().all(|&t| t == 0)
    };
    (0..nb)
        .into_par_iter()
        .flat_map_iter(|p| {
            let scaled = &scaled;
            (p + 1..nb).flat_map(move |q| {
                (q + 1..nb).filter_map(move |r| {
                    let k = h.dim(&basis[p].0.add(&basis[q].0).add(&basis[r].0));
                    if k == 0 || scaled(p, q, r, k) {
                        return None;
                    }
                    let l = |t: usize| h.label(&basis[t].0, basis[t].1);
                    Some(format!("Jacobi fails on ({}, {}, {})", l(p), l(q), l(r)))
                })
            })
        })
        .collect()
}

pub fn window_basis(h: &dyn GradedLie, b: i64) -> Vec<Basis> {
    window_degrees(h, b).into_iter().flat_map(|d| (0..h.dim(&d)).map(move |i| (d.clone(), i))).collect()
}

/// Memoized structure constants.
pub struct Memo<'a> {
    pub h: &'a dyn GradedLie,
    table: DashMap<(Degree, usize, Degree, usize), Arc<Vec<CycScalar>>>,
}

impl<'a> Memo<'a> {
    pub fn new(h: &'a dyn GradedLie) -> Self {
        Memo { h, table: DashMap::new() }
    }

    pub fn bracket(&self, a: &Degree, i: usize, b: &Degree, j: usize) -> Arc<Vec<CycScalar>> {
        let key = (a.clone(), i, b.clone(), j);
        if let Some(v) = self.table.get(&key) {
            return v.clone();
        }
        let v = Arc::new(self.h.bracket(a, i, b, j));
        self.table.insert(key, v.clone());
        v
    }
}

/// Sparse element: nonzero homogeneous components.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Element {
    pub parts: BTreeMap<Degree, Vec<CycScalar>>,
}

impl Element {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(h: &dyn GradedLie, d: &Degree, i: usize) -> Self {
        let mut v = vec![CycScalar::zero(); h.dim(d)];
        v[i] = CycScalar::one();
        Self::homogeneous(d.clone(), v)
    }

    pub fn homogeneous(d: Degree, v: Vec<CycScalar>) -> Self {
        let mut e = Element::zero();
        e.add_scaled(&d, &v, &CycScalar::one());
        e
    }

    pub fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn component(&self, d: &Degree) -> Option<&Vec<CycScalar>> {
        self.parts.get(d)
    }

    pub fn add_scaled(&mut self, d: &Degree, v: &[CycScalar], s: &CycScalar) {
        if s.is_zero() || v.iter().all(|x| x.is_zero()) {
            return;
        }
        let slot = self.parts.entry(d.clone()).or_insert_with(|| vec![CycScalar::zero(); v.len()]);
        for (a, b) in slot.iter_mut().zip(v) {
            *a += s * b;
        }
        if slot.iter().all(|x| x.is_zero()) {
            self.parts.remove(d);
        }
    }

    pub fn add(&self, o: &Element) -> Element {
        let mut r = self.clone();
        for (d, v) in &o.parts {
            r.add_scaled(d, v, &CycScalar::one());
        }
        r
    }

    pub fn sub(&self, o: &Element) -> Element {
        self.add(&o.scale(&CycScalar::from_int(-1)))
    }

    pub fn scale(&self, s: &CycScalar) -> Element {
        let mut r = Element::zero();
        for (d, v) in &self.parts {
            r.add_scaled(d, v, s);
        }
        r
    }

    /// Single degree of a homogeneous nonzero element.
    pub fn degree(&self) -> Option<&Degree> {
        (self.parts.len() == 1).then(|| self.parts.keys().next().unwrap())
    }
}

pub fn bracket(h: &dyn GradedLie, x: &Element, y: &Element) -> Element {
    let mut out = Element::zero();
    for (a, u) in &x.parts {
        for (b, v) in &y.parts {
            let target = a.add(b);
            for (i, ui) in u.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                for (j, vj) in v.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                    let r = h.bracket(a, i, b, j);
                    out.add_scaled(&target, &r, &(ui * vj));
                }
            }
        }
    }
    out
}

pub fn bracket_memo(m: &Memo, x: &Element, y: &Element) -> Element {
    let mut out = Element::zero();
    for (a, u) in &x.parts {
        for (b, v) in &y.parts {
            let target = a.add(b);
            for (i, ui) in u.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                for (j, vj) in v.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                    let r = m.bracket(a, i, b, j);
                    out.add_scaled(&target, &r, &(ui * vj));
                }
            }
        }
    }
    out
}

pub fn form(h: &dyn GradedLie, x: &Element, y: &Element) -> Result<CycScalar, GradedError> {
    if !h.has_form() {
        return Err(GradedError::NoForm);
    }
    let mut acc = CycScalar::zero();
    for (a, u) in &x.parts {
        for (b, v) in &y.parts {
            for (i, ui) in u.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                for (j, vj) in v.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                    let f = h.form(a, i, b, j).ok_or(GradedError::NoForm)?;
                    acc += &(ui * vj) * &f;
                }
            }
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug)]
pub enum EvalOp {
    Bracket,
    Add,
    Scale(CycScalar),
}

fn validate(h: &dyn GradedLie, x: &Element) -> Result<(), GradedError> {
    let support: HashSet<Vec<i64>> = h.xi_support().into_iter().collect();
    for (d, v) in &x.parts {
        if !support.contains(&d.xi) || v.len() != h.dim(d) || d.lam.len() != h.meta().n {
            return Err(GradedError::OutsideSupport(d.to_string()));
        }
    }
    Ok(())
}

/// Evaluates `op` on elements of `h`; `Scale` ignores `y`.
pub fn algebra_eval(h: &dyn GradedLie, x: &Element, y: &Element, op: EvalOp) -> Result<Element, GradedError> {
    validate(h, x)?;
    validate(h, y)?;
    Ok(match op {
        EvalOp::Bracket => bracket(h, x, y),
        EvalOp::Add => x.add(y),
        EvalOp::Scale(s) => x.scale(&s),
    })
}

fn neg_vec(v: &[CycScalar]) -> Vec<CycScalar> {
    v.iter().map(|x| -x).collect()
}

/// Grading, antisymmetry and Jacobi on all window basis triples.
pub fn check_jacobi_grading(h: &dyn GradedLie, b: i64) -> Report {
    let basis = window_basis(h, b);
    let memo = Memo::new(h);
    let mut grading = CheckResult::windowed(b);
    let mut anti = CheckResult::windowed(b);
    let pair_fail: Vec<(bool, String)> = (0..basis.len())
        .into_par_iter()
        .flat_map_iter(|p| {
            let memo = &memo;
            let basis = &basis;
            (p..basis.len()).filter_map(move |q| {
                let (a, i) = &basis[p];
                let (c, j) = &basis[q];
                let r = memo.bracket(a, *i, c, *j);
                let want = h.dim(&a.add(c));
                if r.len() != want {
                    return Some((true, format!("[{}, {}] has {} coordinates, degree has dim {want}", h.label(a, *i), h.label(c, *j), r.len())));
                }
                let s = memo.bracket(c, *j, a, *i);
                if *r != neg_vec(&s) {
                    return Some((false, format!("[{0}, {1}] != -[{1}, {0}]", h.label(a, *i), h.label(c, *j))));
                }
                None
            })
        })
        .collect();
    for (is_grading, w) in pair_fail {
        if is_grading {
            grading.fail(w);
        } else {
            anti.fail(w);
        }
    }
    let jac = jacobi_failures(h, &basis, &memo);
    let mut jacobi = CheckResult::windowed(b);
    for w in jac {
        jacobi.fail(w);
    }
    jacobi.set("basis_size", basis.len());
    let mut r = Report::new();
    r.add("grading", grading);
    r.add("antisymmetry", anti);
    r.add("jacobi", jacobi);
    r
}

#[derive(Clone, Debug)]
pub struct Sl2Triple {
    pub e: Element,
    pub h: Element,
    pub f: Element,
}

/// `e` spans `L_xi^lam`, `f` lies in `L_-xi^-lam`, `[[e,f],e] = 2e`.
pub fn sl2_triple(h: &dyn GradedLie, xi: &[i64], lam: &[i64]) -> Result<Sl2Triple, GradedError> {
    let d = Degree::new(xi.to_vec(), lam.to_vec());
    let missing = || GradedError::MissingSl2(d.to_string());
    if h.dim(&d) == 0 || h.dim(&d.neg()) == 0 {
        return Err(missing());
    }
    let e = Element::basis(h, &d, 0);
    let nd = d.neg();
    for j in 0..h.dim(&nd) {
        let f0 = Element::basis(h, &nd, j);
        let hh = bracket(h, &e, &f0);
        let he = bracket(h, &hh, &e);
        let Some(c) = he.component(&d).map(|v| v[0].clone()) else { continue };
        if c.is_zero() {
            continue;
        }
        let s = CycScalar::from_int(2).checked_div(&c).expect("nonzero");
        return Ok(Sl2Triple { e, h: hh.scale(&s), f: f0.scale(&s) });
    }
    Err(missing())
}

fn is_eigen(h: &dyn GradedLie, hx: &Element, x: &Element, ev: &Q) -> bool {
    let lhs = bracket(h, hx, x);
    lhs == x.scale(&CycScalar::from_rational(ev.clone()))
}

fn q_of(r: num_rational::Rational64) -> Q {
    Q::new((*r.numer()).into(), (*r.denom()).into())
}

/// Result of the Lie-torus checker.
#[derive(Clone, Debug, Serialize)]
pub struct LieTorusReport {
    pub report: Report,
    /// Window points of `Lambda_xi` per length class.
    pub family: BTreeMap<LengthClass, Vec<Vec<i64>>>,
}

impl LieTorusReport {
    pub fn pass(&self) -> bool {
        self.report.pass()
    }
}

pub fn check_lie_torus(h: &dyn GradedLie, b: i64) -> LieTorusReport {
    let meta = h.meta();
    let s = &meta.system;
    let n = meta.n;
    let mut r = Report::new();
    let lams = box_points(n, b);
    let zero_lam = vec![0; n];

    // (LT1) support in S, one-dimensional root spaces
    let mut lt1 = CheckResult::windowed(b);
    let mut cands: BTreeSet<Vec<i64>> = BTreeSet::new();
    for a in &s.roots {
        for c in &s.roots {
            cands.insert(a.iter().zip(c).map(|(x, y)| x + y).collect());
        }
    }
    cands.extend(h.xi_support());
    for xi in &cands {
        for lam in &lams {
            let d = Degree::new(xi.clone(), lam.clone());
            let k = h.dim(&d);
            if k > 0 && !s.contains(xi) {
                lt1.fail(format!("L at {d} is nonzero but {xi:?} is not in S"));
            }
            if k > 1 && xi.iter().any(|&x| x != 0) {
                lt1.fail(format!("dim L at {d} is {k}"));
            }
        }
    }
    r.add("LT1-support", lt1);

    // (LT2) sl2 triples and their adjoint action
    let basis = window_basis(h, b);
    let basis_el: Vec<(Degree, Element)> = basis.iter().map(|(d, i)| (d.clone(), Element::basis(h, d, *i))).collect();
    let pts: Vec<(Vec<i64>, Vec<i64>)> = s
        .nonzero()
        .flat_map(|xi| lams.iter().map(move |l| (xi.clone(), l.clone())))
        .filter(|(xi, l)| h.dim(&Degree::new(xi.clone(), l.clone())) > 0)
        .collect();
    let lt2_fail: Vec<String> = pts
        .par_iter()
        .filter_map(|(xi, lam)| {
            let t = match sl2_triple(h, xi, lam) {
                Ok(t) => t,
                Err(e) => return Some(e.to_string()),
            };
            for (d, x) in &basis_el {
                let p = q_of(pairing(&d.xi, xi));
                if !is_eigen(h, &t.h, x, &p) {
                    return Some(format!("[h at ({xi:?},{lam:?}), x at {d}] != {p} x"));
                }
            }
            None
        })
        .collect();
    let mut lt2 = CheckResult::windowed(b);
    for w in lt2_fail {
        lt2.fail(w);
    }
    r.add("LT2-sl2", lt2);

    // (LT3) L_xi^0 != 0 for indivisible xi, and degree-0 generation
    let mut lt3a = CheckResult::structural();
    for xi in s.indivisible() {
        lt3a.require(h.dim(&Degree::new(xi.clone(), zero_lam.clone())) > 0, || format!("L_{xi:?}^0 = 0"));
    }
    r.add("LT3-nonzero", lt3a);
    let zero_xi = vec![0; meta.xi_dim()];
    let gen_fail: Vec<String> = lams
        .par_iter()
        .filter_map(|lam| {
            let target = Degree::new(zero_xi.clone(), lam.clone());
            let want = h.dim(&target);
            if want == 0 {
                return None;
            }
            let mut ech = Echelon::new();
            'outer: for xi in s.nonzero() {
                for mu in &lams {
                    let a = Degree::new(xi.clone(), mu.clone());
                    let c = Degree::new(xi.iter().map(|x| -x).collect(), lam.iter().zip(mu).map(|(l, m)| l - m).collect());
                    for i in 0..h.dim(&a) {
                        for j in 0..h.dim(&c) {
                            ech.insert(&sparse_from_dense(&h.bracket(&a, i, &c, j)));
                            if ech.rank() == want {
                                break 'outer;
                            }
                        }
                    }
                }
            }
            (ech.rank() < want).then(|| format!("brackets span {} of dim {want} at degree (0,{lam:?})", ech.rank()))
        })
        .collect();
    let mut lt3b = CheckResult::windowed(b);
    for w in gen_fail {
        lt3b.fail(w);
    }
    r.add("LT3-generation", lt3b);

    // support family
    let mut family: BTreeMap<LengthClass, Vec<Vec<i64>>> = BTreeMap::new();
    let mut fam = CheckResult::windowed(b);
    let mut all_pts = Vec::new();
    let per_root: BTreeMap<Vec<i64>, Vec<Vec<i64>>> = s
        .roots
        .iter()
        .map(|xi| {
            let p: Vec<Vec<i64>> =
                lams.iter().filter(|l| h.dim(&Degree::new(xi.clone(), (*l).clone())) > 0).cloned().collect();
            (xi.clone(), p)
        })
        .collect();
    for (xi, p) in &per_root {
        all_pts.extend(p.iter().cloned());
        let c = s.length_class(xi);
        match family.get(&c) {
            Some(prev) => fam.require(prev == p, || format!("Lambda_xi differs within the {c:?} class at {xi:?}")),
            None => {
                family.insert(c, p.clone());
            }
        }
        let neg: Vec<i64> = xi.iter().map(|x| -x).collect();
        let mut minus: Vec<Vec<i64>> = p.iter().map(|l| l.iter().map(|x| -x).collect()).collect();
        minus.sort();
        fam.require(per_root[&neg] == *p, || format!("Lambda_xi != Lambda_-xi at {xi:?}"));
        fam.require(minus == *p, || format!("Lambda_xi != -Lambda_xi at {xi:?}"));
        let two: Vec<i64> = xi.iter().map(|x| 2 * x).collect();
        if xi.iter().any(|&x| x != 0) {
            if let Some(p2) = per_root.get(&two) {
                fam.require(p2.iter().all(|l| p.contains(l)), || format!("Lambda_2xi not inside Lambda_xi at {xi:?}"));
            }
        }
    }
    let rank = Lattice::from_generators(n, &all_pts).rank();
    fam.require(rank == n, || format!("support spans rank {rank} < {n}"));
    // (ED1) and (ED2) on the window
    let set_of: BTreeMap<&Vec<i64>, HashSet<&Vec<i64>>> = per_root.iter().map(|(k, v)| (k, v.iter().collect())).collect();
    let mut seen = HashSet::new();
    for eta in &s.roots {
        for xi in s.nonzero() {
            let k = pairing(eta, xi).to_integer();
            let t = reflect(eta, xi);
            if !seen.insert((s.length_class(eta), s.length_class(xi), k, s.length_class(&t))) {
                continue;
            }
            for mu in &per_root[eta] {
                for la in &per_root[xi] {
                    let v: Vec<i64> = mu.iter().zip(la).map(|(m, l)| m - k * l).collect();
                    if v.iter().all(|x| x.abs() <= b) && !set_of[&t].contains(&v) {
                        fam.fail(format!("ED1: {mu:?} - {k}*{la:?} not in Lambda_{t:?}"));
                    }
                }
            }
        }
    }
    for xi in s.indivisible().iter().chain(std::iter::once(&s.zero())) {
        fam.require(per_root[xi].contains(&zero_lam), || format!("ED2: 0 not in Lambda_{xi:?}"));
    }
    fam.set("family", &family);
    r.add("support-family", fam);
    LieTorusReport { report: r, family }
}

/// Gradedness, symmetry, invariance and degreewise nondegeneracy of the form.
pub fn check_invariant_form(h: &dyn GradedLie, b: i64) -> Result<Report, GradedError> {
    if !h.has_form() {
        return Err(GradedError::NoForm);
    }
    let basis = window_basis(h, b);
    let f = |x: &Basis, y: &Basis| h.form(&x.0, x.1, &y.0, y.1).expect("form present");
    let mut graded = CheckResult::windowed(b);
    let mut sym = CheckResult::windowed(b);
    for x in &basis {
        for y in &basis {
            let v = f(x, y);
            if !x.0.add(&y.0).is_zero() {
                graded.require(v.is_zero(), || format!("({}|{}) = {v}", h.label(&x.0, x.1), h.label(&y.0, y.1)));
            } else {
                sym.require(v == f(y, x), || format!("form not symmetric on {}, {}", h.label(&x.0, x.1), h.label(&y.0, y.1)));
            }
        }
    }
    let mut by_deg: BTreeMap<&Degree, Vec<usize>> = BTreeMap::new();
    for (k, (d, _)) in basis.iter().enumerate() {
        by_deg.entry(d).or_default().push(k);
    }
    let memo = Memo::new(h);
    let inv_fail: Vec<String> = (0..basis.len())
        .into_par_iter()
        .flat_map_iter(|p| {
            let (basis, by_deg, memo) = (&basis, &by_deg, &memo);
            (0..basis.len()).flat_map(move |q| {
                let dz = basis[p].0.add(&basis[q].0).neg();
                let zs: &[usize] = by_deg.get(&dz).map_or(&[], |v| v.as_slice());
                zs.iter().filter_map(move |&r| {
                    let (x, y, z) = (&basis[p], &basis[q], &basis[r]);
                    let xy = memo.bracket(&x.0, x.1, &y.0, y.1);
                    let yz = memo.bracket(&y.0, y.1, &z.0, z.1);
                    let dxy = x.0.add(&y.0);
                    let dyz = y.0.add(&z.0);
                    let lhs = xy.iter().enumerate().filter(|(_, c)| !c.is_zero()).fold(CycScalar::zero(), |acc, (m, c)| {
                        acc + c * &h.form(&dxy, m, &z.0, z.1).expect("form present")
                    });
                    let rhs = yz.iter().enumerate().filter(|(_, c)| !c.is_zero()).fold(CycScalar::zero(), |acc, (m, c)| {
                        acc + c * &h.form(&x.0, x.1, &dyz, m).expect("form present")
                    });
                    (lhs != rhs).then(|| {
                        format!("([{},{}]|{}) != ({}|[{},{}])", h.label(&x.0, x.1), h.label(&y.0, y.1), h.label(&z.0, z.1), h.label(&x.0, x.1), h.label(&y.0, y.1), h.label(&z.0, z.1))
                    })
                })
            })
        })
        .collect();
    let mut inv = CheckResult::windowed(b);
    for w in inv_fail {
        inv.fail(w);
    }
    let mut nondeg = CheckResult::windowed(b);
    for d in window_degrees(h, b) {
        let nd = d.neg();
        let k = h.dim(&d);
        if h.dim(&nd) != k {
            nondeg.fail(format!("dim {d} != dim {nd}"));
            continue;
        }
        let m: Vec<Vec<CycScalar>> =
            (0..k).map(|i| (0..k).map(|j| h.form(&d, i, &nd, j).expect("form present")).collect()).collect();
        nondeg.require(linalg::rank(&m) == k, || format!("pairing of {d} with {nd} is degenerate"));
    }
    let mut r = Report::new();
    r.add("graded", graded);
    r.add("symmetric", sym);
    r.add("invariant", inv);
    r.add("nondegenerate", nondeg);
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct CenterReport {
    /// Basis of the centre in each window degree where it is nonzero.
    pub basis: BTreeMap<String, Vec<Vec<String>>>,
    pub dims: BTreeMap<String, usize>,
    pub total_dim: usize,
    /// Set when the kernel at the window differs from the kernel at the next window.
    pub caveat: bool,
    pub window: i64,
}

fn center_kernel(h: &dyn GradedLie, d: &Degree, test: &[Basis]) -> Vec<Vec<CycScalar>> {
    let k = h.dim(d);
    let mut ech = Echelon::new();
    for (c, j) in test {
        let cols: Vec<Vec<CycScalar>> = (0..k).map(|i| h.bracket(d, i, c, *j)).collect();
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

/// Centre of `L` on the window: kernel of the adjoint action against window basis vectors.
pub fn graded_center(h: &dyn GradedLie, b: i64) -> CenterReport {
    let test = window_basis(h, b);
    let test_next = window_basis(h, b + 1);
    let found: Vec<(Degree, Vec<Vec<CycScalar>>, bool)> = window_degrees(h, b)
        .into_par_iter()
        .filter_map(|d| {
            let ker = center_kernel(h, &d, &test);
            if ker.is_empty() {
                return None;
            }
            let stable = center_kernel(h, &d, &test_next).len() == ker.len();
            Some((d, ker, stable))
        })
        .collect();
    let mut basis = BTreeMap::new();
    let mut dims = BTreeMap::new();
    let mut total = 0;
    let mut caveat = false;
    for (d, ker, stable) in found {
        caveat |= !stable;
        total += ker.len();
        dims.insert(d.to_string(), ker.len());
        basis.insert(d.to_string(), ker.iter().map(|v| v.iter().map(|x| x.to_string()).collect()).collect());
    }
    CenterReport { basis, dims, total_dim: total, caveat, window: b }
}

/// `sum_k (ad z)^k x / k!`, with `ad z` required nilpotent on `x`.
pub fn exp_ad(h: &dyn GradedLie, z: &Element, x: &Element) -> Result<Element, GradedError> {
    const MAX: usize = 8;
    let mut acc = x.clone();
    let mut term = x.clone();
    for k in 1..=MAX {
        term = bracket(h, z, &term).scale(&CycScalar::from_frac(1, k as i64));
        if term.is_zero() {
            return Ok(acc);
        }
        acc = acc.add(&term);
    }
    Err(GradedError::NotNilpotent(MAX))
}

#[derive(Clone, Debug)]
pub struct WeylMap {
    pub triple: Sl2Triple,
    pub images: Vec<(Basis, Element)>,
    pub check: CheckResult,
}

/// Image degree of `L_tau^mu` under the Weyl automorphism for `(xi, lam)`.
pub fn weyl_target(tau: &Degree, xi: &[i64], lam: &[i64]) -> Degree {
    let k = pairing(&tau.xi, xi).to_integer();
    Degree::new(reflect(&tau.xi, xi), tau.lam.iter().zip(lam).map(|(m, l)| m - k * l).collect())
}

/// `exp(ad e) exp(ad -f) exp(ad e)` on the window basis.
pub fn weyl_automorphism(h: &dyn GradedLie, xi: &[i64], lam: &[i64], b: i64) -> Result<WeylMap, GradedError> {
    let t = sl2_triple(h, xi, lam)?;
    let mf = t.f.scale(&CycScalar::from_int(-1));
    let mut check = CheckResult::windowed(b);
    let images: Vec<Result<(Basis, Element), GradedError>> = window_basis(h, b)
        .into_par_iter()
        .map(|(d, i)| {
            let x = Element::basis(h, &d, i);
            let y = exp_ad(h, &t.e, &x)?;
            let y = exp_ad(h, &mf, &y)?;
            let y = exp_ad(h, &t.e, &y)?;
            Ok(((d, i), y))
        })
        .collect();
    let mut out = Vec::with_capacity(images.len());
    for im in images {
        let ((d, i), y) = im?;
        let want = weyl_target(&d, xi, lam);
        check.require(y.degree() == Some(&want), || {
            format!("{} maps to degrees {:?}, expected {want}", h.label(&d, i), y.parts.keys().map(|k| k.to_string()).collect::<Vec<_>>())
        });
        out.push(((d, i), y));
    }
    Ok(WeylMap { triple: t, images: out, check })
}

/// Every window basis vector is a combination of brackets from window `2b`.
pub fn check_perfect(h: &dyn GradedLie, b: i64) -> CheckResult {
    let n = h.meta().n;
    let wide = box_points(n, 2 * b);
    let xis = h.xi_support();
    let fails: Vec<String> = window_degrees(h, b)
        .into_par_iter()
        .filter_map(|d| {
            let want = h.dim(&d);
            let mut ech = Echelon::new();
            'outer: for a_xi in &xis {
                let c_xi: Vec<i64> = d.xi.iter().zip(a_xi).map(|(x, y)| x - y).collect();
                for mu in &wide {
                    let a = Degree::new(a_xi.clone(), mu.clone());
                    let c = Degree::new(c_xi.clone(), d.lam.iter().zip(mu).map(|(l, m)| l - m).collect());
                    if c.lam_radius() > 2 * b {
                        continue;
                    }
                    for i in 0..h.dim(&a) {
                        for j in 0..h.dim(&c) {
                            ech.insert(&sparse_from_dense(&h.bracket(&a, i, &c, j)));
                            if ech.rank() == want {
                                break 'outer;
                            }
                        }
                    }
                }
            }
            (ech.rank() < want).then(|| format!("brackets span {} of dim {want} at {d}", ech.rank()))
        })
        .collect();
    let mut c = CheckResult::windowed(b);
    for w in fails {
        c.fail(w);
    }
    c
}

/// Wraps a handle and perturbs one structure constant.
pub struct Perturbed<'a> {
    pub inner: &'a dyn GradedLie,
    pub at: (Basis, Basis),
    pub delta: CycScalar,
}

impl GradedLie for Perturbed<'_> {
    fn meta(&self) -> &AlgebraMeta {
        self.inner.meta()
    }
    fn dim(&self, d: &Degree) -> usize {
        self.inner.dim(d)
    }
    fn bracket(&self, a: &Degree, i: usize, b: &Degree, j: usize) -> Vec<CycScalar> {
        let mut r = self.inner.bracket(a, i, b, j);
        let ((pa, pi), (pb, pj)) = &self.at;
        let sign = if (a, i, b, j) == (pa, *pi, pb, *pj) {
            1
        } else if (a, i, b, j) == (pb, *pj, pa, *pi) {
            -1
        } else {
            0
        };
        if sign != 0 && !r.is_empty() {
            r[0] += &self.delta * &CycScalar::from_int(sign);
        }
        r
    }
    fn label(&self, d: &Degree, i: usize) -> String {
        self.inner.label(d, i)
    }
    fn has_form(&self) -> bool {
        self.inner.has_form()
    }
    fn form(&self, a: &Degree, i: usize, b: &Degree, j: usize) -> Option<CycScalar> {
        self.inner.form(a, i, b, j)
    }
    fn xi_support(&self) -> Vec<Vec<i64>> {
        self.inner.xi_support()
    }
    fn coefficient_form(&self, a: &Degree, i: usize, b: &Degree, j: usize) -> Option<CycScalar> {
        self.inner.coefficient_form(a, i, b, j)
    }
    fn centroid_support(&self) -> Option<Lattice> {
        self.inner.centroid_support()
    }
    fn centroid_element(&self, g: &[i64], a: &Degree, i: usize) -> Option<Vec<CycScalar>> {
        self.inner.centroid_element(g, a, i)
    }
}

/// Scales the form by zero on one degree and its opposite.
pub struct FormKilledAt<'a> {
    pub inner: &'a dyn GradedLie,
    pub at: Degree,
}

impl GradedLie for FormKilledAt<'_> {
    fn meta(&self) -> &AlgebraMeta {
        self.inner.meta()
    }
    fn dim(&self, d: &Degree) -> usize {
        self.inner.dim(d)
    }
    fn bracket(&self, a: &Degree, i: usize, b: &Degree, j: usize) -> Vec<CycScalar> {
        self.inner.bracket(a, i, b, j)
    }
    fn has_form(&self) -> bool {
        self.inner.has_form()
    }
    fn form(&self, a: &Degree, i: usize, b: &Degree, j: usize) -> Option<CycScalar> {
        if *a == self.at || *b == self.at {
            return Some(CycScalar::zero());
        }
        self.inner.form(a, i, b, j)
    }
    fn xi_support(&self) -> Vec<Vec<i64>> {
        self.inner.xi_support()
    }
    fn coefficient_form(&self, a: &Degree, i: usize, b: &Degree, j: usize) -> Option<CycScalar> {
        self.inner.coefficient_form(a, i, b, j)
    }
    fn centroid_support(&self) -> Option<Lattice> {
        self.inner.centroid_support()
    }
    fn centroid_element(&self, g: &[i64], a: &Degree, i: usize) -> Option<Vec<CycScalar>> {
        self.inner.centroid_element(g, a, i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One-dimensional abelian algebra in degree zero.
    struct Abelian(AlgebraMeta);

    impl GradedLie for Abelian {
        fn meta(&self) -> &AlgebraMeta {
            &self.0
        }
        fn dim(&self, d: &Degree) -> usize {
            usize::from(d.is_zero())
        }
        fn bracket(&self, a: &Degree, _: usize, b: &Degree, _: usize) -> Vec<CycScalar> {
            vec![CycScalar::zero(); self.dim(&a.add(b))]
        }
    }

    fn abelian() -> Abelian {
        Abelian(AlgebraMeta::new("abelian", "test", RootSystem::from_raw(1, vec![]), 1))
    }

    #[test]
    fn abelian_is_all_centre() {
        let a = abelian();
        assert!(check_jacobi_grading(&a, 2).pass());
        let c = graded_center(&a, 2);
        assert_eq!(c.total_dim, 1);
        assert!(!c.caveat);
    }

    #[test]
    fn degree_arithmetic() {
        let d = Degree::new(vec![1, -1, 0], vec![2]);
        assert!(d.add(&d.neg()).is_zero());
        assert_eq!(d.lam_radius(), 2);
        let w = weyl_target(&d, &[1, -1, 0], &[1]);
        assert_eq!(w, Degree::new(vec![-1, 1, 0], vec![0]));
    }

    #[test]
    fn eval_rejects_foreign_degree() {
        let a = abelian();
        let x = Element::homogeneous(Degree::new(vec![3], vec![0]), vec![CycScalar::one()]);
        assert!(matches!(algebra_eval(&a, &x, &x, EvalOp::Add), Err(GradedError::OutsideSupport(_))));
        let z = Element::basis(&a, &Degree::new(vec![0], vec![0]), 0);
        assert!(algebra_eval(&a, &z, &z, EvalOp::Bracket).unwrap().is_zero());
    }
}
