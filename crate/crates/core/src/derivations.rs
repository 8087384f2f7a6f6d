//! Degree maps, the centroid, centroidal derivations `chi^gamma d_theta` and
//! the skew subspaces used to build extensions.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gradedlie::{bracket, window_basis, window_degrees, Basis, Degree, Element, GradedLie, Memo};
use crate::lattice::Lattice;
use crate::linalg::{sparse_from_dense, Echelon, SparseVec};
use crate::refsys::box_points;
use crate::report::{CheckResult, Report};
use crate::scalars::{parse_q, CycScalar, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DerivationError {
    #[error("rank mismatch: handle has n = {expected}, degree map has length {got}")]
    RankMismatch { expected: usize, got: usize },
    #[error("the handle carries no invariant form")]
    NoForm,
    #[error("no centroid action for gamma = {0}")]
    NoCentroidAction(String),
    #[error("derivation is not skew: {0}")]
    NotSkew(String),
    #[error("derivation space is not closed: {0}")]
    NotClosed(String),
    #[error("degree {0} lies outside the centroid support")]
    OutsideSupport(String),
    #[error("malformed derivation spec: {0}")]
    Malformed(String),
}

pub fn q_str(x: &Q) -> String {
    x.to_string()
}

fn q_from_int(x: i64) -> Q {
    Q::from_integer(x.into())
}

/// `theta(la) = sum theta_i la_i`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DegreeMap {
    pub theta: Vec<Q>,
}

impl DegreeMap {
    pub fn new(theta: Vec<Q>) -> Self {
        DegreeMap { theta }
    }

    pub fn from_ints(v: &[i64]) -> Self {
        DegreeMap { theta: v.iter().map(|&x| q_from_int(x)).collect() }
    }

    pub fn zero(n: usize) -> Self {
        DegreeMap { theta: vec![Q::zero(); n] }
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut t = Self::zero(n);
        t.theta[i] = Q::one();
        t
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn eval(&self, la: &[i64]) -> Q {
        self.theta.iter().zip(la).fold(Q::zero(), |acc, (t, &l)| acc + t * q_from_int(l))
    }

    pub fn is_zero(&self) -> bool {
        self.theta.iter().all(|x| x.is_zero())
    }

    pub fn lin(a: &Q, x: &DegreeMap, b: &Q, y: &DegreeMap) -> DegreeMap {
        DegreeMap { theta: x.theta.iter().zip(&y.theta).map(|(u, v)| a * u + b * v).collect() }
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.theta.iter().map(q_str).collect()
    }

    pub fn parse(v: &[String]) -> Result<Self, DerivationError> {
        v.iter()
            .map(|s| parse_q(s).map_err(|e| DerivationError::Malformed(format!("{s}: {e}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(DegreeMap::new)
    }
}

/// `chi^gamma d_theta`: multiply the degree-`la` part by `theta(la)`, then apply `chi^gamma`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CentroidalDerivation {
    pub gamma: Vec<i64>,
    pub theta: DegreeMap,
}

impl CentroidalDerivation {
    pub fn new(gamma: Vec<i64>, theta: DegreeMap) -> Self {
        CentroidalDerivation { gamma, theta }
    }

    pub fn degree(&self) -> Degree {
        Degree::new(Vec::new(), self.gamma.clone())
    }

    /// The skew flavour requires `theta(gamma) = 0`.
    pub fn skew_flavor(&self) -> bool {
        self.theta.eval(&self.gamma).is_zero()
    }

    /// Image of a basis vector: degree and coordinates, or `None` when it vanishes.
    pub fn apply_basis(
        &self,
        h: &dyn GradedLie,
        a: &Degree,
        i: usize,
    ) -> Result<Option<(Degree, Vec<CycScalar>)>, DerivationError> {
        let s = self.theta.eval(&a.lam);
        if s.is_zero() {
            return Ok(None);
        }
        let s = CycScalar::from_rational(s);
        let target = Degree::new(a.xi.clone(), a.lam.iter().zip(&self.gamma).map(|(x, y)| x + y).collect());
        let v = if self.gamma.iter().all(|&g| g == 0) {
            let mut v = vec![CycScalar::zero(); h.dim(a)];
            v[i] = CycScalar::one();
            v
        } else {
            h.centroid_element(&self.gamma, a, i)
                .ok_or_else(|| DerivationError::NoCentroidAction(format!("{:?}", self.gamma)))?
        };
        Ok(Some((target, v.iter().map(|x| x * &s).collect())))
    }

    pub fn apply(&self, h: &dyn GradedLie, x: &Element) -> Result<Element, DerivationError> {
        let mut out = Element::zero();
        for (d, v) in &x.parts {
            for (i, c) in v.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                if let Some((t, w)) = self.apply_basis(h, d, i)? {
                    out.add_scaled(&t, &w, c);
                }
            }
        }
        Ok(out)
    }

    /// `[chi^g d_t, chi^d d_p] = chi^(g+d) (t(d) d_p - p(g) d_t)`.
    pub fn bracket(&self, o: &CentroidalDerivation) -> CentroidalDerivation {
        let a = self.theta.eval(&o.gamma);
        let b = -o.theta.eval(&self.gamma);
        CentroidalDerivation {
            gamma: self.gamma.iter().zip(&o.gamma).map(|(x, y)| x + y).collect(),
            theta: DegreeMap::lin(&a, &o.theta, &b, &self.theta),
        }
    }
}

/// The degree derivation `d_theta` of a handle.
pub fn degree_derivation(theta: DegreeMap, h: &dyn GradedLie) -> Result<CentroidalDerivation, DerivationError> {
    let n = h.meta().n;
    if theta.n() != n {
        return Err(DerivationError::RankMismatch { expected: n, got: theta.n() });
    }
    Ok(CentroidalDerivation::new(vec![0; n], theta))
}

fn short_window(h: &dyn GradedLie, b: i64) -> Vec<Basis> {
    window_basis(h, b.min(1))
}

/// Leibniz rule on pairs drawn from the radius-1 window against the radius-`b` window.
pub fn check_derivation(h: &dyn GradedLie, d: &CentroidalDerivation, b: i64) -> CheckResult {
    let xs = short_window(h, b);
    let ys = window_basis(h, b);
    let fails: Vec<String> = xs
        .par_iter()
        .flat_map_iter(|(da, i)| {
            let x = Element::basis(h, da, *i);
            let mut bad = Vec::new();
            for (db, j) in &ys {
                let y = Element::basis(h, db, *j);
                let res = (|| -> Result<bool, DerivationError> {
                    let lhs = d.apply(h, &bracket(h, &x, &y))?;
                    let rhs = bracket(h, &d.apply(h, &x)?, &y).add(&bracket(h, &x, &d.apply(h, &y)?));
                    Ok(lhs == rhs)
                })();
                match res {
                    Ok(true) => {}
                    Ok(false) => bad.push(format!("leibniz fails on {da}#{i}, {db}#{j}")),
                    Err(e) => bad.push(e.to_string()),
                }
                if bad.len() > 2 {
                    break;
                }
            }
            bad
        })
        .collect();
    let mut c = CheckResult::windowed(b);
    for f in fails {
        c.fail(f);
    }
    c
}

/// `(d x | y) + (x | d y) = 0` on window pairs of complementary degree.
pub fn check_skew(h: &dyn GradedLie, d: &CentroidalDerivation, b: i64) -> Result<CheckResult, DerivationError> {
    if !h.has_form() {
        return Err(DerivationError::NoForm);
    }
    let mut c = CheckResult::windowed(b);
    let ys = window_basis(h, b);
    let index: BTreeMap<&Degree, usize> = ys.iter().map(|(d, _)| (d, h.dim(d))).collect();
    for (da, i) in &ys {
        // partner degree: -(da + gamma)
        let partner = Degree::new(
            da.xi.iter().map(|x| -x).collect(),
            da.lam.iter().zip(&d.gamma).map(|(x, g)| -x - g).collect(),
        );
        let Some(&k) = index.get(&partner) else { continue };
        let x = Element::basis(h, da, *i);
        let dx = d.apply(h, &x)?;
        for j in 0..k {
            let y = Element::basis(h, &partner, j);
            let dy = d.apply(h, &y)?;
            let s = crate::gradedlie::form(h, &dx, &y).map_err(|_| DerivationError::NoForm)?
                + crate::gradedlie::form(h, &x, &dy).map_err(|_| DerivationError::NoForm)?;
            c.require(s.is_zero(), || format!("(dx|y)+(x|dy) = {s} at {da}#{i}, {partner}#{j}"));
        }
    }
    Ok(c)
}

/// Divergence-zero derivations `t^la (sum s_i d_i)` with `sum s_i la_i = 0`.
pub fn laurent_sder(n: usize, la: &[i64]) -> Vec<DegreeMap> {
    assert_eq!(la.len(), n, "degree length");
    let Some(p) = la.iter().position(|&x| x != 0) else {
        return (0..n).map(|i| DegreeMap::unit(n, i)).collect();
    };
    (0..n)
        .filter(|&j| j != p)
        .map(|j| {
            let mut t = DegreeMap::unit(n, j);
            t.theta[p] = -Q::new(la[j].into(), la[p].into());
            t
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    /// All of `SCDer`.
    Full,
    /// The degree derivations only.
    DegreeOnly,
    /// Explicit degree maps per `gamma`.
    Custom(BTreeMap<Vec<i64>, Vec<DegreeMap>>),
}

/// Graded space `D = sum_gamma chi^gamma D^gamma` of centroidal derivations.
#[derive(Clone, Debug)]
pub struct DerivationSpace {
    pub n: usize,
    pub gamma: Lattice,
    pub kind: SpaceKind,
    pub is_subalgebra: bool,
    pub is_skew: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct DerivationEntry {
    pub gamma: Vec<i64>,
    pub thetas: Vec<Vec<String>>,
}

impl DerivationSpace {
    pub fn zero(n: usize) -> Self {
        DerivationSpace {
            n,
            gamma: Lattice::zero(n),
            kind: SpaceKind::Custom(BTreeMap::new()),
            is_subalgebra: true,
            is_skew: true,
        }
    }

    pub fn degree_only(n: usize, gamma: Lattice) -> Self {
        DerivationSpace { n, gamma, kind: SpaceKind::DegreeOnly, is_subalgebra: true, is_skew: true }
    }

    pub fn full(n: usize, gamma: Lattice) -> Self {
        DerivationSpace { n, gamma, kind: SpaceKind::Full, is_subalgebra: true, is_skew: true }
    }

    pub fn basis_at(&self, g: &[i64]) -> Vec<DegreeMap> {
        match &self.kind {
            SpaceKind::Full => {
                if self.gamma.contains(g) {
                    laurent_sder(self.n, g)
                } else {
                    Vec::new()
                }
            }
            SpaceKind::DegreeOnly => {
                if g.iter().all(|&x| x == 0) {
                    laurent_sder(self.n, g)
                } else {
                    Vec::new()
                }
            }
            SpaceKind::Custom(m) => m.get(g).cloned().unwrap_or_default(),
        }
    }

    pub fn dim_at(&self, g: &[i64]) -> usize {
        self.basis_at(g).len()
    }

    pub fn member(&self, g: &[i64], i: usize) -> CentroidalDerivation {
        CentroidalDerivation::new(g.to_vec(), self.basis_at(g)[i].clone())
    }

    /// Degrees of `D` inside the box of radius `b`.
    pub fn support_in(&self, b: i64) -> Vec<Vec<i64>> {
        box_points(self.n, b).into_iter().filter(|g| self.dim_at(g) > 0).collect()
    }

    /// Coordinates of `theta` in the basis of `D^g`.
    pub fn coords(&self, g: &[i64], theta: &DegreeMap) -> Option<Vec<Q>> {
        let basis = self.basis_at(g);
        if theta.is_zero() {
            return Some(vec![Q::zero(); basis.len()]);
        }
        if basis.is_empty() {
            return None;
        }
        let k = basis.len();
        // columns = basis maps; rows = coordinates; augmented by theta
        let mut ech = Echelon::new();
        for r in 0..self.n {
            let mut row: Vec<CycScalar> =
                basis.iter().map(|t| CycScalar::from_rational(t.theta[r].clone())).collect();
            row.push(CycScalar::from_rational(theta.theta[r].clone()));
            ech.insert(&sparse_from_dense(&row));
        }
        let x = ech.particular_solution(k)?;
        x.iter().map(|c| c.to_rational()).collect()
    }

    /// `[d_(g,i), d_(e,j)]` in coordinates of `D^(g+e)`, `None` when it leaves `D`.
    pub fn bracket_basis(&self, g: &[i64], i: usize, e: &[i64], j: usize) -> Option<(Vec<i64>, Vec<Q>)> {
        let r = self.member(g, i).bracket(&self.member(e, j));
        let c = self.coords(&r.gamma, &r.theta)?;
        Some((r.gamma, c))
    }

    /// Every bracket of window members lands in the declared span.
    pub fn check_closure(&self, b: i64) -> CheckResult {
        let mut c = CheckResult::windowed(b);
        let sup = self.support_in(b);
        for g in &sup {
            for e in &sup {
                for i in 0..self.dim_at(g) {
                    for j in 0..self.dim_at(e) {
                        c.require(self.bracket_basis(g, i, e, j).is_some(), || {
                            format!("[D^{g:?}#{i}, D^{e:?}#{j}] leaves D")
                        });
                    }
                }
            }
        }
        c
    }

    /// `D^0` acts diagonally by `theta(e)` and `[D^g, D^-g] = 0`.
    pub fn check_semidirect(&self, b: i64) -> CheckResult {
        let mut c = CheckResult::windowed(b);
        let sup = self.support_in(b);
        let zero = vec![0i64; self.n];
        for i in 0..self.dim_at(&zero) {
            let t = self.member(&zero, i);
            for e in &sup {
                for j in 0..self.dim_at(e) {
                    let p = self.member(e, j);
                    let r = t.bracket(&p);
                    let s = t.theta.eval(e);
                    let expect = DegreeMap { theta: p.theta.theta.iter().map(|x| x * &s).collect() };
                    c.require(r.theta == expect, || format!("D^0 not toral on D^{e:?}#{j}"));
                }
            }
        }
        for g in &sup {
            let ng: Vec<i64> = g.iter().map(|x| -x).collect();
            if g.iter().all(|&x| x == 0) {
                continue;
            }
            for i in 0..self.dim_at(g) {
                for j in 0..self.dim_at(&ng) {
                    let r = self.member(g, i).bracket(&self.member(&ng, j));
                    c.require(r.theta.is_zero(), || format!("[D^{g:?}, D^{ng:?}] != 0"));
                }
            }
        }
        c
    }

    pub fn to_entries(&self, b: i64) -> Vec<DerivationEntry> {
        self.support_in(b)
            .into_iter()
            .map(|g| DerivationEntry {
                thetas: self.basis_at(&g).iter().map(|t| t.to_strings()).collect(),
                gamma: g,
            })
            .collect()
    }

    pub fn custom_from_entries(n: usize, gamma: Lattice, entries: &[DerivationEntry]) -> Result<Self, DerivationError> {
        let mut m: BTreeMap<Vec<i64>, Vec<DegreeMap>> = BTreeMap::new();
        for e in entries {
            if e.gamma.len() != n {
                return Err(DerivationError::RankMismatch { expected: n, got: e.gamma.len() });
            }
            for t in &e.thetas {
                let t = DegreeMap::parse(t)?;
                if t.n() != n {
                    return Err(DerivationError::RankMismatch { expected: n, got: t.n() });
                }
                m.entry(e.gamma.clone()).or_default().push(t);
            }
        }
        Ok(DerivationSpace { n, gamma, kind: SpaceKind::Custom(m), is_subalgebra: false, is_skew: false })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScderChoice {
    Full,
    DegreeOnly,
    Custom(Vec<DerivationEntry>),
}

/// Assembles `D` from the centroid support and verifies skewness and closure.
pub fn scder_space(
    h: &dyn GradedLie,
    choice: &ScderChoice,
    b: i64,
) -> Result<(DerivationSpace, Report), DerivationError> {
    if !h.has_form() {
        return Err(DerivationError::NoForm);
    }
    let n = h.meta().n;
    let gamma = match h.centroid_support() {
        Some(g) => g,
        None => centroid(h, b).gamma_lattice(n),
    };
    let mut d = match choice {
        ScderChoice::Full => DerivationSpace::full(n, gamma),
        ScderChoice::DegreeOnly => DerivationSpace::degree_only(n, gamma),
        ScderChoice::Custom(es) => DerivationSpace::custom_from_entries(n, gamma, es)?,
    };
    let mut rep = Report::new();
    let mut skew = CheckResult::windowed(b.min(1));
    for g in d.support_in(b) {
        if !d.gamma.contains(&g) {
            return Err(DerivationError::OutsideSupport(format!("{g:?}")));
        }
        for i in 0..d.dim_at(&g) {
            let m = d.member(&g, i);
            if !m.skew_flavor() {
                return Err(DerivationError::NotSkew(format!("theta(gamma) != 0 at {g:?}#{i}")));
            }
            // form samples only near the origin
            if g.iter().all(|x| x.abs() <= 1) {
                let c = check_skew(h, &m, b.min(1))?;
                if !c.pass {
                    return Err(DerivationError::NotSkew(c.witnesses.join("; ")));
                }
                skew.absorb(c);
            }
        }
    }
    rep.add("skew", skew);
    let closure = d.check_closure(b);
    if !closure.pass {
        return Err(DerivationError::NotClosed(closure.witnesses.join("; ")));
    }
    rep.add("closure", closure);
    rep.add("semidirect", d.check_semidirect(b));
    d.is_subalgebra = true;
    d.is_skew = true;
    Ok((d, rep))
}

/// Kernel of the centroid constraints for one `gamma`, laid out over the window basis.
#[derive(Clone, Debug)]
pub struct CentroidSolve {
    pub gamma: Vec<i64>,
    pub offsets: BTreeMap<Basis, (usize, usize)>,
    pub kernel: Vec<Vec<CycScalar>>,
}

impl CentroidSolve {
    /// Image of `y` under the `k`-th kernel element.
    pub fn image(&self, k: usize, y: &Basis) -> Option<&[CycScalar]> {
        self.offsets.get(y).map(|&(o, len)| &self.kernel[k][o..o + len])
    }
}

fn shift(d: &Degree, g: &[i64]) -> Degree {
    Degree::new(d.xi.clone(), d.lam.iter().zip(g).map(|(x, y)| x + y).collect())
}

fn solve_gamma(h: &dyn GradedLie, memo: &Memo, xs: &[Basis], ys: &[Basis], g: &[i64]) -> CentroidSolve {
    let mut offsets = BTreeMap::new();
    let mut nv = 0;
    for y in ys {
        let k = h.dim(&shift(&y.0, g));
        offsets.insert(y.clone(), (nv, k));
        nv += k;
    }
    let mut ech = Echelon::new();
    'outer: for (da, i) in xs {
        for (db, j) in ys {
            let target = shift(&da.add(db), g);
            let kt = h.dim(&target);
            if kt == 0 {
                continue;
            }
            let xy_deg = da.add(db);
            let xy = memo.bracket(da, *i, db, *j);
            // chi(y') unknowns needed for every component of [x,y]
            let mut ok = true;
            for (m, c) in xy.iter().enumerate() {
                if !c.is_zero() && !offsets.contains_key(&(xy_deg.clone(), m)) {
                    ok = false;
                }
            }
            if !ok {
                continue;
            }
            let (oy, ky) = offsets[&(db.clone(), *j)];
            let dbg = shift(db, g);
            let xb: Vec<_> = (0..ky).map(|s| memo.bracket(da, *i, &dbg, s)).collect();
            for r in 0..kt {
                let mut row: BTreeMap<usize, CycScalar> = BTreeMap::new();
                for (m, c) in xy.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let (om, _) = offsets[&(xy_deg.clone(), m)];
                    *row.entry(om + r).or_insert_with(CycScalar::zero) += c.clone();
                }
                for (s, v) in xb.iter().enumerate() {
                    if let Some(x) = v.get(r) {
                        if !x.is_zero() {
                            *row.entry(oy + s).or_insert_with(CycScalar::zero) -= x.clone();
                        }
                    }
                }
                let sv: SparseVec = row.into_iter().filter(|(_, x)| !x.is_zero()).collect();
                if !sv.is_empty() {
                    ech.insert(&sv);
                    if ech.rank() == nv {
                        break 'outer;
                    }
                }
            }
        }
    }
    CentroidSolve { gamma: g.to_vec(), offsets, kernel: ech.kernel(nv) }
}

/// Window centroid: dimensions per degree, the window part of `Gamma`, and consistency checks.
#[derive(Clone, Debug, Serialize)]
pub struct CentroidReport {
    pub window: i64,
    pub gamma_radius: i64,
    /// `"(xi,la)"` to dimension, nonzero entries only.
    pub dims: BTreeMap<String, usize>,
    pub gamma_window: Vec<Vec<i64>>,
    /// No homogeneous centroid element with nonzero root part.
    pub xi_zero_only: bool,
    /// Same dimensions at window `B + 1`.
    pub stable: bool,
    /// The realization's `chi^gamma` satisfies the constraints (when the handle provides one).
    pub realization_matches: Option<bool>,
    /// Every solution is symmetric for the form on window pairs.
    pub symmetric: Option<bool>,
    #[serde(skip)]
    pub solves: Vec<CentroidSolve>,
}

impl CentroidReport {
    pub fn gamma_lattice(&self, n: usize) -> Lattice {
        Lattice::from_generators(n, &self.gamma_window)
    }

    pub fn pass(&self) -> bool {
        self.xi_zero_only && self.stable && self.realization_matches != Some(false) && self.symmetric != Some(false)
    }

    pub fn to_check(&self) -> CheckResult {
        let mut c = CheckResult::windowed(self.window);
        c.require(self.xi_zero_only, || "centroid element with nonzero root part".into());
        c.require(self.stable, || "centroid dimensions change from B to B+1".into());
        c.require(self.realization_matches != Some(false), || "realization chi^gamma violates constraints".into());
        c.require(self.symmetric != Some(false), || "centroid element not symmetric for the form".into());
        c.with("gamma_window", &self.gamma_window).with("gamma_radius", self.gamma_radius).with("dims", &self.dims)
    }
}

fn xi_differences(h: &dyn GradedLie) -> BTreeSet<Vec<i64>> {
    let sup = h.xi_support();
    let mut out = BTreeSet::new();
    for a in &sup {
        for b in &sup {
            let d: Vec<i64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            if d.iter().any(|&x| x != 0) {
                out.insert(d);
            }
        }
    }
    out
}

/// Nonzero root parts: the `L_0^0` constraints alone force zero.
fn xi_shift_vanishes(h: &dyn GradedLie, memo: &Memo, b: i64, gb: i64) -> bool {
    let n = h.meta().n;
    let zero = Degree::new(vec![0; h.meta().xi_dim()], vec![0; n]);
    let x0: Vec<usize> = (0..h.dim(&zero)).collect();
    let degs = window_degrees(h, b);
    let zetas = xi_differences(h);
    zetas.par_iter().all(|z| {
        box_points(n, gb).iter().all(|g| {
            degs.iter().all(|d| {
                let t = Degree::new(d.xi.iter().zip(z).map(|(a, b)| a + b).collect(), d.lam.iter().zip(g).map(|(a, b)| a + b).collect());
                let (kd, kt) = (h.dim(d), h.dim(&t));
                if kt == 0 {
                    return true;
                }
                // unknowns U[j][r] = r-th coordinate of chi(y_j)
                let nv = kd * kt;
                let mut ech = Echelon::new();
                for &i in &x0 {
                    let xy: Vec<_> = (0..kd).map(|j| memo.bracket(&zero, i, d, j)).collect();
                    let xt: Vec<_> = (0..kt).map(|s| memo.bracket(&zero, i, &t, s)).collect();
                    for j in 0..kd {
                        for r in 0..kt {
                            let mut row = vec![CycScalar::zero(); nv];
                            for m in 0..kd {
                                row[m * kt + r] += xy[j][m].clone();
                            }
                            for s in 0..kt {
                                row[j * kt + s] -= xt[s][r].clone();
                            }
                            ech.insert(&sparse_from_dense(&row));
                        }
                    }
                }
                ech.rank() == nv
            })
        })
    })
}

fn centroid_dims(h: &dyn GradedLie, memo: &Memo, b: i64, gb: i64) -> Vec<CentroidSolve> {
    let xs = short_window(h, b);
    let ys = window_basis(h, b);
    box_points(h.meta().n, gb).par_iter().map(|g| solve_gamma(h, memo, &xs, &ys, g)).collect()
}

/// Exact window solve for degree-homogeneous centroid elements; `gamma` ranges over the box of radius `B + 1`.
pub fn centroid(h: &dyn GradedLie, b: i64) -> CentroidReport {
    centroid_in(h, b, b + 1)
}

/// As [`centroid`] with an explicit radius for the `gamma` box.
pub fn centroid_in(h: &dyn GradedLie, b: i64, gamma_radius: i64) -> CentroidReport {
    let memo = Memo::new(h);
    let n = h.meta().n;
    let xi_zero_only = xi_shift_vanishes(h, &memo, b, gamma_radius);
    let solves = centroid_dims(h, &memo, b, gamma_radius);
    let next: BTreeMap<Vec<i64>, usize> = {
        let xs = short_window(h, b + 1);
        let ys = window_basis(h, b + 1);
        solves.par_iter().map(|s| (s.gamma.clone(), solve_gamma(h, &memo, &xs, &ys, &s.gamma).kernel.len())).collect()
    };
    let stable = solves.iter().all(|s| next[&s.gamma] == s.kernel.len());
    let xi0 = vec![0; h.meta().xi_dim()];
    let mut dims = BTreeMap::new();
    let mut gw = Vec::new();
    for s in &solves {
        if !s.kernel.is_empty() {
            dims.insert(Degree::new(xi0.clone(), s.gamma.clone()).to_string(), s.kernel.len());
            gw.push(s.gamma.clone());
        }
    }
    let xs = short_window(h, b);
    let ys = window_basis(h, b);
    let mut realization_matches = None;
    if h.centroid_support().is_some() {
        let ok = gw.iter().all(|g| realization_satisfies(h, &memo, &xs, &ys, g));
        let sup = h.centroid_support().unwrap();
        let agree = box_points(n, gamma_radius).iter().all(|g| sup.contains(g) == gw.contains(g));
        realization_matches = Some(ok && agree);
    }
    let symmetric = h.has_form().then(|| solves.iter().all(|s| solution_symmetric(h, s, &ys)));
    CentroidReport { window: b, gamma_radius, dims, gamma_window: gw, xi_zero_only, stable, realization_matches, symmetric, solves }
}

fn realization_satisfies(h: &dyn GradedLie, memo: &Memo, xs: &[Basis], ys: &[Basis], g: &[i64]) -> bool {
    let chi = |d: &Degree, i: usize| -> Option<Element> {
        let v = h.centroid_element(g, d, i)?;
        Some(Element::homogeneous(shift(d, g), v))
    };
    let chi_el = |e: &Element| -> Option<Element> {
        let mut out = Element::zero();
        for (d, v) in &e.parts {
            for (i, c) in v.iter().enumerate() {
                if !c.is_zero() {
                    let im = chi(d, i)?;
                    out = out.add(&im.scale(c));
                }
            }
        }
        Some(out)
    };
    xs.par_iter().all(|(da, i)| {
        let x = Element::basis(h, da, *i);
        ys.iter().all(|(db, j)| {
            let xy = Element::homogeneous(da.add(db), memo.bracket(da, *i, db, *j).to_vec());
            let Some(lhs) = chi_el(&xy) else { return false };
            let Some(cy) = chi(db, *j) else { return false };
            lhs == bracket(h, &x, &cy)
        })
    })
}

fn solution_symmetric(h: &dyn GradedLie, s: &CentroidSolve, ys: &[Basis]) -> bool {
    for k in 0..s.kernel.len() {
        for (da, i) in ys {
            let ta = shift(da, &s.gamma);
            let partner = ta.neg();
            for j in 0..h.dim(&partner) {
                let yb = (partner.clone(), j);
                let Some(cy) = s.image(k, &yb) else { continue };
                let Some(cx) = s.image(k, &(da.clone(), *i)) else { continue };
                // (chi x | y) vs (x | chi y)
                let mut l = CycScalar::zero();
                for (r, c) in cx.iter().enumerate() {
                    if !c.is_zero() {
                        l += c * &h.form(&ta, r, &partner, j).unwrap_or_else(CycScalar::zero);
                    }
                }
                let tb = shift(&partner, &s.gamma);
                let mut r_ = CycScalar::zero();
                for (r, c) in cy.iter().enumerate() {
                    if !c.is_zero() {
                        r_ += c * &h.form(da, *i, &tb, r).unwrap_or_else(CycScalar::zero);
                    }
                }
                if l != r_ {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realizations::{quantum_torus, sl_torus, split_sl, twisted_loop, FiniteOrderAut, QuantumMatrix};

    fn q(a: i64, b: i64) -> Q {
        Q::new(a.into(), b.into())
    }

    #[test]
    fn laurent_sder_shapes() {
        assert_eq!(laurent_sder(1, &[0]), vec![DegreeMap::unit(1, 0)]);
        let v = laurent_sder(2, &[1, 1]);
        assert_eq!(v, vec![DegreeMap::new(vec![q(-1, 1), q(1, 1)])]);
        assert_eq!(laurent_sder(2, &[0, 0]).len(), 2);
        assert_eq!(laurent_sder(3, &[2, 0, 3]).len(), 2);
        for t in laurent_sder(3, &[2, 0, 3]) {
            assert!(t.eval(&[2, 0, 3]).is_zero());
        }
    }

    #[test]
    fn bracket_formula() {
        let t = CentroidalDerivation::new(vec![0, 0], DegreeMap::from_ints(&[2, 1]));
        let p = CentroidalDerivation::new(vec![1, -1], DegreeMap::from_ints(&[1, 1]));
        let r = t.bracket(&p);
        // theta(delta) = 1
        assert_eq!(r.gamma, vec![1, -1]);
        assert_eq!(r.theta, p.theta);
        let anti = p.bracket(&t);
        assert_eq!(anti.theta, DegreeMap::from_ints(&[-1, -1]));
    }

    #[test]
    fn degree_derivation_on_loop() {
        let l = sl_torus(3, &quantum_torus(&QuantumMatrix::laurent(1)).unwrap()).unwrap();
        let d = degree_derivation(DegreeMap::unit(1, 0), &l).unwrap();
        let deg = Degree::new(vec![1, -1, 0], vec![2]);
        let x = Element::basis(&l, &deg, 0);
        assert_eq!(d.apply(&l, &x).unwrap(), x.scale(&CycScalar::from_int(2)));
        assert!(check_derivation(&l, &d, 2).pass);
        let z = degree_derivation(DegreeMap::zero(1), &l).unwrap();
        assert!(z.apply(&l, &x).unwrap().is_zero());
        assert!(degree_derivation(DegreeMap::zero(2), &l).is_err());
    }

    #[test]
    fn centroid_of_split_is_scalars() {
        let l = split_sl(3).unwrap();
        let c = centroid(&l, 1);
        assert!(c.pass(), "{c:?}");
        assert_eq!(c.gamma_window, vec![Vec::<i64>::new()]);
        assert_eq!(c.solves[0].kernel.len(), 1);
    }

    #[test]
    fn centroid_of_loop_and_twisted() {
        let l = sl_torus(3, &quantum_torus(&QuantumMatrix::laurent(1)).unwrap()).unwrap();
        let c = centroid(&l, 2);
        assert!(c.pass(), "{c:?}");
        assert_eq!(c.gamma_window.len(), 7);
        let t = twisted_loop(&FiniteOrderAut::neg_transpose(3)).unwrap();
        let c = centroid(&t, 2);
        assert!(c.pass(), "{c:?}");
        assert_eq!(c.gamma_window, vec![vec![-2], vec![0], vec![2]]);
    }

    #[test]
    fn scder_loop_is_degree_only_at_zero() {
        let l = sl_torus(3, &quantum_torus(&QuantumMatrix::laurent(1)).unwrap()).unwrap();
        let (d, rep) = scder_space(&l, &ScderChoice::Full, 2).unwrap();
        assert!(rep.pass());
        assert_eq!(d.dim_at(&[0]), 1);
        assert_eq!(d.dim_at(&[1]), 0);
        let l2 = sl_torus(3, &quantum_torus(&QuantumMatrix::laurent(2)).unwrap()).unwrap();
        let (d2, rep2) = scder_space(&l2, &ScderChoice::Full, 1).unwrap();
        assert!(rep2.pass(), "{:?}", rep2.failures());
        assert_eq!(d2.dim_at(&[1, 1]), 1);
        let bad = ScderChoice::Custom(vec![DerivationEntry { gamma: vec![1, 0], thetas: vec![vec!["1".into(), "0".into()]] }]);
        assert!(matches!(scder_space(&l2, &bad, 1), Err(DerivationError::NotSkew(_))));
    }
}

#[cfg(test)]
mod torus_tests {
    use super::*;
    use crate::realizations::{quantum_torus, sl_torus, torus_center_support, QuantumMatrix};
    use crate::scalars::primitive_root;

    #[test]
    fn centroid_support_matches_torus_centre() {
        for qm in [QuantumMatrix::laurent(2), QuantumMatrix::two(primitive_root(3).unwrap()).unwrap(), QuantumMatrix::two_generic()] {
            let l = sl_torus(3, &quantum_torus(&qm).unwrap()).unwrap();
            let c = centroid(&l, 2);
            assert!(c.pass(), "{c:?}");
            let z = torus_center_support(&qm);
            let expect: Vec<Vec<i64>> = box_points(2, 3).into_iter().filter(|g| z.contains(g)).collect();
            assert_eq!(c.gamma_window, expect);
        }
    }
}
