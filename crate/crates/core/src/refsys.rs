//! Reflection subspaces, extension data, affine reflection systems and the
//! extended affine root system checks.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{smith_invariants, Lattice};
use crate::linalg::{self, sparse_from_dense, Echelon};
use crate::report::{CheckResult, Report};
use crate::rootsys::{
    identify, pairing, pairing_int, reflect, Family, LengthClass, Root, RootSystem, RootSystemId,
};
use crate::scalars::{CycScalar, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RefsysError {
    #[error("extension datum for {0} is missing the {1:?} class")]
    MissingClass(RootSystemId, LengthClass),
    #[error("extension datum for {0} has a {1:?} class that the system lacks")]
    ExtraClass(RootSystemId, LengthClass),
    #[error("lattice rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },
    #[error("invalid extension datum: {0}")]
    InvalidDatum(String),
    #[error("quotient root system: {0}")]
    Quotient(String),
}

/// All integer points of the box `[-b, b]^n`, in lexicographic order.
pub fn box_points(n: usize, b: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * (2 * b as usize + 1));
        for p in &out {
            for x in -b..=b {
                let mut q = p.clone();
                q.push(x);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn vadd(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn vsub(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn vscale(k: i64, a: &[i64]) -> Vec<i64> {
    a.iter().map(|x| k * x).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Pointed,
    Symmetric,
    Plain,
}

/// A finite union of cosets `rep + modulus`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionSubspace {
    pub modulus: Lattice,
    pub reps: Vec<Vec<i64>>,
    pub flavor: Flavor,
}

impl ReflectionSubspace {
    pub fn new(modulus: Lattice, reps: Vec<Vec<i64>>, flavor: Flavor) -> Self {
        let set: BTreeSet<Vec<i64>> = reps.iter().map(|r| modulus.reduce(r)).collect();
        ReflectionSubspace { modulus, reps: set.into_iter().collect(), flavor }
    }

    pub fn subgroup(l: Lattice) -> Self {
        let n = l.n;
        Self::new(l, vec![vec![0; n]], Flavor::Pointed)
    }

    pub fn zero(n: usize) -> Self {
        Self::subgroup(Lattice::zero(n))
    }

    pub fn full(n: usize) -> Self {
        Self::subgroup(Lattice::full(n))
    }

    /// `k Z^n`.
    pub fn multiples(n: usize, k: i64) -> Self {
        Self::subgroup(Lattice::scaled_full(n, k))
    }

    /// `rep + k Z^n`.
    pub fn coset(n: usize, k: i64, rep: Vec<i64>, flavor: Flavor) -> Self {
        Self::new(Lattice::scaled_full(n, k), vec![rep], flavor)
    }

    pub fn n(&self) -> usize {
        self.modulus.n
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        self.reps.binary_search(&self.modulus.reduce(v)).is_ok()
    }

    /// `Z[A]`.
    pub fn span(&self) -> Lattice {
        let mut g = self.reps.clone();
        g.extend(self.modulus.rows.iter().cloned());
        Lattice::from_generators(self.n(), &g)
    }

    /// Is the set `start + <gens>` contained in `self`?
    fn contains_translates(&self, start: &[i64], gens: &[Vec<i64>]) -> bool {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::new();
        let s = self.modulus.reduce(start);
        if !self.contains(&s) {
            return false;
        }
        seen.insert(s.clone());
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for g in gens {
                for w in [vadd(&v, g), vsub(&v, g)] {
                    let w = self.modulus.reduce(&w);
                    if seen.contains(&w) {
                        continue;
                    }
                    if !self.contains(&w) {
                        return false;
                    }
                    seen.insert(w.clone());
                    queue.push_back(w);
                }
            }
        }
        true
    }

    pub fn is_subset_of(&self, other: &ReflectionSubspace) -> bool {
        self.reps.iter().all(|r| other.contains_translates(r, &self.modulus.rows))
    }

    pub fn set_eq(&self, other: &ReflectionSubspace) -> bool {
        self.is_subset_of(other) && other.is_subset_of(self)
    }

    pub fn plus(&self, other: &ReflectionSubspace) -> ReflectionSubspace {
        let m = self.modulus.join(&other.modulus);
        let reps = self.reps.iter().flat_map(|a| other.reps.iter().map(move |b| vadd(a, b))).collect();
        ReflectionSubspace::new(m, reps, Flavor::Plain)
    }

    pub fn scaled(&self, k: i64) -> ReflectionSubspace {
        ReflectionSubspace::new(self.modulus.scale(k), self.reps.iter().map(|r| vscale(k, r)).collect(), Flavor::Plain)
    }

    pub fn negated(&self) -> ReflectionSubspace {
        self.scaled(-1)
    }

    pub fn intersects(&self, other: &ReflectionSubspace) -> bool {
        let m = self.modulus.join(&other.modulus);
        self.reps.iter().any(|a| other.reps.iter().any(|b| m.contains(&vsub(a, b))))
    }

    pub fn is_subgroup(&self) -> bool {
        !self.is_empty() && ReflectionSubspace::subgroup(self.span()).is_subset_of(self)
    }

    fn closed_under_double_span(&self) -> bool {
        let gens: Vec<Vec<i64>> = self.span().rows.iter().map(|r| vscale(2, r)).collect();
        self.reps.iter().all(|r| self.contains_translates(r, &gens))
    }

    /// `0 in A` and `A` is a union of cosets modulo `2 Z[A]`.
    pub fn structurally_pointed(&self) -> bool {
        self.contains(&vec![0; self.n()]) && self.closed_under_double_span()
    }

    /// `A = -A` and `A` is a union of cosets modulo `2 Z[A]`.
    pub fn structurally_symmetric(&self) -> bool {
        self.negated().is_subset_of(self) && self.closed_under_double_span()
    }

    pub fn window_points(&self, b: i64) -> Vec<Vec<i64>> {
        box_points(self.n(), b).into_iter().filter(|p| self.contains(p)).collect()
    }

    /// Infers a subspace from its points in a window, as a union of cosets
    /// modulo twice their span.
    pub fn from_points(n: usize, points: &[Vec<i64>], flavor: Flavor) -> ReflectionSubspace {
        let span = Lattice::from_generators(n, points);
        ReflectionSubspace::new(span.scale(2), points.to_vec(), flavor)
    }
}

/// Verifies the claimed flavor structurally and by brute force on a window.
pub fn check_reflection_subspace(a: &ReflectionSubspace, window: i64) -> CheckResult {
    let mut c = CheckResult::windowed(window);
    let pts = a.window_points(window);
    let zero = vec![0; a.n()];
    let mut brute_pointed = a.contains(&zero);
    let mut brute_symmetric = true;
    let mut witness_p = None;
    let mut witness_s = None;
    for x in &pts {
        if !a.contains(&vscale(-1, x)) {
            brute_symmetric = false;
            witness_s.get_or_insert(format!("-{x:?} missing"));
        }
        for y in &pts {
            let p = vsub(x, &vscale(2, y));
            if !a.contains(&p) {
                brute_pointed = false;
                witness_p.get_or_insert(format!("{x:?} - 2*{y:?} = {p:?} missing"));
            }
            let s = vsub(&vscale(2, x), y);
            if !a.contains(&s) {
                brute_symmetric = false;
                witness_s.get_or_insert(format!("2*{x:?} - {y:?} = {s:?} missing"));
            }
        }
    }
    let st_pointed = a.structurally_pointed();
    let st_symmetric = a.structurally_symmetric();
    c.set("pointed", st_pointed && brute_pointed);
    c.set("symmetric", st_symmetric && brute_symmetric);
    c.require(st_pointed == brute_pointed, || format!("pointed: structural {st_pointed} vs window {brute_pointed}"));
    c.require(st_symmetric == brute_symmetric, || {
        format!("symmetric: structural {st_symmetric} vs window {brute_symmetric}")
    });
    c.require(!st_pointed || st_symmetric, || "pointed but not symmetric".into());
    match a.flavor {
        Flavor::Pointed => c.require(st_pointed && brute_pointed, || witness_p.unwrap_or("0 missing".into())),
        Flavor::Symmetric => c.require(st_symmetric && brute_symmetric, || witness_s.unwrap_or_default()),
        Flavor::Plain => {}
    }
    c
}

/// A family `(Lambda_xi)` stored per length class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionDatum {
    pub system: RootSystemId,
    pub n: usize,
    pub classes: BTreeMap<LengthClass, ReflectionSubspace>,
}

impl ExtensionDatum {
    pub fn new(
        system: RootSystemId,
        n: usize,
        zero: ReflectionSubspace,
        short: ReflectionSubspace,
        long: Option<ReflectionSubspace>,
        div: Option<ReflectionSubspace>,
    ) -> Result<Self, RefsysError> {
        let mut classes = BTreeMap::new();
        classes.insert(LengthClass::Zero, zero);
        classes.insert(LengthClass::Short, short);
        if let Some(l) = long {
            classes.insert(LengthClass::Long, l);
        }
        if let Some(d) = div {
            classes.insert(LengthClass::Divisible, d);
        }
        let ed = ExtensionDatum { system, n, classes };
        ed.validate_shape()?;
        Ok(ed)
    }

    /// Every class equal to `{0}`.
    pub fn trivial(system: RootSystemId, n: usize) -> Self {
        Self::uniform(system, n, ReflectionSubspace::zero(n))
    }

    /// Every class equal to `Z^n`.
    pub fn untwisted(system: RootSystemId, n: usize) -> Self {
        Self::uniform(system, n, ReflectionSubspace::full(n))
    }

    fn uniform(system: RootSystemId, n: usize, a: ReflectionSubspace) -> Self {
        let s = RootSystem::new(system);
        let classes = [LengthClass::Zero, LengthClass::Short, LengthClass::Long, LengthClass::Divisible]
            .into_iter()
            .filter(|c| s.has_class(*c))
            .map(|c| (c, a.clone()))
            .collect();
        ExtensionDatum { system, n, classes }
    }

    pub fn validate_shape(&self) -> Result<(), RefsysError> {
        let s = RootSystem::new(self.system);
        for c in [LengthClass::Zero, LengthClass::Short, LengthClass::Long, LengthClass::Divisible] {
            match (s.has_class(c), self.classes.contains_key(&c)) {
                (true, false) => return Err(RefsysError::MissingClass(self.system, c)),
                (false, true) => return Err(RefsysError::ExtraClass(self.system, c)),
                _ => {}
            }
        }
        for a in self.classes.values() {
            if a.n() != self.n {
                return Err(RefsysError::RankMismatch { expected: self.n, found: a.n() });
            }
        }
        Ok(())
    }

    pub fn get(&self, c: LengthClass) -> Option<&ReflectionSubspace> {
        self.classes.get(&c)
    }

    fn class(&self, c: LengthClass) -> &ReflectionSubspace {
        &self.classes[&c]
    }

    pub fn for_root(&self, s: &RootSystem, xi: &[i64]) -> &ReflectionSubspace {
        self.class(s.length_class(xi))
    }

    /// Rank of the span of all classes.
    pub fn span_rank(&self) -> usize {
        let mut l = Lattice::zero(self.n);
        for a in self.classes.values() {
            l = l.join(&a.span());
        }
        l.rank()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatumMode {
    Axioms,
    Classification,
    Both,
}

fn check_axioms_mode(ed: &ExtensionDatum, window: i64) -> CheckResult {
    let s = RootSystem::new(ed.system);
    let mut c = CheckResult::windowed(window);
    // (ED1), one representative pair per (class, class, pairing, target class)
    let mut seen = HashSet::new();
    let pts: HashMap<LengthClass, Vec<Vec<i64>>> =
        ed.classes.iter().map(|(k, a)| (*k, a.window_points(window))).collect();
    for eta in s.roots.iter() {
        for xi in s.nonzero() {
            let k = pairing_int(eta, xi);
            let target = s.length_class(&reflect(eta, xi));
            let key = (s.length_class(eta), s.length_class(xi), k, target);
            if !seen.insert(key) {
                continue;
            }
            let dst = ed.class(target);
            'outer: for mu in &pts[&key.0] {
                for la in &pts[&key.1] {
                    let v = vsub(mu, &vscale(k, la));
                    if !dst.contains(&v) {
                        c.fail(format!("ED1: eta={eta:?} xi={xi:?}: {mu:?} - {k}*{la:?} not in {target:?}"));
                        break 'outer;
                    }
                }
            }
        }
    }
    check_ed2_ed3(ed, &mut c);
    c
}

fn check_ed2_ed3(ed: &ExtensionDatum, c: &mut CheckResult) {
    let zero = vec![0; ed.n];
    for (k, a) in &ed.classes {
        if *k == LengthClass::Divisible {
            c.require(!a.is_empty(), || "ED2: divisible class empty".into());
        } else {
            c.require(a.contains(&zero), || format!("ED2: 0 not in the {k:?} class"));
        }
    }
    let r = ed.span_rank();
    c.require(r == ed.n, || format!("ED3: classes span rank {r} < {}", ed.n));
}

fn check_classification_mode(ed: &ExtensionDatum) -> CheckResult {
    let mut c = CheckResult::structural();
    let id = ed.system.canonical();
    let sh = ed.class(LengthClass::Short);
    let lg = ed.get(LengthClass::Long);
    let dv = ed.get(LengthClass::Divisible);
    c.require(sh.structurally_pointed(), || "short class not pointed".into());
    if let Some(lg) = lg {
        c.require(lg.structurally_pointed(), || "long class not pointed".into());
    }
    if let Some(dv) = dv {
        c.require(dv.structurally_symmetric(), || "divisible class not symmetric".into());
    }
    let mut incl = |a: &ReflectionSubspace, k: i64, b: &ReflectionSubspace, dst: &ReflectionSubspace, what: &str| {
        c.require(a.plus(&b.scaled(k)).is_subset_of(dst), || format!("inclusion {what} fails"));
    };
    let l = id.rank;
    let mut sub_sh = false;
    let mut sub_lg = false;
    match id.family {
        Family::A | Family::D | Family::E => sub_sh = l >= 2,
        Family::B | Family::C | Family::F => {
            let lg = lg.expect("shape validated");
            incl(lg, 2, sh, lg, "Lg + 2 Sh in Lg");
            incl(sh, 1, lg, sh, "Sh + Lg in Sh");
            sub_lg = (id.family == Family::B && l >= 3) || id.family == Family::F;
            sub_sh = (id.family == Family::C && l >= 3) || id.family == Family::F;
        }
        Family::G => {
            let lg = lg.expect("shape validated");
            incl(lg, 3, sh, lg, "Lg + 3 Sh in Lg");
            incl(sh, 1, lg, sh, "Sh + Lg in Sh");
            sub_sh = true;
            sub_lg = true;
        }
        Family::BC => {
            let dv = dv.expect("shape validated");
            incl(dv, 4, sh, dv, "Div + 4 Sh in Div");
            incl(sh, 1, dv, sh, "Sh + Div in Sh");
            if let Some(lg) = lg {
                incl(lg, 2, sh, lg, "Lg + 2 Sh in Lg");
                incl(sh, 1, lg, sh, "Sh + Lg in Sh");
                incl(dv, 2, lg, dv, "Div + 2 Lg in Div");
                incl(lg, 1, dv, lg, "Lg + Div in Lg");
                sub_lg = l >= 3;
            }
        }
    }
    if sub_sh {
        c.require(sh.is_subgroup(), || "short class must be a subgroup".into());
    }
    if sub_lg {
        c.require(lg.is_some_and(|g| g.is_subgroup()), || "long class must be a subgroup".into());
    }
    check_ed2_ed3(ed, &mut c);
    c
}

pub fn check_extension_datum(ed: &ExtensionDatum, window: i64, mode: DatumMode) -> Result<Report, RefsysError> {
    ed.validate_shape()?;
    let mut r = Report::new();
    let ax = matches!(mode, DatumMode::Axioms | DatumMode::Both).then(|| check_axioms_mode(ed, window));
    let cl = matches!(mode, DatumMode::Classification | DatumMode::Both).then(|| check_classification_mode(ed));
    if let (Some(a), Some(b)) = (&ax, &cl) {
        let mut agree = CheckResult::windowed(window);
        agree.require(a.pass == b.pass, || format!("axioms {} vs classification {}", a.pass, b.pass));
        r.add("modes-agree", agree);
    }
    if let Some(a) = ax {
        r.add("axioms", a);
    }
    if let Some(b) = cl {
        r.add("classification", b);
    }
    Ok(r)
}

/// An element `xi + lambda` of an affine reflection system.
pub type ArsRoot = (Root, Vec<i64>);

/// `R = union over xi of xi + Lambda_xi`.
#[derive(Clone, Debug)]
pub struct AffineReflectionSystem {
    pub datum: ExtensionDatum,
    pub system: RootSystem,
}

pub fn build_ars(ed: &ExtensionDatum) -> Result<AffineReflectionSystem, RefsysError> {
    ed.validate_shape()?;
    let c = check_classification_mode(ed);
    if !c.pass {
        return Err(RefsysError::InvalidDatum(c.witnesses.join("; ")));
    }
    Ok(AffineReflectionSystem { datum: ed.clone(), system: RootSystem::new(ed.system) })
}

impl AffineReflectionSystem {
    pub fn n(&self) -> usize {
        self.datum.n
    }

    pub fn contains(&self, xi: &[i64], la: &[i64]) -> bool {
        self.system.contains(xi) && self.datum.for_root(&self.system, xi).contains(la)
    }

    pub fn roots_in_window(&self, b: i64) -> Vec<ArsRoot> {
        let mut out = Vec::new();
        for xi in &self.system.roots {
            for la in self.datum.for_root(&self.system, xi).window_points(b) {
                out.push((xi.clone(), la));
            }
        }
        out
    }

    /// `s_(xi + lambda)(y + z) = s_xi(y) + (z - <y, xi^v> lambda)`.
    pub fn reflect(&self, alpha: &ArsRoot, beta: &ArsRoot) -> ArsRoot {
        let k = pairing_int(&beta.0, &alpha.0);
        (reflect(&beta.0, &alpha.0), vsub(&beta.1, &vscale(k, &alpha.1)))
    }

    /// (AR1)-(AR4) on the window.
    pub fn check_axioms(&self, b: i64) -> Report {
        let mut r = Report::new();
        let roots = self.roots_in_window(b);
        let mut ar1 = CheckResult::windowed(b);
        let zero = (self.system.zero(), vec![0; self.n()]);
        ar1.require(roots.contains(&zero), || "0 not in R".into());
        ar1.require(self.system.rank() == self.system.id.map_or(0, |i| i.rank), || "S does not span Y".into());
        let lam_rank = Lattice::from_generators(self.n(), &roots.iter().map(|x| x.1.clone()).collect::<Vec<_>>()).rank();
        ar1.require(lam_rank == self.n(), || format!("null part spans rank {lam_rank}"));
        r.add("AR1", ar1);
        let mut ar2 = CheckResult::windowed(b);
        let mut ar3 = CheckResult::windowed(b);
        for a in roots.iter().filter(|a| a.0.iter().any(|&x| x != 0)) {
            for x in &roots {
                let p = pairing(&x.0, &a.0);
                ar3.require(p.is_integer(), || format!("<{x:?}, {a:?}^v> = {p}"));
                let y = self.reflect(a, x);
                ar2.require(self.contains(&y.0, &y.1), || format!("s_{a:?}({x:?}) = {y:?} not in R"));
            }
        }
        r.add("AR2", ar2);
        r.add("AR3", ar3);
        let mut ar4 = CheckResult::structural();
        let l0 = self.datum.class(LengthClass::Zero);
        for (xi, la) in &roots {
            let null = xi.iter().all(|&x| x == 0);
            if null {
                ar4.require(l0.contains(la), || format!("null root {la:?} outside Lambda_0"));
            }
        }
        r.add("AR4", ar4);
        r
    }
}

/// Rank of the span of window points, with the B vs B+1 stabilization check.
pub fn stabilized_rank(n: usize, points_at: impl Fn(i64) -> Vec<Vec<i64>>, b: i64) -> (usize, usize) {
    let r0 = smith_invariants(&points_at(b), n).len();
    let r1 = smith_invariants(&points_at(b + 1), n).len();
    (r0, r1)
}

/// Result of the extended affine root system checks.
#[derive(Clone, Debug, Serialize)]
pub struct EarsReport {
    pub report: Report,
    pub nullity: Option<usize>,
}

impl EarsReport {
    pub fn pass(&self) -> bool {
        self.report.pass()
    }
}

pub fn check_ears(ars: &AffineReflectionSystem, b: i64) -> EarsReport {
    let ed = &ars.datum;
    let s = &ars.system;
    let mut r = Report::new();
    let mut irr = CheckResult::structural();
    irr.require(s.is_irreducible(), || format!("{} components", s.num_components()));
    r.add("irreducible", irr);

    let sh = ed.class(LengthClass::Short);
    let l0 = ed.class(LengthClass::Zero);
    let mut c = CheckResult::structural();
    c.require(l0.set_eq(&sh.plus(sh)), || "Lambda_0 != Lambda_sh + Lambda_sh".into());
    r.add("null-is-short-sum", c);

    let mut c = CheckResult::structural();
    if let Some(dv) = ed.get(LengthClass::Divisible) {
        c.require(!dv.intersects(&sh.scaled(2)), || "Lambda_div meets 2 Lambda_sh".into());
    }
    r.add("div-avoids-twice-short", c);

    let mut c = CheckResult::structural();
    for xi in s.nonzero() {
        let two: Root = vscale(2, xi);
        if s.contains(&two) {
            let a = ed.for_root(s, &two);
            let bx = ed.for_root(s, xi).scaled(2);
            c.require(!a.intersects(&bx), || format!("Lambda_2xi meets 2 Lambda_xi at xi={xi:?}"));
        }
    }
    r.add("reduced", c);

    let mut c = CheckResult::structural();
    c.require(l0.negated().set_eq(l0), || "Lambda_0 not symmetric".into());
    r.add("null-symmetric", c);

    let pts = |bb: i64| -> Vec<Vec<i64>> { ed.classes.values().flat_map(|a| a.window_points(bb)).collect() };
    let (r0, r1) = stabilized_rank(ed.n, pts, b);
    let mut c = CheckResult::windowed(b);
    c.require(r0 == r1, || format!("window too small: rank {r0} at B={b}, {r1} at B={}", b + 1));
    c.set("nullity", r0);
    let nullity = (r0 == r1).then_some(r0);
    r.add("nullity", c);

    let mut c = CheckResult::windowed(b);
    let roots = ars.roots_in_window(b);
    for a in roots.iter().filter(|a| a.0.iter().any(|&x| x != 0)) {
        for beta in &roots {
            let ks: Vec<i64> = (-8..=8)
                .filter(|&k| {
                    let xi: Root = vadd(&beta.0, &vscale(k, &a.0));
                    let la = vadd(&beta.1, &vscale(k, &a.1));
                    ars.contains(&xi, &la)
                })
                .collect();
            let lo = *ks.first().unwrap();
            let hi = *ks.last().unwrap();
            let unbroken = (hi - lo + 1) as usize == ks.len();
            let (d, u) = (-lo, hi);
            let pr = pairing_int(&beta.0, &a.0);
            c.require(unbroken && d - u == pr && d + u + 1 <= 5, || {
                format!("string of {beta:?} through {a:?}: k in {ks:?}, pairing {pr}")
            });
        }
    }
    r.add("root-strings", c);
    EarsReport { report: r, nullity }
}

/// Root vectors in some coordinate space with a symmetric bilinear form.
#[derive(Clone, Debug)]
pub struct QuotientInput {
    pub roots: Vec<Vec<CycScalar>>,
    pub gram: Vec<Vec<CycScalar>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientResult {
    pub system: RootSystemId,
    /// Simple roots of the quotient (catalog coordinates) and their chosen lifts.
    pub section: Vec<(Root, Vec<String>)>,
    pub datum: ExtensionDatum,
    /// Window points of each `Lambda_xi`, per catalog root.
    pub fibres: BTreeMap<Root, Vec<Vec<i64>>>,
    /// Each class has the same window set on all of its roots.
    pub classes_consistent: bool,
}

fn form(gram: &[Vec<CycScalar>], x: &[CycScalar], y: &[CycScalar]) -> CycScalar {
    let gy = linalg::mat_vec(gram, y);
    x.iter().zip(&gy).fold(CycScalar::zero(), |acc, (a, b)| acc + a * b)
}

fn lex_positive(v: &[Q]) -> bool {
    v.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_positive())
}

/// Simple roots of a finite root system given as rational vectors.
fn simple_roots(roots: &[Vec<Q>]) -> Vec<usize> {
    let set: HashSet<&Vec<Q>> = roots.iter().collect();
    let pos: Vec<usize> = (0..roots.len()).filter(|&i| lex_positive(&roots[i])).collect();
    let half = Q::new(1.into(), 2.into());
    pos.iter()
        .copied()
        .filter(|&i| {
            let h: Vec<Q> = roots[i].iter().map(|x| x * &half).collect();
            if set.contains(&h) {
                return false;
            }
            !pos.iter().any(|&j| {
                let d: Vec<Q> = roots[i].iter().zip(&roots[j]).map(|(a, b)| a - b).collect();
                j != i && lex_positive(&d) && set.contains(&d)
            })
        })
        .collect()
}

fn cartan(simple: &[Vec<Q>], f: &dyn Fn(&[Q], &[Q]) -> Q) -> Vec<Vec<Q>> {
    simple
        .iter()
        .map(|a| simple.iter().map(|b| f(a, b) * Q::from_integer(2.into()) / f(b, b)).collect())
        .collect()
}

fn match_cartan(a: &[Vec<Q>], b: &[Vec<Q>]) -> Option<Vec<usize>> {
    fn go(a: &[Vec<Q>], b: &[Vec<Q>], perm: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
        let i = perm.len();
        if i == a.len() {
            return true;
        }
        for j in 0..b.len() {
            if used[j] || a[i][i] != b[j][j] {
                continue;
            }
            if (0..i).all(|k| a[i][k] == b[j][perm[k]] && a[k][i] == b[perm[k]][j]) {
                perm.push(j);
                used[j] = true;
                if go(a, b, perm, used) {
                    return true;
                }
                perm.pop();
                used[j] = false;
            }
        }
        false
    }
    if a.len() != b.len() {
        return None;
    }
    let mut perm = Vec::new();
    let mut used = vec![false; b.len()];
    go(a, b, &mut perm, &mut used).then_some(perm)
}

fn solve_q(cols: &[Vec<Q>], v: &[Q]) -> Option<Vec<Q>> {
    let a: Vec<Vec<CycScalar>> = (0..v.len())
        .map(|i| cols.iter().map(|c| CycScalar::from_rational(c[i].clone())).collect())
        .collect();
    let b: Vec<CycScalar> = v.iter().map(|x| CycScalar::from_rational(x.clone())).collect();
    let x = linalg::solve(&a, &b)?;
    // check exactness
    let back = linalg::mat_vec(&a, &x);
    if back != b {
        return None;
    }
    x.into_iter().map(|s| s.to_rational()).collect()
}

fn flatten(v: &[CycScalar], m: u32) -> Vec<Q> {
    v.iter().flat_map(|x| x.lifted_coeffs(m)).collect()
}

/// Recovers the quotient root system, a section and the extension datum.
pub fn quotient_root_system(input: &QuotientInput) -> Result<QuotientResult, RefsysError> {
    let err = |s: &str| RefsysError::Quotient(s.to_string());
    let d = input.gram.len();
    let conductor = input
        .roots
        .iter()
        .flatten()
        .map(|x| x.conductor())
        .fold(1u32, |a, b| a.lcm(&b));
    // basis of X among the roots
    let mut ech = Echelon::new();
    let mut xbasis = Vec::new();
    for x in &input.roots {
        if ech.insert(&sparse_from_dense(x)).is_some() {
            xbasis.push(x.clone());
        }
    }
    // keys: form values against a basis of X; choose roots independent modulo the radical
    let keys: Vec<Vec<CycScalar>> =
        input.roots.iter().map(|x| xbasis.iter().map(|b| form(&input.gram, x, b)).collect()).collect();
    let mut kech = Echelon::new();
    let mut ybasis = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        if kech.insert(&sparse_from_dense(k)).is_some() {
            ybasis.push(i);
        }
    }
    let r = ybasis.len();
    let gy: Vec<Vec<CycScalar>> = ybasis
        .iter()
        .map(|&i| ybasis.iter().map(|&j| form(&input.gram, &input.roots[i], &input.roots[j])).collect())
        .collect();
    let gy_inv = if r == 0 { Vec::new() } else { linalg::inverse(&gy).ok_or_else(|| err("form degenerate on Y"))? };
    // Y-coordinates of every root
    let mut ycoords: Vec<Vec<Q>> = Vec::with_capacity(input.roots.len());
    for x in &input.roots {
        let v: Vec<CycScalar> = ybasis.iter().map(|&j| form(&input.gram, x, &input.roots[j])).collect();
        let c = linalg::mat_vec(&gy_inv, &v);
        let c: Option<Vec<Q>> = c.iter().map(|s| s.to_rational()).collect();
        ycoords.push(c.ok_or_else(|| err("root has irrational coordinates in Y"))?);
    }
    let formq = |a: &[Q], b: &[Q]| -> Q {
        let mut acc = Q::zero();
        for i in 0..r {
            for j in 0..r {
                let g = gy[i][j].to_rational().expect("rational form on Y");
                acc += &a[i] * &g * &b[j];
            }
        }
        acc
    };
    let s_set: BTreeSet<Vec<Q>> = ycoords.iter().cloned().collect();
    let s_vec: Vec<Vec<Q>> = s_set.iter().cloned().collect();
    let nonzero: Vec<&Vec<Q>> = s_vec.iter().filter(|v| v.iter().any(|x| !x.is_zero())).collect();
    // components and normalized lengths
    let system = if nonzero.is_empty() {
        None
    } else {
        let norms: Vec<Q> = nonzero.iter().map(|v| formq(v, v)).collect();
        if norms.iter().any(|q| q.is_zero()) {
            return Err(err("a nonzero root of the quotient is isotropic"));
        }
        let min = norms.iter().min_by(|a, b| a.abs().cmp(&b.abs())).unwrap().clone();
        let mut values = Vec::new();
        for q in &norms {
            let v = q * Q::from_integer(2.into()) / &min;
            if !v.is_integer() || !matches!(v.to_integer().to_i64(), Some(2 | 4 | 6 | 8)) {
                return Err(err("normalized lengths outside {2,4,6,8}"));
            }
            values.push(v.to_integer().to_i64().unwrap());
        }
        // connectivity
        let n = nonzero.len();
        let mut comp = vec![usize::MAX; n];
        let mut ncomp = 0;
        for s0 in 0..n {
            if comp[s0] != usize::MAX {
                continue;
            }
            let mut st = vec![s0];
            comp[s0] = ncomp;
            while let Some(i) = st.pop() {
                for j in 0..n {
                    if comp[j] == usize::MAX && !formq(nonzero[i], nonzero[j]).is_zero() {
                        comp[j] = ncomp;
                        st.push(j);
                    }
                }
            }
            ncomp += 1;
        }
        if ncomp != 1 {
            return Err(err(&format!("quotient is reducible with {ncomp} components")));
        }
        let count = |f: &dyn Fn(i64) -> bool| values.iter().filter(|v| f(**v)).count();
        let long_value = values.iter().copied().filter(|v| *v == 4 || *v == 6).max().unwrap_or(0);
        Some(
            identify(r, count(&|v| v == 2), count(&|v| v == 4 || v == 6), long_value, count(&|v| v == 8))
                .ok_or_else(|| err("projected set matches no catalog system"))?,
        )
    };
    let system = match system {
        Some(s) => s,
        None => return Err(err("quotient has no nonzero roots")),
    };
    // isomorphism to the catalog through simple roots and Cartan matrices
    let cat = RootSystem::new(system);
    let cat_q: Vec<Vec<Q>> = cat.roots.iter().map(|v| v.iter().map(|&x| Q::from_integer(x.into())).collect()).collect();
    let simple_s = simple_roots(&s_vec);
    let simple_c = simple_roots(&cat_q);
    let dotq = |a: &[Q], b: &[Q]| -> Q { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let a_s = cartan(&simple_s.iter().map(|&i| s_vec[i].clone()).collect::<Vec<_>>(), &formq);
    let a_c = cartan(&simple_c.iter().map(|&i| cat_q[i].clone()).collect::<Vec<_>>(), &dotq);
    let perm = match_cartan(&a_s, &a_c).ok_or_else(|| err("Cartan matrices do not match the catalog"))?;
    let simple_cols: Vec<Vec<Q>> = simple_s.iter().map(|&i| s_vec[i].clone()).collect();
    let mut phi: HashMap<Vec<Q>, Root> = HashMap::new();
    let mut simple_coords: HashMap<Vec<Q>, Vec<i64>> = HashMap::new();
    for v in &s_vec {
        let c = solve_q(&simple_cols, v).ok_or_else(|| err("root outside the span of simple roots"))?;
        if c.iter().any(|x| !x.is_integer()) {
            return Err(err("non-integral simple-root coordinates"));
        }
        let ci: Vec<i64> = c.iter().map(|x| x.to_integer().to_i64().unwrap()).collect();
        let mut img = vec![0i64; cat.dim];
        for (k, &ck) in ci.iter().enumerate() {
            let target = &cat.roots[simple_c[perm[k]]];
            for t in 0..cat.dim {
                img[t] += ck * target[t];
            }
        }
        if !cat.contains(&img) {
            return Err(err("simple-root map does not carry S into the catalog"));
        }
        phi.insert(v.clone(), img);
        simple_coords.insert(v.clone(), ci);
    }
    if phi.len() != cat.roots.len() {
        return Err(err("root counts differ from the catalog"));
    }
    // fibres over each quotient root, in flattened rational coordinates
    let flat: Vec<Vec<Q>> = input.roots.iter().map(|x| flatten(x, conductor)).collect();
    let flat_set: HashSet<&Vec<Q>> = flat.iter().collect();
    let mut fibres: BTreeMap<Vec<Q>, Vec<usize>> = BTreeMap::new();
    for (i, y) in ycoords.iter().enumerate() {
        fibres.entry(y.clone()).or_default().push(i);
    }
    let dim_flat = flat.first().map_or(0, |v| v.len());
    // order each simple root's lifts by distance to the fibre centroid
    let mut lift_order: Vec<Vec<usize>> = Vec::new();
    for &si in &simple_s {
        let members = &fibres[&s_vec[si]];
        let k = Q::from_integer((members.len() as i64).into());
        let centroid: Vec<Q> =
            (0..dim_flat).map(|t| members.iter().map(|&m| flat[m][t].clone()).sum::<Q>() / &k).collect();
        let mut ms = members.clone();
        ms.sort_by(|&a, &b| {
            let da: Q = flat[a].iter().zip(&centroid).map(|(x, c)| (x - c) * (x - c)).sum();
            let db: Q = flat[b].iter().zip(&centroid).map(|(x, c)| (x - c) * (x - c)).sum();
            da.cmp(&db).then_with(|| flat[a].cmp(&flat[b]))
        });
        ms.truncate(6);
        lift_order.push(ms);
    }
    let ind: Vec<&Vec<Q>> = s_vec
        .iter()
        .filter(|v| {
            let h: Vec<Q> = v.iter().map(|x| x / Q::from_integer(2.into())).collect();
            !s_set.contains(&h) || v.iter().all(|x| x.is_zero())
        })
        .collect();
    let g_of = |choice: &[usize], v: &Vec<Q>| -> Vec<Q> {
        let c = &simple_coords[v];
        let mut out = vec![Q::zero(); dim_flat];
        for (k, &ck) in c.iter().enumerate() {
            let lift = &flat[lift_order[k][choice[k]]];
            for t in 0..dim_flat {
                out[t] += Q::from_integer(ck.into()) * &lift[t];
            }
        }
        out
    };
    let rank_s = simple_s.len();
    let mut tuples: Vec<Vec<usize>> = vec![vec![]];
    for k in 0..rank_s {
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                (0..lift_order[k].len()).map(move |j| {
                    let mut u = t.clone();
                    u.push(j);
                    u
                })
            })
            .collect();
    }
    tuples.sort_by_key(|t| (t.iter().sum::<usize>(), t.clone()));
    let choice = tuples
        .into_iter()
        .find(|t| ind.iter().all(|v| flat_set.contains(&g_of(t, v))))
        .ok_or_else(|| err("no section with g(S_ind) inside R on this window"))?;
    // null-part coordinates
    let diffs: Vec<(Vec<Q>, Vec<Q>)> = input
        .roots
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let g = g_of(&choice, &ycoords[i]);
            (ycoords[i].clone(), flat[i].iter().zip(&g).map(|(a, b)| a - b).collect())
        })
        .collect();
    let denom = diffs.iter().flat_map(|(_, v)| v.iter()).fold(num_bigint::BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let to_int = |v: &[Q]| -> Vec<i64> {
        v.iter().map(|q| (q * Q::from_integer(denom.clone())).to_integer().to_i64().expect("small coordinates")).collect()
    };
    let int_diffs: Vec<(Vec<Q>, Vec<i64>)> = diffs.iter().map(|(y, v)| (y.clone(), to_int(v))).collect();
    let null_lat = Lattice::from_generators(dim_flat, &int_diffs.iter().map(|x| x.1.clone()).collect::<Vec<_>>());
    let n = null_lat.rank();
    let mut by_root: BTreeMap<Root, Vec<Vec<i64>>> = BTreeMap::new();
    for (y, v) in &int_diffs {
        let c = null_lat.coordinates(v).expect("difference lies in its own span");
        by_root.entry(phi[y].clone()).or_default().push(c);
    }
    for v in by_root.values_mut() {
        v.sort();
        v.dedup();
    }
    let mut per_class: BTreeMap<LengthClass, Vec<Vec<i64>>> = BTreeMap::new();
    let mut consistent = true;
    for (root, pts) in &by_root {
        let c = cat.length_class(root);
        match per_class.get(&c) {
            Some(prev) => consistent &= prev == pts,
            None => {
                per_class.insert(c, pts.clone());
            }
        }
    }
    let mk = |c: LengthClass| -> Option<ReflectionSubspace> {
        per_class.get(&c).map(|pts| {
            let fl = if c == LengthClass::Divisible { Flavor::Symmetric } else { Flavor::Pointed };
            ReflectionSubspace::from_points(n, pts, fl)
        })
    };
    let datum = ExtensionDatum::new(
        system,
        n,
        mk(LengthClass::Zero).unwrap_or_else(|| ReflectionSubspace::zero(n)),
        mk(LengthClass::Short).ok_or_else(|| err("no short roots"))?,
        mk(LengthClass::Long),
        mk(LengthClass::Divisible),
    )?;
    let section = (0..rank_s)
        .map(|k| {
            let lift = &input.roots[lift_order[k][choice[k]]];
            (phi[&s_vec[simple_s[k]]].clone(), lift.iter().map(|x| x.to_string()).collect())
        })
        .collect();
    let _ = d;
    Ok(QuotientResult { system, section, datum, fibres: by_root, classes_consistent: consistent })
}

/// Builds quotient input from a windowed affine reflection system: coordinates
/// `(xi, lambda)` with the form living on the `xi` part.
pub fn ars_quotient_input(ars: &AffineReflectionSystem, b: i64) -> QuotientInput {
    let dim = ars.system.dim;
    let n = ars.n();
    let roots = ars
        .roots_in_window(b)
        .into_iter()
        .map(|(xi, la)| xi.iter().chain(la.iter()).map(|&x| CycScalar::from_int(x)).collect())
        .collect();
    let gram = (0..dim + n)
        .map(|i| (0..dim + n).map(|j| CycScalar::from_int(i64::from(i == j && i < dim))).collect())
        .collect();
    QuotientInput { roots, gram }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(f: Family, r: usize) -> RootSystemId {
        RootSystemId::new(f, r).unwrap()
    }

    fn odd() -> ReflectionSubspace {
        ReflectionSubspace::coset(1, 2, vec![1], Flavor::Symmetric)
    }

    #[test]
    fn subspace_examples() {
        let z = ReflectionSubspace::full(1);
        let c = check_reflection_subspace(&z, 6);
        assert!(c.pass);
        let c = check_reflection_subspace(&odd(), 6);
        assert!(c.pass);
        assert_eq!(c.data["symmetric"], true);
        assert_eq!(c.data["pointed"], false);
        // {0,3} + 6Z: brute-force oracle decides
        let a = ReflectionSubspace::new(Lattice::scaled_full(1, 6), vec![vec![0], vec![3]], Flavor::Pointed);
        let pts = a.window_points(12);
        let oracle = pts.iter().all(|x| pts.iter().all(|y| a.contains(&vsub(x, &vscale(2, y))))) && a.contains(&[0]);
        let c = check_reflection_subspace(&a, 12);
        assert_eq!(c.pass, oracle);
        assert!(oracle);
    }

    #[test]
    fn datum_examples() {
        let c2 = ExtensionDatum::new(
            id(Family::C, 2),
            1,
            ReflectionSubspace::full(1),
            ReflectionSubspace::full(1),
            Some(ReflectionSubspace::multiples(1, 2)),
            None,
        )
        .unwrap();
        assert!(check_extension_datum(&c2, 6, DatumMode::Both).unwrap().pass());
        for f in [Family::A, Family::B, Family::G, Family::BC] {
            let r = if f == Family::G { 2 } else { 2 };
            let t = ExtensionDatum::trivial(id(f, r), 0);
            assert!(check_extension_datum(&t, 3, DatumMode::Both).unwrap().pass());
        }
        let bad = ExtensionDatum::new(
            id(Family::B, 2),
            1,
            ReflectionSubspace::full(1),
            ReflectionSubspace::full(1),
            Some(odd()),
            None,
        )
        .unwrap();
        let rep = check_extension_datum(&bad, 6, DatumMode::Both).unwrap();
        assert!(!rep.pass());
        assert!(rep.get("modes-agree").unwrap().pass);
        assert!(rep.get("axioms").unwrap().witnesses.iter().any(|w| w.contains("ED2")));
        let missing = ExtensionDatum::new(id(Family::B, 2), 1, ReflectionSubspace::full(1), ReflectionSubspace::full(1), None, None);
        assert!(matches!(missing, Err(RefsysError::MissingClass(_, LengthClass::Long))));
    }

    fn affine_bc2() -> ExtensionDatum {
        ExtensionDatum::new(
            id(Family::BC, 2),
            1,
            ReflectionSubspace::full(1),
            ReflectionSubspace::full(1),
            Some(ReflectionSubspace::full(1)),
            Some(odd()),
        )
        .unwrap()
    }

    #[test]
    fn ears_examples() {
        let ars = build_ars(&affine_bc2()).unwrap();
        let e = check_ears(&ars, 3);
        assert!(e.pass(), "{:?}", e.report.failures());
        assert_eq!(e.nullity, Some(1));
        let u = build_ars(&ExtensionDatum::untwisted(id(Family::A, 2), 2)).unwrap();
        let e = check_ears(&u, 2);
        assert!(e.pass());
        assert_eq!(e.nullity, Some(2));
        let a1 = ExtensionDatum::new(id(Family::A, 1), 1, ReflectionSubspace::full(1), ReflectionSubspace::multiples(1, 2), None, None).unwrap();
        let e = check_ears(&build_ars(&a1).unwrap(), 3);
        assert!(!e.report.get("null-is-short-sum").unwrap().pass);
    }

    #[test]
    fn ars_axioms_hold() {
        for ed in [affine_bc2(), ExtensionDatum::untwisted(id(Family::B, 2), 1), ExtensionDatum::trivial(id(Family::G, 2), 0)] {
            let ars = build_ars(&ed).unwrap();
            let r = ars.check_axioms(3);
            assert!(r.pass(), "{:?}", r.failures());
        }
    }

    #[test]
    fn quotient_round_trip() {
        for (ed, b) in [
            (affine_bc2(), 4),
            (ExtensionDatum::untwisted(id(Family::A, 2), 2), 2),
            (
                ExtensionDatum::new(
                    id(Family::C, 2),
                    1,
                    ReflectionSubspace::full(1),
                    ReflectionSubspace::full(1),
                    Some(ReflectionSubspace::multiples(1, 2)),
                    None,
                )
                .unwrap(),
                4,
            ),
            (ExtensionDatum::trivial(id(Family::B, 3), 0), 1),
        ] {
            let ars = build_ars(&ed).unwrap();
            let q = quotient_root_system(&ars_quotient_input(&ars, b)).unwrap();
            assert!(q.system.is_isomorphic(&ed.system));
            assert!(q.classes_consistent);
            for (c, a) in &ed.classes {
                assert_eq!(q.datum.classes[c].window_points(b), a.window_points(b), "{c:?}");
                assert!(q.datum.classes[c].set_eq(a) || b < 2);
            }
        }
    }

    fn arb_subspace(n: usize) -> impl Strategy<Value = ReflectionSubspace> {
        (1i64..4, prop::collection::vec(prop::collection::vec(-3i64..4, n), 1..3), any::<bool>()).prop_map(
            move |(k, reps, with_zero)| {
                let mut reps = reps;
                if with_zero {
                    reps.push(vec![0; n]);
                }
                ReflectionSubspace::new(Lattice::scaled_full(n, 2 * k), reps, Flavor::Plain)
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn structural_flavor_matches_brute_force(a in arb_subspace(1)) {
            let c = check_reflection_subspace(&a, 14);
            prop_assert!(c.pass, "{:?}", c.witnesses);
        }

        #[test]
        fn datum_modes_agree_rank1(sh in arb_subspace(1), dv in arb_subspace(1)) {
            let s = ReflectionSubspace { flavor: Flavor::Pointed, ..sh };
            let d = ReflectionSubspace { flavor: Flavor::Symmetric, ..dv };
            for ed in [
                ExtensionDatum::new(id(Family::A, 1), 1, ReflectionSubspace::full(1), s.clone(), None, None).unwrap(),
                ExtensionDatum::new(id(Family::A, 2), 1, ReflectionSubspace::full(1), s.clone(), None, None).unwrap(),
                ExtensionDatum::new(id(Family::BC, 1), 1, ReflectionSubspace::full(1), s.clone(), None, Some(d.clone())).unwrap(),
                ExtensionDatum::new(id(Family::B, 2), 1, ReflectionSubspace::full(1), s.clone(), Some(d.clone()), None).unwrap(),
                ExtensionDatum::new(id(Family::G, 2), 1, ReflectionSubspace::full(1), s.clone(), Some(d.clone()), None).unwrap(),
                ExtensionDatum::new(id(Family::BC, 2), 1, ReflectionSubspace::full(1), s.clone(), Some(s.clone()), Some(d.clone())).unwrap(),
            ] {
                let r = check_extension_datum(&ed, 6, DatumMode::Both).unwrap();
                prop_assert!(r.get("modes-agree").unwrap().pass, "{} {:?}", ed.system, r);
            }
        }
    }
}
