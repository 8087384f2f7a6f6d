//! Finite root systems, always containing 0, in standard epsilon coordinates.
//!
//! Families E and F have half-integral roots in the usual embedding; they are
//! stored with every coordinate doubled so all vectors stay integral. Pairings
//! and reflections do not see the scale.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Root = Vec<i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    BC,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RootSystemId {
    pub family: Family,
    pub rank: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RootError {
    #[error("unsupported root system {0:?} of rank {1}")]
    InvalidId(Family, usize),
    #[error("reflection in the zero vector")]
    ZeroRoot,
}

impl RootSystemId {
    pub fn new(family: Family, rank: usize) -> Result<Self, RootError> {
        let ok = match family {
            Family::A | Family::B | Family::C | Family::BC => rank >= 1,
            Family::D => rank >= 4,
            Family::E => (6..=8).contains(&rank),
            Family::F => rank == 4,
            Family::G => rank == 2,
        };
        if ok {
            Ok(RootSystemId { family, rank })
        } else {
            Err(RootError::InvalidId(family, rank))
        }
    }

    pub fn is_reduced(&self) -> bool {
        self.family != Family::BC
    }

    /// Identity up to the low-rank coincidences A1 = B1 = C1 and B2 = C2.
    pub fn canonical(&self) -> RootSystemId {
        match (self.family, self.rank) {
            (Family::B | Family::C, 1) => RootSystemId { family: Family::A, rank: 1 },
            (Family::B, 2) => RootSystemId { family: Family::C, rank: 2 },
            _ => *self,
        }
    }

    pub fn is_isomorphic(&self, other: &RootSystemId) -> bool {
        self.canonical() == other.canonical()
    }

    /// Every supported id with rank at most `max_rank`.
    pub fn catalog(max_rank: usize) -> Vec<RootSystemId> {
        let mut out = Vec::new();
        for r in 1..=max_rank {
            for f in [Family::A, Family::B, Family::C, Family::D, Family::E, Family::F, Family::G, Family::BC] {
                if let Ok(id) = RootSystemId::new(f, r) {
                    out.push(id);
                }
            }
        }
        out
    }
}

impl fmt::Display for RootSystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.family, self.rank)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthClass {
    Zero,
    Short,
    Long,
    Divisible,
}

fn dot(x: &[i64], y: &[i64]) -> i64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn unit(n: usize, i: usize, k: i64) -> Root {
    let mut v = vec![0; n];
    v[i] = k;
    v
}

fn pm_pairs(n: usize, scale: i64, out: &mut BTreeSet<Root>) {
    for i in 0..n {
        for j in i + 1..n {
            for si in [-1, 1] {
                for sj in [-1, 1] {
                    let mut v = vec![0; n];
                    v[i] = si * scale;
                    v[j] = sj * scale;
                    out.insert(v);
                }
            }
        }
    }
}

fn e8_doubled() -> BTreeSet<Root> {
    let mut s = BTreeSet::new();
    pm_pairs(8, 2, &mut s);
    for mask in 0u32..256 {
        if mask.count_ones() % 2 == 0 {
            s.insert((0..8).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect());
        }
    }
    s
}

fn raw_roots(id: RootSystemId) -> (usize, BTreeSet<Root>) {
    let l = id.rank;
    let mut s = BTreeSet::new();
    let dim = match id.family {
        Family::A => {
            for i in 0..=l {
                for j in 0..=l {
                    if i != j {
                        let mut v = vec![0; l + 1];
                        v[i] = 1;
                        v[j] = -1;
                        s.insert(v);
                    }
                }
            }
            l + 1
        }
        Family::B | Family::C | Family::BC | Family::D => {
            pm_pairs(l, 1, &mut s);
            for i in 0..l {
                for k in [-1, 1] {
                    if matches!(id.family, Family::B | Family::BC) {
                        s.insert(unit(l, i, k));
                    }
                    if matches!(id.family, Family::C | Family::BC) {
                        s.insert(unit(l, i, 2 * k));
                    }
                }
            }
            l
        }
        Family::G => {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        let mut v = vec![0; 3];
                        v[i] = 1;
                        v[j] = -1;
                        s.insert(v);
                        let mut w = vec![-1; 3];
                        w[i] = 2;
                        s.insert(w.clone());
                        s.insert(w.iter().map(|x| -x).collect());
                    }
                }
            }
            3
        }
        Family::F => {
            pm_pairs(4, 2, &mut s);
            for i in 0..4 {
                s.insert(unit(4, i, 2));
                s.insert(unit(4, i, -2));
            }
            for mask in 0u32..16 {
                s.insert((0..4).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect());
            }
            4
        }
        Family::E => {
            let e8 = e8_doubled();
            let beta: Root = vec![0, 0, 0, 0, 0, 0, 2, 2];
            let gamma: Root = vec![0, 0, 0, 0, 0, 2, -2, 0];
            let keep: Vec<Root> = match l {
                8 => vec![],
                7 => vec![beta],
                _ => vec![beta, gamma],
            };
            for r in e8 {
                if keep.iter().all(|k| dot(k, &r) == 0) {
                    s.insert(r);
                }
            }
            8
        }
    };
    (dim, s)
}

/// A finite root system: the catalog realization of an id, or a raw finite set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RootSystem {
    pub id: Option<RootSystemId>,
    pub dim: usize,
    /// Sorted, includes 0.
    pub roots: Vec<Root>,
    #[serde(skip)]
    set: HashSet<Root>,
    #[serde(skip)]
    component_of: Vec<usize>,
    #[serde(skip)]
    component_min: Vec<i64>,
}

pub fn enumerate_roots(id: RootSystemId) -> Vec<Root> {
    RootSystem::new(id).roots
}

impl RootSystem {
    pub fn new(id: RootSystemId) -> Self {
        let (dim, s) = raw_roots(id);
        let mut rs = Self::from_raw(dim, s.into_iter().collect());
        rs.id = Some(id);
        rs
    }

    /// Any finite set of integer vectors; 0 is added if absent.
    pub fn from_raw(dim: usize, roots: Vec<Root>) -> Self {
        let mut all: BTreeSet<Root> = roots.into_iter().collect();
        all.insert(vec![0; dim]);
        let roots: Vec<Root> = all.into_iter().collect();
        let set: HashSet<Root> = roots.iter().cloned().collect();
        let mut rs = RootSystem { id: None, dim, roots, set, component_of: Vec::new(), component_min: Vec::new() };
        rs.compute_components();
        rs
    }

    fn compute_components(&mut self) {
        let n = self.roots.len();
        let mut comp = vec![usize::MAX; n];
        let mut mins = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX || self.roots[start].iter().all(|&x| x == 0) {
                continue;
            }
            let c = mins.len();
            let mut min = i64::MAX;
            let mut stack = vec![start];
            comp[start] = c;
            while let Some(i) = stack.pop() {
                min = min.min(dot(&self.roots[i], &self.roots[i]));
                for j in 0..n {
                    if comp[j] == usize::MAX
                        && self.roots[j].iter().any(|&x| x != 0)
                        && dot(&self.roots[i], &self.roots[j]) != 0
                    {
                        comp[j] = c;
                        stack.push(j);
                    }
                }
            }
            mins.push(min);
        }
        self.component_of = comp;
        self.component_min = mins;
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        self.set.contains(v)
    }

    pub fn zero(&self) -> Root {
        vec![0; self.dim]
    }

    pub fn nonzero(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| r.iter().any(|&x| x != 0))
    }

    fn index_of(&self, r: &[i64]) -> Option<usize> {
        self.roots.binary_search_by(|x| x.as_slice().cmp(r)).ok()
    }

    /// Normalized squared length in `{2, 4, 6, 8}`, or 0 for the zero root.
    pub fn length_value(&self, r: &[i64]) -> i64 {
        let Some(i) = self.index_of(r) else { panic!("not a root: {r:?}") };
        if self.component_of[i] == usize::MAX {
            return 0;
        }
        2 * dot(r, r) / self.component_min[self.component_of[i]]
    }

    /// `(x|y)_u` for the normalized form, relative to the component of `scale_root`
    /// (the whole system when irreducible).
    pub fn form_u(&self, x: &[i64], y: &[i64]) -> Rational64 {
        let min = self.component_min.first().copied().unwrap_or(1);
        Rational64::new(2 * dot(x, y), min)
    }

    pub fn length_class(&self, r: &[i64]) -> LengthClass {
        match self.length_value(r) {
            0 => LengthClass::Zero,
            2 => LengthClass::Short,
            4 | 6 => LengthClass::Long,
            8 => LengthClass::Divisible,
            v => panic!("unexpected normalized length {v}"),
        }
    }

    /// Roots grouped by class.
    pub fn length_classes(&self) -> Vec<(LengthClass, Vec<Root>)> {
        let mut out: Vec<(LengthClass, Vec<Root>)> = Vec::new();
        for c in [LengthClass::Zero, LengthClass::Short, LengthClass::Long, LengthClass::Divisible] {
            let rs: Vec<Root> = self.roots.iter().filter(|r| self.length_class(r) == c).cloned().collect();
            out.push((c, rs));
        }
        out
    }

    pub fn has_class(&self, c: LengthClass) -> bool {
        self.roots.iter().any(|r| self.length_class(r) == c)
    }

    /// Indivisible roots, including 0.
    pub fn indivisible(&self) -> Vec<Root> {
        self.roots.iter().filter(|r| self.length_class(r) != LengthClass::Divisible).cloned().collect()
    }

    pub fn num_components(&self) -> usize {
        self.component_min.len()
    }

    pub fn components(&self) -> Vec<Vec<Root>> {
        let mut out = vec![Vec::new(); self.component_min.len()];
        for (i, c) in self.component_of.iter().enumerate() {
            if *c != usize::MAX {
                out[*c].push(self.roots[i].clone());
            }
        }
        out
    }

    pub fn is_irreducible(&self) -> bool {
        self.component_min.len() == 1
    }

    /// Rank of the span of the roots.
    pub fn rank(&self) -> usize {
        crate::lattice::Lattice::from_generators(self.dim, &self.roots).rank()
    }

    /// Catalog type of an irreducible raw root set, from its class counts.
    pub fn identify(&self) -> Option<RootSystemId> {
        if let Some(id) = self.id {
            return Some(id);
        }
        if !self.is_irreducible() {
            return None;
        }
        let vals: Vec<i64> = self.nonzero().map(|r| self.length_value(r)).collect();
        let count = |f: &dyn Fn(i64) -> bool| vals.iter().filter(|v| f(**v)).count();
        let long_value = vals.iter().copied().filter(|v| *v == 4 || *v == 6).max().unwrap_or(0);
        let id = identify(self.rank(), count(&|v| v == 2), count(&|v| v == 4 || v == 6), long_value, count(&|v| v == 8))?;
        // the counts must come from a genuine root system
        let closed = self.nonzero().all(|a| self.roots.iter().all(|b| self.contains(&reflect(b, a)) && pairing(b, a).is_integer()));
        closed.then_some(id)
    }

    /// Alternative invariant form `sum_a <x,a^v><y,a^v>` over nonzero roots.
    pub fn coroot_sum_form(&self, x: &[i64], y: &[i64]) -> Rational64 {
        self.nonzero().map(|a| pairing(x, a) * pairing(y, a)).sum()
    }
}

/// `<x, a^v> = 2 (x.a)/(a.a)`.
pub fn pairing(x: &[i64], a: &[i64]) -> Rational64 {
    let aa = dot(a, a);
    assert!(aa != 0, "pairing with the zero vector");
    Rational64::new(2 * dot(x, a), aa)
}

/// Integral coroot pairing; panics when not integral.
pub fn pairing_int(x: &[i64], a: &[i64]) -> i64 {
    let p = pairing(x, a);
    assert!(p.is_integer(), "non-integral pairing <{x:?}, {a:?}>");
    p.to_integer()
}

pub fn reflect(x: &[i64], a: &[i64]) -> Root {
    let k = pairing_int(x, a);
    x.iter().zip(a).map(|(xi, ai)| xi - k * ai).collect()
}

/// Pairing and reflection for a rational ambient vector.
pub fn pairing_reflect(x: &[Rational64], a: &[i64]) -> Result<(Rational64, Vec<Rational64>), RootError> {
    let aa = dot(a, a);
    if aa == 0 {
        return Err(RootError::ZeroRoot);
    }
    let xa: Rational64 = x.iter().zip(a).map(|(xi, ai)| xi * ai).sum();
    let k = xa * 2 / aa;
    let r = x.iter().zip(a).map(|(xi, ai)| xi - k * ai).collect();
    Ok((k, r))
}

/// `(d, u)` with `beta - d a, ..., beta + u a` the string through `beta`.
pub fn root_string(s: &RootSystem, beta: &[i64], a: &[i64]) -> Result<(usize, usize), RootError> {
    if a.iter().all(|&x| x == 0) {
        return Err(RootError::ZeroRoot);
    }
    let step = |k: i64| -> Root { beta.iter().zip(a).map(|(b, x)| b + k * x).collect() };
    let mut d = 0;
    while s.contains(&step(-(d as i64) - 1)) {
        d += 1;
    }
    let mut u = 0;
    while s.contains(&step(u as i64 + 1)) {
        u += 1;
    }
    Ok((d, u))
}

/// Identifies an irreducible root system from counts of nonzero roots per class.
pub fn identify(rank: usize, short: usize, long: usize, long_value: i64, div: usize) -> Option<RootSystemId> {
    let r = rank;
    let id = |f, r| RootSystemId::new(f, r).ok();
    match (long, div) {
        (0, 0) => {
            if short == r * (r + 1) {
                id(Family::A, r)
            } else if r >= 4 && short == 2 * r * (r - 1) {
                id(Family::D, r)
            } else {
                match (r, short) {
                    (6, 72) => id(Family::E, 6),
                    (7, 126) => id(Family::E, 7),
                    (8, 240) => id(Family::E, 8),
                    _ => None,
                }
            }
        }
        (_, 0) if long_value == 6 => (r == 2 && short == 6 && long == 6).then_some(RootSystemId { family: Family::G, rank: 2 }),
        (_, 0) => {
            if r == 4 && short == 24 && long == 24 {
                id(Family::F, 4)
            } else if r == 2 && short == 4 && long == 4 {
                id(Family::C, 2)
            } else if short == 2 * r && long == 2 * r * (r - 1) {
                id(Family::B, r)
            } else if long == 2 * r && short == 2 * r * (r - 1) {
                id(Family::C, r)
            } else {
                None
            }
        }
        (0, _) => (r == 1 && short == 2 && div == 2).then_some(RootSystemId { family: Family::BC, rank: 1 }),
        (_, _) => (short == 2 * r && div == 2 * r && long == 2 * r * (r - 1)).then(|| RootSystemId { family: Family::BC, rank: r }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(f: Family, r: usize) -> RootSystem {
        RootSystem::new(RootSystemId::new(f, r).unwrap())
    }

    #[test]
    fn counts() {
        assert_eq!(sys(Family::BC, 2).roots.len(), 13);
        assert_eq!(sys(Family::A, 1).roots, vec![vec![-1, 1], vec![0, 0], vec![1, -1]]);
        assert_eq!(sys(Family::G, 2).nonzero().count(), 12);
        assert_eq!(sys(Family::F, 4).nonzero().count(), 48);
        assert_eq!(sys(Family::E, 6).nonzero().count(), 72);
        assert_eq!(sys(Family::E, 7).nonzero().count(), 126);
        assert_eq!(sys(Family::E, 8).nonzero().count(), 240);
        assert_eq!(sys(Family::D, 4).nonzero().count(), 24);
        assert_eq!(sys(Family::E, 6).rank(), 6);
        assert_eq!(sys(Family::E, 7).rank(), 7);
    }

    #[test]
    fn pairing_examples() {
        let a = vec![1, -1, 0];
        let (k, r) = pairing_reflect(&[1.into(), (-1).into(), 0.into()], &a).unwrap();
        assert_eq!(k, 2.into());
        assert_eq!(r, vec![(-1).into(), 1.into(), 0.into()]);
        // BC2: x = e1, a = 2e1
        assert_eq!(pairing(&[1, 0], &[2, 0]), 1.into());
        assert_eq!(reflect(&[1, 0], &[2, 0]), vec![-1, 0]);
        assert_eq!(pairing(&[0, 1], &[2, 0]), 0.into());
        assert!(pairing_reflect(&[1.into()], &[0]).is_err());
    }

    #[test]
    fn classes() {
        let bc = sys(Family::BC, 2);
        assert_eq!(bc.length_class(&[2, 0]), LengthClass::Divisible);
        assert_eq!(bc.length_value(&[2, 0]), 8);
        assert_eq!(bc.length_class(&[1, 1]), LengthClass::Long);
        assert_eq!(bc.length_class(&[0, -1]), LengthClass::Short);
        let d4 = sys(Family::D, 4);
        assert!(d4.nonzero().all(|r| d4.length_class(r) == LengthClass::Short));
        let g2 = sys(Family::G, 2);
        assert_eq!(g2.length_value(&[2, -1, -1]), 6);
        let c2 = sys(Family::C, 2);
        assert_eq!(c2.length_class(&[2, 0]), LengthClass::Long);
    }

    #[test]
    fn strings() {
        let a1 = sys(Family::A, 1);
        assert_eq!(root_string(&a1, &[1, -1], &[1, -1]).unwrap(), (2, 0));
        let bc1 = sys(Family::BC, 1);
        assert_eq!(root_string(&bc1, &[2], &[1]).unwrap(), (4, 0));
        let b2 = sys(Family::B, 2);
        assert_eq!(root_string(&b2, &[1, 0], &[0, 1]).unwrap(), (1, 1));
    }

    #[test]
    fn irreducibility() {
        assert!(sys(Family::B, 3).is_irreducible());
        assert!(sys(Family::BC, 2).is_irreducible());
        let two = RootSystem::from_raw(2, vec![vec![1, 0], vec![-1, 0], vec![0, 1], vec![0, -1]]);
        assert!(!two.is_irreducible());
        assert_eq!(two.components().len(), 2);
    }

    #[test]
    fn identify_catalog() {
        for id in RootSystemId::catalog(8) {
            let s = RootSystem::new(id);
            let count = |c| s.roots.iter().filter(|r| s.length_class(r) == c).count();
            let lv = s.nonzero().map(|r| s.length_value(r)).filter(|v| *v == 4 || *v == 6).max().unwrap_or(0);
            let got = identify(s.rank(), count(LengthClass::Short), count(LengthClass::Long), lv, count(LengthClass::Divisible));
            assert!(got.is_some_and(|g| g.is_isomorphic(&id)), "{id} -> {got:?}");
        }
    }

    #[test]
    fn coroot_sum_form_is_proportional() {
        for id in RootSystemId::catalog(4) {
            let s = RootSystem::new(id);
            let roots: Vec<&Root> = s.nonzero().collect();
            let a = roots[0];
            let ratio = s.coroot_sum_form(a, a) / s.form_u(a, a);
            for x in &roots {
                for y in &roots {
                    assert_eq!(s.coroot_sum_form(x, y), ratio * s.form_u(x, y), "{id}");
                }
            }
        }
    }
}
