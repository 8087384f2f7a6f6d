//! Sparse exact linear algebra over [`CycScalar`].
//!
//! [`Echelon`] keeps a reduced row echelon basis that grows one row at a time,
//! which is how every span, kernel and solve in the crate is computed.

use std::collections::BTreeMap;

use crate::scalars::CycScalar;

/// Sorted `(column, value)` pairs with no zero values.
pub type SparseVec = Vec<(usize, CycScalar)>;

pub fn sparse_from_dense(v: &[CycScalar]) -> SparseVec {
    v.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, x)| (i, x.clone())).collect()
}

pub fn dense_from_sparse(v: &SparseVec, n: usize) -> Vec<CycScalar> {
    let mut out = vec![CycScalar::zero(); n];
    for (i, x) in v {
        out[*i] = x.clone();
    }
    out
}

fn axpy(acc: &mut BTreeMap<usize, CycScalar>, a: &CycScalar, v: &SparseVec) {
    for (i, x) in v {
        let t = a * x;
        match acc.get_mut(i) {
            Some(e) => {
                *e -= &t;
                if e.is_zero() {
                    acc.remove(i);
                }
            }
            None => {
                acc.insert(*i, -t);
            }
        }
    }
}

/// Reduced row echelon basis built incrementally.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    rows: BTreeMap<usize, SparseVec>,
}

impl Echelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> impl Iterator<Item = &usize> {
        self.rows.keys()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&usize, &SparseVec)> {
        self.rows.iter()
    }

    /// Subtracts the pivot rows so that no pivot column survives.
    pub fn reduce(&self, v: &SparseVec) -> SparseVec {
        let mut acc: BTreeMap<usize, CycScalar> = v.iter().cloned().collect();
        for (c, x) in v {
            if let Some(row) = self.rows.get(c) {
                axpy(&mut acc, x, row);
            }
        }
        acc.into_iter().collect()
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce(v).is_empty()
    }

    /// Adds `v` to the span. Returns the new pivot column when independent.
    pub fn insert(&mut self, v: &SparseVec) -> Option<usize> {
        let r = self.reduce(v);
        let (p, lead) = r.first()?.clone();
        let inv = lead.inv().expect("nonzero lead");
        let r: SparseVec = r.into_iter().map(|(i, x)| (i, &x * &inv)).collect();
        for row in self.rows.values_mut() {
            if let Ok(k) = row.binary_search_by_key(&p, |(i, _)| *i) {
                let f = row[k].1.clone();
                let mut acc: BTreeMap<usize, CycScalar> = row.iter().cloned().collect();
                axpy(&mut acc, &f, &r);
                *row = acc.into_iter().collect();
            }
        }
        self.rows.insert(p, r);
        Some(p)
    }

    /// Basis of `{x : row . x = 0 for every row}` in the first `nvars` columns.
    pub fn kernel(&self, nvars: usize) -> Vec<Vec<CycScalar>> {
        let mut out = Vec::new();
        for f in 0..nvars {
            if self.rows.contains_key(&f) {
                continue;
            }
            let mut x = vec![CycScalar::zero(); nvars];
            x[f] = CycScalar::one();
            for (p, row) in &self.rows {
                if *p >= nvars {
                    continue;
                }
                if let Ok(k) = row.binary_search_by_key(&f, |(i, _)| *i) {
                    x[*p] = -&row[k].1;
                }
            }
            out.push(x);
        }
        out
    }

    /// Treating column `nvars` as the right-hand side: one particular solution,
    /// or `None` when some row reduces to `0 = nonzero`.
    pub fn particular_solution(&self, nvars: usize) -> Option<Vec<CycScalar>> {
        if self.rows.contains_key(&nvars) {
            return None;
        }
        let mut x = vec![CycScalar::zero(); nvars];
        for (p, row) in &self.rows {
            if let Ok(k) = row.binary_search_by_key(&nvars, |(i, _)| *i) {
                x[*p] = row[k].1.clone();
            }
        }
        Some(x)
    }
}

pub fn rank(rows: &[Vec<CycScalar>]) -> usize {
    let mut e = Echelon::new();
    for r in rows {
        e.insert(&sparse_from_dense(r));
    }
    e.rank()
}

/// Right kernel of a dense matrix with `ncols` columns.
pub fn kernel(rows: &[Vec<CycScalar>], ncols: usize) -> Vec<Vec<CycScalar>> {
    let mut e = Echelon::new();
    for r in rows {
        e.insert(&sparse_from_dense(r));
    }
    e.kernel(ncols)
}

/// Solves `A x = b`; `None` when inconsistent.
pub fn solve(a: &[Vec<CycScalar>], b: &[CycScalar]) -> Option<Vec<CycScalar>> {
    let ncols = a.first().map_or(0, |r| r.len());
    let mut e = Echelon::new();
    for (r, bi) in a.iter().zip(b) {
        let mut v = sparse_from_dense(r);
        if !bi.is_zero() {
            v.push((ncols, bi.clone()));
        }
        e.insert(&v);
    }
    e.particular_solution(ncols)
}

/// Inverse of a square matrix, or `None` if singular.
pub fn inverse(a: &[Vec<CycScalar>]) -> Option<Vec<Vec<CycScalar>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut b = vec![CycScalar::zero(); n];
        b[j] = CycScalar::one();
        let x = solve(a, &b)?;
        cols.push(x);
    }
    if rank(a) < n {
        return None;
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

pub fn mat_vec(a: &[Vec<CycScalar>], x: &[CycScalar]) -> Vec<CycScalar> {
    a.iter()
        .map(|row| row.iter().zip(x).fold(CycScalar::zero(), |acc, (p, q)| acc + p * q))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: i64) -> CycScalar {
        CycScalar::from_int(n)
    }

    #[test]
    fn rank_and_kernel() {
        let a = vec![vec![s(1), s(2), s(3)], vec![s(2), s(4), s(6)], vec![s(0), s(1), s(1)]];
        assert_eq!(rank(&a), 2);
        let k = kernel(&a, 3);
        assert_eq!(k.len(), 1);
        for row in &a {
            let dot = row.iter().zip(&k[0]).fold(CycScalar::zero(), |acc, (p, q)| acc + p * q);
            assert!(dot.is_zero());
        }
    }

    #[test]
    fn solve_and_inconsistent() {
        let a = vec![vec![s(1), s(1)], vec![s(1), s(-1)]];
        let x = solve(&a, &[s(3), s(1)]).unwrap();
        assert_eq!(x, vec![s(2), s(1)]);
        let b = vec![vec![s(1), s(1)], vec![s(2), s(2)]];
        assert!(solve(&b, &[s(1), s(3)]).is_none());
    }

    #[test]
    fn inverse_round_trip() {
        let i = crate::scalars::primitive_root(4).unwrap();
        let a = vec![vec![s(1), i.clone()], vec![s(0), s(2)]];
        let inv = inverse(&a).unwrap();
        let prod = mat_vec(&a, &[inv[0][1].clone(), inv[1][1].clone()]);
        assert_eq!(prod, vec![s(0), s(1)]);
        assert!(inverse(&[vec![s(1), s(2)], vec![s(2), s(4)]]).is_none());
    }
}
