//! Sublattices of `Z^n` in Hermite normal form.

use serde::{Deserialize, Serialize};

fn ck(x: Option<i64>) -> i64 {
    x.expect("integer overflow in lattice arithmetic")
}

fn row_axpy(dst: &mut [i64], f: i64, src: &[i64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = ck(d.checked_sub(ck(f.checked_mul(*s))));
    }
}

/// Row-style Hermite normal form: nonzero rows, strictly increasing pivot
/// columns, positive pivots, entries above a pivot reduced into `[0, pivot)`.
pub fn hnf(rows: &[Vec<i64>], ncols: usize) -> Vec<Vec<i64>> {
    let mut m: Vec<Vec<i64>> = rows.iter().filter(|r| r.iter().any(|&x| x != 0)).cloned().collect();
    let mut out: Vec<Vec<i64>> = Vec::new();
    for c in 0..ncols {
        loop {
            let mut nz: Vec<usize> = (0..m.len()).filter(|&i| m[i][c] != 0).collect();
            if nz.len() <= 1 {
                break;
            }
            nz.sort_by_key(|&i| m[i][c].abs());
            let p = nz[0];
            for &i in &nz[1..] {
                let f = m[i][c] / m[p][c];
                let src = m[p].clone();
                row_axpy(&mut m[i], f, &src);
            }
        }
        if let Some(i) = (0..m.len()).find(|&i| m[i][c] != 0) {
            let mut r = m.remove(i);
            if r[c] < 0 {
                r.iter_mut().for_each(|x| *x = -*x);
            }
            for prev in out.iter_mut() {
                let f = prev[c].div_euclid(r[c]);
                if f != 0 {
                    row_axpy(prev, f, &r);
                }
            }
            out.push(r);
        }
        m.retain(|r| r.iter().any(|&x| x != 0));
    }
    out
}

fn pivot(row: &[i64]) -> usize {
    row.iter().position(|&x| x != 0).expect("hnf rows are nonzero")
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lattice {
    pub n: usize,
    pub rows: Vec<Vec<i64>>,
}

impl Lattice {
    pub fn zero(n: usize) -> Self {
        Lattice { n, rows: Vec::new() }
    }

    pub fn full(n: usize) -> Self {
        Self::scaled_full(n, 1)
    }

    /// `k Z^n`.
    pub fn scaled_full(n: usize, k: i64) -> Self {
        let gens = (0..n)
            .map(|i| {
                let mut r = vec![0; n];
                r[i] = k;
                r
            })
            .collect::<Vec<_>>();
        Self::from_generators(n, &gens)
    }

    pub fn from_generators(n: usize, gens: &[Vec<i64>]) -> Self {
        for g in gens {
            assert_eq!(g.len(), n, "generator length");
        }
        Lattice { n, rows: hnf(gens, n) }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        let mut v = v.to_vec();
        for r in &self.rows {
            let p = pivot(r);
            if v[..p].iter().any(|&x| x != 0) {
                return false;
            }
            if v[p] % r[p] != 0 {
                return false;
            }
            let f = v[p] / r[p];
            row_axpy(&mut v, f, r);
        }
        v.iter().all(|&x| x == 0)
    }

    /// Canonical representative of `v + self`.
    pub fn reduce(&self, v: &[i64]) -> Vec<i64> {
        let mut v = v.to_vec();
        for r in &self.rows {
            let p = pivot(r);
            let f = v[p].div_euclid(r[p]);
            if f != 0 {
                row_axpy(&mut v, f, r);
            }
        }
        v
    }

    pub fn join(&self, other: &Lattice) -> Lattice {
        let mut g = self.rows.clone();
        g.extend(other.rows.iter().cloned());
        Lattice::from_generators(self.n, &g)
    }

    pub fn scale(&self, k: i64) -> Lattice {
        let g: Vec<Vec<i64>> = self.rows.iter().map(|r| r.iter().map(|x| ck(x.checked_mul(k))).collect()).collect();
        Lattice::from_generators(self.n, &g)
    }

    pub fn is_sublattice_of(&self, other: &Lattice) -> bool {
        self.rows.iter().all(|r| other.contains(r))
    }

    /// Coordinates of `v` in the HNF rows, if `v` lies in the lattice.
    pub fn coordinates(&self, v: &[i64]) -> Option<Vec<i64>> {
        let mut v = v.to_vec();
        let mut out = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let p = pivot(r);
            if v[..p].iter().any(|&x| x != 0) || v[p] % r[p] != 0 {
                return None;
            }
            let f = v[p] / r[p];
            row_axpy(&mut v, f, r);
            out.push(f);
        }
        v.iter().all(|&x| x == 0).then_some(out)
    }

    /// Index in `Z^n` for full-rank lattices.
    pub fn index(&self) -> Option<i64> {
        (self.rank() == self.n).then(|| self.rows.iter().enumerate().map(|(i, r)| r[i]).product())
    }
}

/// Invariant factors of an integer matrix (Smith normal form diagonal, nonzero part).
pub fn smith_invariants(rows: &[Vec<i64>], ncols: usize) -> Vec<i64> {
    let mut m: Vec<Vec<i64>> = rows.to_vec();
    let nrows = m.len();
    let mut diag = Vec::new();
    let mut t = 0;
    while t < nrows.min(ncols) {
        // locate the smallest nonzero entry in the remaining block
        let mut best: Option<(usize, usize)> = None;
        for i in t..nrows {
            for j in t..ncols {
                if m[i][j] != 0 && best.is_none_or(|(bi, bj)| m[i][j].abs() < m[bi][bj].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        m.swap(t, bi);
        for row in m.iter_mut() {
            row.swap(t, bj);
        }
        let mut done = false;
        while !done {
            done = true;
            for i in t + 1..nrows {
                if m[i][t] != 0 {
                    let f = m[i][t] / m[t][t];
                    let src = m[t].clone();
                    row_axpy(&mut m[i], f, &src);
                    if m[i][t] != 0 {
                        m.swap(t, i);
                        done = false;
                    }
                }
            }
            for j in t + 1..ncols {
                if m[t][j] != 0 {
                    let f = m[t][j] / m[t][t];
                    for row in m.iter_mut() {
                        let v = ck(row[j].checked_sub(ck(f.checked_mul(row[t]))));
                        row[j] = v;
                    }
                    if m[t][j] != 0 {
                        for row in m.iter_mut() {
                            row.swap(t, j);
                        }
                        done = false;
                    }
                }
            }
            if done {
                // divisibility of the remaining block by the pivot
                if let Some((i, _)) = (t + 1..nrows)
                    .flat_map(|i| (t + 1..ncols).map(move |j| (i, j)))
                    .find(|&(i, j)| m[i][j] % m[t][t] != 0)
                {
                    let src = m[i].clone();
                    for (d, s) in m[t].iter_mut().zip(&src) {
                        *d = ck(d.checked_add(*s));
                    }
                    done = false;
                }
            }
        }
        diag.push(m[t][t].abs());
        t += 1;
    }
    diag
}

/// `{x in Z^n : A x = 0}` for an `m x n` integer matrix.
pub fn integer_kernel(a: &[Vec<i64>], n: usize) -> Lattice {
    let m = a.len();
    let aug: Vec<Vec<i64>> = (0..n)
        .map(|j| {
            let mut r: Vec<i64> = (0..m).map(|i| a[i][j]).collect();
            r.extend((0..n).map(|k| i64::from(k == j)));
            r
        })
        .collect();
    let h = hnf(&aug, m + n);
    let gens: Vec<Vec<i64>> = h.iter().filter(|r| r[..m].iter().all(|&x| x == 0)).map(|r| r[m..].to_vec()).collect();
    Lattice::from_generators(n, &gens)
}
