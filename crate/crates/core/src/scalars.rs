//! Exact arithmetic in cyclotomic fields `Q(zeta_M)`.
//!
//! A [`CycScalar`] stores its coordinates in the power basis
//! `1, zeta, ..., zeta^(phi(M)-1)` reduced modulo the `M`-th cyclotomic
//! polynomial. Operands of different conductors are lifted to the least
//! common conductor before combining. Results whose coordinates past the
//! constant term vanish are demoted to conductor 1, so rational arithmetic
//! stays cheap.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Q = BigRational;

pub const DEFAULT_MAX_CONDUCTOR: u32 = 24;

static MAX_CONDUCTOR: AtomicU32 = AtomicU32::new(DEFAULT_MAX_CONDUCTOR);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("conductor {0} does not divide the configured maximum {1}")]
    ConductorTooLarge(u32, u32),
    #[error("conductor must be positive")]
    ZeroConductor,
    #[error("malformed scalar: {0}")]
    Malformed(String),
}

/// Sets the per-run maximal conductor. Every conductor in use must divide it.
pub fn set_max_conductor(m: u32) -> Result<(), ScalarError> {
    if m == 0 {
        return Err(ScalarError::ZeroConductor);
    }
    MAX_CONDUCTOR.store(m, Ordering::SeqCst);
    Ok(())
}

pub fn max_conductor() -> u32 {
    MAX_CONDUCTOR.load(Ordering::SeqCst)
}

fn check_conductor(m: u32) -> Result<(), ScalarError> {
    let max = max_conductor();
    if m == 0 {
        Err(ScalarError::ZeroConductor)
    } else if max % m != 0 {
        Err(ScalarError::ConductorTooLarge(m, max))
    } else {
        Ok(())
    }
}

pub fn euler_phi(m: u32) -> usize {
    (1..=m).filter(|k| k.gcd(&m) == 1).count()
}

/// Per-conductor tables: the cyclotomic polynomial and `zeta^k` for `0 <= k < M`.
struct CycloData {
    phi: usize,
    powers: Vec<Vec<i64>>,
}

fn poly_div_exact(num: &[i64], den: &[i64]) -> Vec<i64> {
    // Both polynomials low-degree first; den is monic.
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    let nd = num.len() - 1;
    let mut quot = vec![0i64; nd - dd + 1];
    for k in (0..=nd - dd).rev() {
        let c = rem[k + dd];
        quot[k] = c;
        if c != 0 {
            for (j, &d) in den.iter().enumerate() {
                rem[k + j] -= c * d;
            }
        }
    }
    debug_assert!(rem.iter().all(|&r| r == 0));
    quot
}

pub fn cyclotomic_polynomial(m: u32) -> Vec<i64> {
    let mut p = vec![0i64; m as usize + 1];
    p[0] = -1;
    p[m as usize] = 1;
    for d in 1..m {
        if m % d == 0 {
            p = poly_div_exact(&p, &cyclotomic_polynomial(d));
        }
    }
    p
}

fn build_data(m: u32) -> CycloData {
    let cyc = cyclotomic_polynomial(m);
    let phi = cyc.len() - 1;
    let mut powers = Vec::with_capacity(m as usize);
    let mut cur = vec![0i64; phi];
    cur[0] = 1;
    for _ in 0..m {
        powers.push(cur.clone());
        // multiply by x and reduce with x^phi = -sum cyc[j] x^j
        let top = cur[phi - 1];
        let mut next = vec![0i64; phi];
        for j in (1..phi).rev() {
            next[j] = cur[j - 1];
        }
        for j in 0..phi {
            next[j] -= top * cyc[j];
        }
        cur = next;
    }
    CycloData { phi, powers }
}

fn data(m: u32) -> Arc<CycloData> {
    const SMALL: usize = 64;
    static FAST: [OnceLock<Arc<CycloData>>; SMALL + 1] = [const { OnceLock::new() }; SMALL + 1];
    if (m as usize) <= SMALL {
        return FAST[m as usize].get_or_init(|| Arc::new(build_data(m))).clone();
    }
    static CACHE: OnceLock<RwLock<HashMap<u32, Arc<CycloData>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(d) = cache.read().unwrap().get(&m) {
        return d.clone();
    }
    let d = Arc::new(build_data(m));
    cache.write().unwrap().insert(m, d.clone());
    d
}

/// Scaled integer coordinates in one field `Q(zeta_M)`, for hot loops that only test vanishing.
pub struct IntegerFrame {
    m: u32,
    scale: BigInt,
    data: Arc<CycloData>,
}

impl IntegerFrame {
    /// Frame over the least common conductor of `values`, scaled by the lcm of their denominators.
    pub fn for_values<'a>(values: impl IntoIterator<Item = &'a CycScalar> + Clone) -> Self {
        let m = values.clone().into_iter().fold(1u32, |a, x| a.lcm(&x.conductor));
        let mut scale = BigInt::one();
        for x in values {
            for c in x.lift(m) {
                scale = scale.lcm(c.denom());
            }
        }
        IntegerFrame { m, scale, data: data(m) }
    }

    pub fn phi(&self) -> usize {
        self.data.phi
    }

    /// `x * scale` in integer coordinates; `None` when it does not fit.
    pub fn coords(&self, x: &CycScalar) -> Option<Vec<i64>> {
        if self.m % x.conductor != 0 {
            return None;
        }
        x.lift(self.m)
            .iter()
            .map(|c| {
                let v = c * Q::from_integer(self.scale.clone());
                if v.is_integer() {
                    i64::try_from(v.to_integer()).ok()
                } else {
                    None
                }
            })
            .collect()
    }

    /// `acc += a * b`; false on overflow.
    pub fn mul_add(&self, acc: &mut [i128], a: &[i64], b: &[i64]) -> bool {
        let phi = self.data.phi;
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                if y == 0 {
                    continue;
                }
                let p = x as i128 * y as i128;
                let k = i + j;
                if k < phi {
                    match acc[k].checked_add(p) {
                        Some(v) => acc[k] = v,
                        None => return false,
                    }
                } else {
                    for (t, &c) in self.data.powers[k % self.m as usize].iter().enumerate() {
                        if c != 0 {
                            match p.checked_mul(c as i128).and_then(|q| acc[t].checked_add(q)) {
                                Some(v) => acc[t] = v,
                                None => return false,
                            }
                        }
                    }
                }
            }
        }
        true
    }
}

/// Exact element of `Q(zeta_M)`.
#[derive(Clone)]
pub struct CycScalar {
    conductor: u32,
    coeffs: Vec<Q>,
}

impl CycScalar {
    pub fn zero() -> Self {
        CycScalar { conductor: 1, coeffs: vec![Q::zero()] }
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        CycScalar { conductor: 1, coeffs: vec![Q::from_integer(BigInt::from(n))] }
    }

    pub fn from_frac(p: i64, q: i64) -> Self {
        CycScalar { conductor: 1, coeffs: vec![Q::new(BigInt::from(p), BigInt::from(q))] }
    }

    pub fn from_rational(r: Q) -> Self {
        CycScalar { conductor: 1, coeffs: vec![r] }
    }

    /// Builds a scalar from power-basis coordinates, reducing modulo `Phi_M`.
    /// Any number of coordinates is accepted; index `k` means `zeta^k`.
    pub fn from_power_coeffs(m: u32, raw: &[Q]) -> Result<Self, ScalarError> {
        check_conductor(m)?;
        let d = data(m);
        let mut coeffs = vec![Q::zero(); d.phi];
        for (k, c) in raw.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (j, &p) in d.powers[k % m as usize].iter().enumerate() {
                if p != 0 {
                    coeffs[j] += c * Q::from_integer(BigInt::from(p));
                }
            }
        }
        Ok(CycScalar { conductor: m, coeffs }.demote())
    }

    /// `zeta_M^k` for any integer `k`.
    pub fn root_of_unity(m: u32, k: i64) -> Result<Self, ScalarError> {
        check_conductor(m)?;
        let e = k.rem_euclid(m as i64) as usize;
        let d = data(m);
        let coeffs = d.powers[e].iter().map(|&c| Q::from_integer(BigInt::from(c))).collect();
        Ok(CycScalar { conductor: m, coeffs }.demote())
    }

    pub fn conductor(&self) -> u32 {
        self.conductor
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(Zero::is_zero)
    }

    /// The rational value, if this scalar lies in `Q`.
    pub fn to_rational(&self) -> Option<Q> {
        if self.coeffs[1..].iter().all(Zero::is_zero) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    /// Idempotent reduction; also demotes rational values to conductor 1.
    pub fn normalize(&self) -> Self {
        let raw = self.coeffs.clone();
        Self::from_power_coeffs(self.conductor, &raw).unwrap_or_else(|_| self.clone()).demote()
    }

    fn demote(mut self) -> Self {
        if self.conductor != 1 && self.coeffs[1..].iter().all(Zero::is_zero) {
            self.coeffs.truncate(1);
            self.conductor = 1;
        }
        self
    }

    /// Coordinates after lifting into `Q(zeta_target)`; `target` must be a multiple of the conductor.
    pub fn lifted_coeffs(&self, target: u32) -> Vec<Q> {
        assert!(target % self.conductor == 0, "cannot lift conductor {} to {target}", self.conductor);
        self.lift(target)
    }

    fn lift(&self, target: u32) -> Vec<Q> {
        if target == self.conductor {
            return self.coeffs.clone();
        }
        let step = (target / self.conductor) as usize;
        let d = data(target);
        let mut out = vec![Q::zero(); d.phi];
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (j, &p) in d.powers[(k * step) % target as usize].iter().enumerate() {
                if p != 0 {
                    out[j] += c * Q::from_integer(BigInt::from(p));
                }
            }
        }
        out
    }

    fn common(a: &Self, b: &Self) -> (u32, Vec<Q>, Vec<Q>) {
        let m = a.conductor.lcm(&b.conductor);
        (m, a.lift(m), b.lift(m))
    }

    pub fn inv(&self) -> Result<Self, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        if self.conductor == 1 {
            return Ok(CycScalar { conductor: 1, coeffs: vec![self.coeffs[0].recip()] });
        }
        // Solve (multiplication-by-self matrix) x = e_0 over Q.
        let m = self.conductor;
        let d = data(m);
        let phi = d.phi;
        let mut mat: Vec<Vec<Q>> = vec![vec![Q::zero(); phi + 1]; phi];
        for col in 0..phi {
            let mut basis = vec![Q::zero(); phi];
            basis[col] = Q::one();
            let prod = mul_raw(m, &self.coeffs, &basis);
            for row in 0..phi {
                mat[row][col] = prod[row].clone();
            }
        }
        mat[0][phi] = Q::one();
        let sol = solve_rational(mat, phi).ok_or(ScalarError::DivisionByZero)?;
        Ok(CycScalar { conductor: m, coeffs: sol }.demote())
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, ScalarError> {
        Ok(self * &other.inv()?)
    }

    pub fn pow(&self, e: i64) -> Result<Self, ScalarError> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc = CycScalar::one();
        let mut b = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &b;
            }
            b = &b * &b;
            k >>= 1;
        }
        Ok(acc)
    }

    /// Smallest conductor `d | M` with this value in `Q(zeta_d)`, in that field's coordinates.
    pub fn canonical(&self) -> Self {
        let m = self.conductor;
        for d in 1..m {
            if m % d != 0 {
                continue;
            }
            let phi_d = euler_phi(d);
            let step = (m / d) as usize;
            let dm = data(m);
            // columns: zeta_d^k lifted into Q(zeta_M)
            let phi_m = dm.phi;
            let mut mat: Vec<Vec<Q>> = vec![vec![Q::zero(); phi_d + 1]; phi_m];
            for k in 0..phi_d {
                for (j, &p) in dm.powers[(k * step) % m as usize].iter().enumerate() {
                    mat[j][k] = Q::from_integer(BigInt::from(p));
                }
            }
            for j in 0..phi_m {
                mat[j][phi_d] = self.coeffs[j].clone();
            }
            if let Some(sol) = solve_rational(mat, phi_d) {
                return CycScalar { conductor: d, coeffs: sol };
            }
        }
        self.clone()
    }
}

// Integer fast paths: `Ratio` arithmetic always reduces through a gcd.
fn qmul(a: &Q, b: &Q) -> Q {
    if a.is_integer() && b.is_integer() {
        Q::from_integer(a.numer() * b.numer())
    } else {
        a * b
    }
}

fn qadd(a: &Q, b: &Q) -> Q {
    if a.is_integer() && b.is_integer() {
        Q::from_integer(a.numer() + b.numer())
    } else {
        a + b
    }
}

fn qsub(a: &Q, b: &Q) -> Q {
    if a.is_integer() && b.is_integer() {
        Q::from_integer(a.numer() - b.numer())
    } else {
        a - b
    }
}

fn qadd_to(a: &mut Q, b: &Q) {
    if a.is_integer() && b.is_integer() {
        *a = Q::from_integer(a.numer() + b.numer());
    } else {
        *a += b;
    }
}

fn qsub_from(a: &mut Q, b: &Q) {
    if a.is_integer() && b.is_integer() {
        *a = Q::from_integer(a.numer() - b.numer());
    } else {
        *a -= b;
    }
}

fn mul_raw(m: u32, a: &[Q], b: &[Q]) -> Vec<Q> {
    let d = data(m);
    let phi = d.phi;
    let mut conv = vec![Q::zero(); 2 * phi - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if !y.is_zero() {
                let p = qmul(x, y);
                qadd_to(&mut conv[i + j], &p);
            }
        }
    }
    let mut out: Vec<Q> = conv[..phi].to_vec();
    for (k, c) in conv.iter().enumerate().skip(phi) {
        if c.is_zero() {
            continue;
        }
        for (j, &p) in d.powers[k % m as usize].iter().enumerate() {
            match p {
                0 => {}
                1 => qadd_to(&mut out[j], c),
                -1 => qsub_from(&mut out[j], c),
                _ => out[j] += c * Q::from_integer(BigInt::from(p)),
            }
        }
    }
    out
}

/// Gaussian elimination on an augmented rational system with `n` unknowns.
/// Returns one solution, or `None` when inconsistent or underdetermined.
fn solve_rational(mut mat: Vec<Vec<Q>>, n: usize) -> Option<Vec<Q>> {
    let rows = mat.len();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..rows).find(|&i| !mat[i][c].is_zero()) else { continue };
        mat.swap(r, p);
        let inv = mat[r][c].recip();
        for x in mat[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !mat[i][c].is_zero() {
                let f = mat[i][c].clone();
                for k in 0..=n {
                    let v = &mat[r][k] * &f;
                    mat[i][k] -= v;
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
    }
    if mat[r..].iter().any(|row| !row[n].is_zero()) || pivot_cols.len() < n {
        return None;
    }
    let mut sol = vec![Q::zero(); n];
    for (i, &c) in pivot_cols.iter().enumerate() {
        sol[c] = mat[i][n].clone();
    }
    Some(sol)
}

/// `zeta_M`, a primitive `M`-th root of unity.
pub fn primitive_root(m: u32) -> Result<CycScalar, ScalarError> {
    CycScalar::root_of_unity(m, 1)
}

impl PartialEq for CycScalar {
    fn eq(&self, other: &Self) -> bool {
        if self.conductor == other.conductor {
            return self.coeffs == other.coeffs;
        }
        let (_, a, b) = Self::common(self, other);
        a == b
    }
}

impl Eq for CycScalar {}

impl Default for CycScalar {
    fn default() -> Self {
        Self::zero()
    }
}

impl<'a> Add<&'a CycScalar> for &'a CycScalar {
    type Output = CycScalar;
    fn add(self, rhs: &CycScalar) -> CycScalar {
        if self.conductor == 1 && rhs.conductor == 1 {
            return CycScalar { conductor: 1, coeffs: vec![qadd(&self.coeffs[0], &rhs.coeffs[0])] };
        }
        let (m, a, b) = CycScalar::common(self, rhs);
        let coeffs = a.iter().zip(&b).map(|(x, y)| qadd(x, y)).collect();
        CycScalar { conductor: m, coeffs }.demote()
    }
}

impl<'a> Sub<&'a CycScalar> for &'a CycScalar {
    type Output = CycScalar;
    fn sub(self, rhs: &CycScalar) -> CycScalar {
        if self.conductor == 1 && rhs.conductor == 1 {
            return CycScalar { conductor: 1, coeffs: vec![qsub(&self.coeffs[0], &rhs.coeffs[0])] };
        }
        let (m, a, b) = CycScalar::common(self, rhs);
        let coeffs = a.iter().zip(&b).map(|(x, y)| qsub(x, y)).collect();
        CycScalar { conductor: m, coeffs }.demote()
    }
}

impl<'a> Mul<&'a CycScalar> for &'a CycScalar {
    type Output = CycScalar;
    fn mul(self, rhs: &CycScalar) -> CycScalar {
        if self.conductor == 1 && rhs.conductor == 1 {
            return CycScalar { conductor: 1, coeffs: vec![qmul(&self.coeffs[0], &rhs.coeffs[0])] };
        }
        if rhs.conductor == 1 {
            let c = &rhs.coeffs[0];
            let coeffs = self.coeffs.iter().map(|x| qmul(x, c)).collect();
            return CycScalar { conductor: self.conductor, coeffs }.demote();
        }
        if self.conductor == 1 {
            return rhs * self;
        }
        let (m, a, b) = CycScalar::common(self, rhs);
        CycScalar { conductor: m, coeffs: mul_raw(m, &a, &b) }.demote()
    }
}

impl Neg for &CycScalar {
    type Output = CycScalar;
    fn neg(self) -> CycScalar {
        CycScalar { conductor: self.conductor, coeffs: self.coeffs.iter().map(|x| -x).collect() }
    }
}

macro_rules! owned_binop {
    ($tr:ident, $f:ident) => {
        impl $tr<CycScalar> for CycScalar {
            type Output = CycScalar;
            fn $f(self, rhs: CycScalar) -> CycScalar {
                (&self).$f(&rhs)
            }
        }
        impl<'a> $tr<&'a CycScalar> for CycScalar {
            type Output = CycScalar;
            fn $f(self, rhs: &CycScalar) -> CycScalar {
                (&self).$f(rhs)
            }
        }
    };
}
owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);

impl Neg for CycScalar {
    type Output = CycScalar;
    fn neg(self) -> CycScalar {
        -&self
    }
}

impl CycScalar {
    fn accumulate(&mut self, rhs: &CycScalar, negate: bool) {
        if rhs.conductor == self.conductor {
            for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
                if negate {
                    qsub_from(a, b);
                } else {
                    qadd_to(a, b);
                }
            }
            if self.conductor != 1 {
                *self = std::mem::replace(self, CycScalar::zero()).demote();
            }
        } else if self.is_zero() {
            *self = if negate { -rhs } else { rhs.clone() };
        } else {
            *self = if negate { &*self - rhs } else { &*self + rhs };
        }
    }
}

impl std::ops::AddAssign<&CycScalar> for CycScalar {
    fn add_assign(&mut self, rhs: &CycScalar) {
        self.accumulate(rhs, false);
    }
}

impl std::ops::SubAssign<&CycScalar> for CycScalar {
    fn sub_assign(&mut self, rhs: &CycScalar) {
        self.accumulate(rhs, true);
    }
}

impl std::ops::AddAssign<CycScalar> for CycScalar {
    fn add_assign(&mut self, rhs: CycScalar) {
        self.accumulate(&rhs, false);
    }
}

impl std::ops::SubAssign<CycScalar> for CycScalar {
    fn sub_assign(&mut self, rhs: CycScalar) {
        self.accumulate(&rhs, true);
    }
}

impl From<i64> for CycScalar {
    fn from(n: i64) -> Self {
        CycScalar::from_int(n)
    }
}

impl From<Q> for CycScalar {
    fn from(r: Q) -> Self {
        CycScalar::from_rational(r)
    }
}

fn fmt_q(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_q(s: &str) -> Result<Q, ScalarError> {
    let s = s.trim();
    let bad = || ScalarError::Malformed(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(ScalarError::DivisionByZero);
            }
            Ok(Q::new(p, q))
        }
        None => Ok(Q::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

impl fmt::Display for CycScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.canonical();
        if c.conductor == 1 {
            return write!(f, "{}", fmt_q(&c.coeffs[0]));
        }
        let mut terms = Vec::new();
        for (k, q) in c.coeffs.iter().enumerate() {
            if q.is_zero() {
                continue;
            }
            let mon = match k {
                0 => String::new(),
                1 => format!("z{}", c.conductor),
                _ => format!("z{}^{}", c.conductor, k),
            };
            let coef = if k > 0 && q.is_one() {
                String::new()
            } else if k > 0 && (-q).is_one() {
                "-".to_string()
            } else if k > 0 {
                format!("{}*", fmt_q(q))
            } else {
                fmt_q(q)
            };
            terms.push(format!("{coef}{mon}"));
        }
        if terms.is_empty() {
            return write!(f, "0");
        }
        write!(f, "{}", terms.join(" + ").replace("+ -", "- "))
    }
}

impl fmt::Debug for CycScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Serialize, Deserialize)]
struct ScalarJson {
    conductor: u32,
    coeffs: Vec<String>,
}

impl Serialize for CycScalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let c = self.canonical();
        ScalarJson { conductor: c.conductor, coeffs: c.coeffs.iter().map(fmt_q).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CycScalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = ScalarJson::deserialize(d)?;
        CycScalar::from_json_parts(raw.conductor, &raw.coeffs).map_err(D::Error::custom)
    }
}

impl CycScalar {
    pub fn from_json_parts(conductor: u32, coeffs: &[String]) -> Result<Self, ScalarError> {
        check_conductor(conductor)?;
        let phi = euler_phi(conductor);
        if coeffs.len() != phi {
            return Err(ScalarError::Malformed(format!(
                "conductor {conductor} needs {phi} coefficients, got {}",
                coeffs.len()
            )));
        }
        let qs = coeffs.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>, _>>()?;
        CycScalar::from_power_coeffs(conductor, &qs)
    }

    /// Sign of a rational scalar; `None` for irrational values.
    pub fn rational_sign(&self) -> Option<i32> {
        self.to_rational().map(|q| if q.is_zero() { 0 } else if q.is_positive() { 1 } else { -1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn z(m: u32) -> CycScalar {
        primitive_root(m).unwrap()
    }

    #[test]
    fn cyclotomic_polys() {
        assert_eq!(cyclotomic_polynomial(1), vec![-1, 1]);
        assert_eq!(cyclotomic_polynomial(4), vec![1, 0, 1]);
        assert_eq!(cyclotomic_polynomial(12), vec![1, 0, -1, 0, 1]);
        for m in 1..=24 {
            assert_eq!(cyclotomic_polynomial(m).len() - 1, euler_phi(m));
        }
    }

    #[test]
    fn root_basics() {
        assert!(z(1).is_one());
        assert_eq!(&z(4) * &z(4), CycScalar::from_int(-1));
        assert_eq!(&z(3) + &(&z(3) * &z(3)), CycScalar::from_int(-1));
        assert_eq!(CycScalar::from_frac(1, 2) + CycScalar::from_frac(1, 3), CycScalar::from_frac(5, 6));
    }

    #[test]
    fn roots_have_exact_order() {
        for m in [1u32, 2, 3, 4, 6, 8, 12, 24] {
            let zm = z(m);
            for k in 1..m {
                assert!(!zm.pow(k as i64).unwrap().is_one(), "zeta_{m}^{k}");
            }
            assert!(zm.pow(m as i64).unwrap().is_one());
        }
    }

    #[test]
    fn conductor_must_divide_max() {
        assert!(matches!(primitive_root(5), Err(ScalarError::ConductorTooLarge(5, _))));
    }

    #[test]
    fn inverse_of_root() {
        for m in [3u32, 4, 8, 12, 24] {
            assert_eq!(z(m).inv().unwrap(), z(m).pow(m as i64 - 1).unwrap());
        }
        assert_eq!(CycScalar::zero().inv(), Err(ScalarError::DivisionByZero));
    }

    #[test]
    fn mixed_conductor_product() {
        // zeta_3 * zeta_4 = zeta_12^(4+3), reduced modulo Phi_12 = x^4 - x^2 + 1.
        let p = &z(3) * &z(4);
        assert_eq!(p.conductor(), 12);
        // x^7 = x^3 * x^4 = x^3 (x^2 - 1) = x^5 - x^3; x^5 = x^3 - x; so x^7 = -x.
        let expected = CycScalar::from_power_coeffs(12, &[Q::zero(), -Q::one()]).unwrap();
        assert_eq!(p, expected);
        assert_eq!(p, CycScalar::root_of_unity(12, 7).unwrap());
    }

    #[test]
    fn canonical_drops_conductor() {
        let a = CycScalar::root_of_unity(12, 4).unwrap();
        let c = a.canonical();
        assert_eq!(c.conductor(), 3);
        assert_eq!(c, z(3));
        let j = serde_json::to_string(&a).unwrap();
        assert_eq!(j, r#"{"conductor":3,"coeffs":["0","1"]}"#);
        let back: CycScalar = serde_json::from_str(&j).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn json_rejects_wrong_length() {
        let r: Result<CycScalar, _> = serde_json::from_str(r#"{"conductor":4,"coeffs":["1"]}"#);
        assert!(r.is_err());
    }

    fn arb_scalar() -> impl Strategy<Value = CycScalar> {
        (prop::sample::select(vec![1u32, 3, 4, 6, 8, 12]), prop::collection::vec((-5i64..6, 1i64..4), 8))
            .prop_map(|(m, cs)| {
                let qs: Vec<Q> = cs.iter().map(|&(p, q)| Q::new(p.into(), q.into())).collect();
                CycScalar::from_power_coeffs(m, &qs).unwrap()
            })
    }

    proptest! {
        #[test]
        fn field_axioms(a in arb_scalar(), b in arb_scalar(), c in arb_scalar()) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert!((&a - &a).is_zero());
            if !a.is_zero() {
                prop_assert!((&a * &a.inv().unwrap()).is_one());
            }
        }

        #[test]
        fn normalize_idempotent(a in arb_scalar()) {
            let n = a.normalize();
            let nn = n.normalize();
            prop_assert_eq!(nn.coeffs(), n.coeffs());
            prop_assert_eq!(&n, &a);
        }
    }
}
