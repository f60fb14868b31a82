//! Small dense square matrices over an exact or floating scalar, renormalized
//! running products and a one-sided Jacobi SVD.
//!
//! Indices are 0-based throughout the crate; the printed forms used by the CLI
//! stay 0-based as well.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Largest supported dimension (support patterns are stored as `u32` masks).
pub const MAX_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Float,
}

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
{
    const BACKEND: Backend;

    fn from_ratio(p: i64, q: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Natural log of a positive value.
    fn ln(&self) -> f64;
    fn magnitude(&self) -> Self;
    /// Lossless on the float backend; binary expansion on the exact one.
    fn from_f64(x: f64) -> Self;
    /// Whether an entry counts as nonzero inside a column of L1 norm `col_norm`.
    fn is_support(&self, col_norm: &Self, d: usize) -> bool;
}

impl Scalar for f64 {
    const BACKEND: Backend = Backend::Float;

    fn from_ratio(p: i64, q: i64) -> Self {
        p as f64 / q as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn magnitude(&self) -> Self {
        self.abs()
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn is_support(&self, col_norm: &Self, d: usize) -> bool {
        // guards underflow only: genuine zeros stay exactly zero
        *self != 0.0 && self.abs() > d as f64 * 1e-13 * col_norm
    }
}

impl Scalar for Rational {
    const BACKEND: Backend = Backend::Exact;

    fn from_ratio(p: i64, q: i64) -> Self {
        Rational::new(BigInt::from(p), BigInt::from(q))
    }
    fn to_f64(&self) -> f64 {
        match ToPrimitive::to_f64(self) {
            Some(x) if x.is_finite() && (x != 0.0 || self.is_zero()) => x,
            _ => {
                let l = Scalar::ln(&self.abs());
                let s = if self.is_negative() { -1.0 } else { 1.0 };
                s * l.exp()
            }
        }
    }
    fn ln(&self) -> f64 {
        ln_bigint(self.numer()) - ln_bigint(self.denom())
    }
    fn magnitude(&self) -> Self {
        self.abs()
    }
    fn from_f64(x: f64) -> Self {
        Rational::from_float(x).expect("finite float")
    }
    fn is_support(&self, _col_norm: &Self, _d: usize) -> bool {
        !self.is_zero()
    }
}

fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).abs().ln();
    }
    let shift = bits - 64;
    let top: BigInt = x.abs() >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Dense `d × d` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    d: usize,
    data: Vec<T>,
}

pub type FloatMat = Mat<f64>;
pub type ExactMat = Mat<Rational>;

impl<T: Scalar> Mat<T> {
    pub fn zeros(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "dimension {d} out of range");
        Mat { d, data: vec![T::zero(); d * d] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.data[i * d + i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::Dimension(format!("dimension {d} not in 1..={MAX_DIM}")));
        }
        let mut data = Vec::with_capacity(d * d);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != d {
                return Err(Error::Dimension(format!("row {i} has {} entries, expected {d}", r.len())));
            }
            data.extend(r);
        }
        Ok(Mat { d, data })
    }

    /// Builds from small integers; panics on ragged input. Handy for fixtures.
    pub fn from_ints(rows: &[&[i64]]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&x| T::from_ratio(x, 1)).collect()).collect())
            .expect("square integer fixture")
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, v.clone());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.d + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.d + j] = v;
    }

    pub fn entries(&self) -> &[T] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.d).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|x| *x >= T::zero())
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|x| *x > T::zero())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.d, rhs.d, "dimension mismatch");
        let d = self.d;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = &self.data[i * d + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..d {
                    let b = &rhs.data[k * d + j];
                    if !b.is_zero() {
                        let cur = std::mem::replace(&mut out.data[i * d + j], T::zero());
                        out.data[i * d + j] = cur + a.clone() * b.clone();
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.d, rhs.d, "dimension mismatch");
        Mat { d: self.d, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() + b.clone()).collect() }
    }

    pub fn scale(&self, c: &T) -> Self {
        Mat { d: self.d, data: self.data.iter().map(|a| a.clone() * c.clone()).collect() }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.d);
        (0..self.d)
            .map(|i| (0..self.d).fold(T::zero(), |acc, k| acc + self.get(i, k).clone() * v[k].clone()))
            .collect()
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.d);
        (0..self.d)
            .map(|j| (0..self.d).fold(T::zero(), |acc, k| acc + v[k].clone() * self.get(k, j).clone()))
            .collect()
    }

    pub fn col_norm(&self, j: usize) -> T {
        (0..self.d).fold(T::zero(), |acc, i| acc + self.get(i, j).magnitude())
    }

    pub fn norm_l1(&self) -> T {
        norm_l1(self)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat { d: self.d, data: self.data.iter().map(f).collect() }
    }

    pub fn to_float(&self) -> FloatMat {
        self.map(|x| x.to_f64())
    }

    /// Entry (i,j) as a support bit per the backend's nonzero rule.
    pub fn is_support(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_support(&self.col_norm(j), self.d)
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut out = Self::identity(self.d);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                out = out.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        out
    }

    /// Left-to-right product of a nonempty list.
    pub fn product<'a>(mats: impl IntoIterator<Item = &'a Self>) -> Option<Self>
    where
        T: 'a,
    {
        let mut it = mats.into_iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, m| acc.mul(m)))
    }
}

pub fn norm_l1<T: Scalar>(m: &Mat<T>) -> T {
    m.entries().iter().fold(T::zero(), |acc, x| acc + x.magnitude())
}

pub fn vec_norm_l1<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.magnitude())
}

/// Scales each nonnull column to unit L1 norm; null columns stay zero.
pub fn normalize_columns<T: Scalar>(m: &Mat<T>) -> (Mat<T>, Vec<T>) {
    let d = m.dim();
    let scales: Vec<T> = (0..d).map(|j| m.col_norm(j)).collect();
    let mut out = m.clone();
    for (j, s) in scales.iter().enumerate() {
        if s.is_zero() {
            continue;
        }
        for i in 0..d {
            let v = out.get(i, j).clone() / s.clone();
            out.set(i, j, v);
        }
    }
    (out, scales)
}

/// Running product kept at unit L1 norm, with the removed scale tracked in logs
/// (and exactly, on the exact backend).
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledProduct<T> {
    pub mat: Mat<T>,
    pub log_scale: f64,
    /// Exact accumulated scale; only kept on the exact backend.
    pub scale: Option<T>,
    pub steps: usize,
}

impl<T: Scalar> ScaledProduct<T> {
    pub fn new(mat: Mat<T>, log_scale: f64) -> Self {
        let scale = (T::BACKEND == Backend::Exact).then(|| T::one());
        ScaledProduct { mat, log_scale, scale, steps: 0 }
    }

    pub fn identity(d: usize) -> Self {
        Self::new(Mat::identity(d), 0.0)
    }

    pub fn is_annihilated(&self) -> bool {
        self.log_scale == f64::NEG_INFINITY
    }

    pub fn multiply(&self, a: &Mat<T>) -> Self {
        let mut out = self.clone();
        out.mul_assign(a);
        out
    }

    pub fn mul_assign(&mut self, a: &Mat<T>) {
        self.steps += 1;
        if self.is_annihilated() {
            return;
        }
        let p = self.mat.mul(a);
        let n = p.norm_l1();
        if n.is_zero() {
            self.mat = p;
            self.log_scale = f64::NEG_INFINITY;
            self.scale = self.scale.take().map(|_| T::zero());
            return;
        }
        self.log_scale += n.ln();
        self.mat = p.scale(&(T::one() / n.clone()));
        if let Some(s) = self.scale.take() {
            self.scale = Some(s * n);
        }
    }

    /// The represented product, `mat · exp(log_scale)` (exact scale when known).
    pub fn value(&self) -> Mat<T> {
        match &self.scale {
            Some(s) => self.mat.scale(s),
            None => self.mat.scale(&T::from_f64(self.log_scale.exp())),
        }
    }
}

/// Singular values (descending) and the top singular triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
    pub u1: Vec<f64>,
    pub v1: Vec<f64>,
}

/// Full decomposition `M = U diag(s) Vᵀ`; columns of `u`/`v` are singular vectors.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: FloatMat,
    pub s: Vec<f64>,
    pub v: FloatMat,
}

impl Svd {
    pub fn reconstruct(&self) -> FloatMat {
        let d = self.s.len();
        let mut out = FloatMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let x: f64 = (0..d).map(|k| self.u.get(i, k) * self.s[k] * self.v.get(j, k)).sum();
                out.set(i, j, x);
            }
        }
        out
    }
}

/// One-sided (Hestenes) Jacobi: orthogonalizes the columns of `M V`, which
/// diagonalizes `MᵀM` implicitly. Fixed sweep order.
pub fn svd_jacobi(m: &FloatMat) -> Svd {
    let d = m.dim();
    let mut a = m.clone();
    let mut v = FloatMat::identity(d);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..d {
                    let (x, y) = (*a.get(i, p), *a.get(i, q));
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..d {
                    let (x, y) = (*a.get(i, p), *a.get(i, q));
                    a.set(i, p, c * x - s * y);
                    a.set(i, q, s * x + c * y);
                    let (x, y) = (*v.get(i, p), *v.get(i, q));
                    v.set(i, p, c * x - s * y);
                    v.set(i, q, s * x + c * y);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..d).map(|j| (0..d).map(|i| a.get(i, j).powi(2)).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let mut u = FloatMat::zeros(d);
    let mut vs = FloatMat::zeros(d);
    let mut s = Vec::with_capacity(d);
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        for i in 0..d {
            if norms[j] > 0.0 {
                u.set(i, k, a.get(i, j) / norms[j]);
            }
            vs.set(i, k, *v.get(i, j));
        }
    }
    Svd { u, s, v: vs }
}

pub fn svd_small<T: Scalar>(m: &Mat<T>) -> SingularSpectrum {
    let svd = svd_jacobi(&m.to_float());
    SingularSpectrum { values: svd.s.clone(), u1: svd.u.column(0), v1: svd.v.column(0) }
}

/// δ₂/δ₁; 0 for `d = 1`.
pub fn rank1_gap<T: Scalar>(m: &Mat<T>) -> Result<f64> {
    if m.is_zero() {
        return Err(Error::ZeroMatrix("undefined gap"));
    }
    Ok(gap_of(&svd_small(m).values))
}

pub(crate) fn gap_of(values: &[f64]) -> f64 {
    if values.len() < 2 || values[0] == 0.0 {
        return 0.0;
    }
    (values[1] / values[0]).clamp(0.0, 1.0)
}

/// Top singular triplet of `M/‖M‖₂`, i.e. `u₁v₁ᵀ`.
pub fn rank1_approx<T: Scalar>(m: &Mat<T>) -> Result<FloatMat> {
    if m.is_zero() {
        return Err(Error::ZeroMatrix("rank-1 approximation of the zero matrix"));
    }
    let sp = svd_small(m);
    let d = m.dim();
    let mut out = FloatMat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            out.set(i, j, sp.u1[i] * sp.v1[j]);
        }
    }
    Ok(out)
}

/// Spectral norm of a float matrix.
pub fn norm2(m: &FloatMat) -> f64 {
    svd_jacobi(m).s[0]
}

/// Exact rank test: every 2×2 minor vanishes.
pub fn rank_at_most_one<T: Scalar>(m: &Mat<T>) -> bool {
    let d = m.dim();
    for i in 0..d {
        for k in i + 1..d {
            for j in 0..d {
                for l in j + 1..d {
                    let lhs = m.get(i, j).clone() * m.get(k, l).clone();
                    let rhs = m.get(i, l).clone() * m.get(k, j).clone();
                    if lhs != rhs {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Rank by Gaussian elimination over the rationals.
pub fn rank_exact(rows: &[Vec<Rational>]) -> usize {
    let mut a: Vec<Vec<Rational>> = rows.to_vec();
    let ncols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..ncols {
        let Some(p) = (rank..a.len()).find(|&r| !a[r][c].is_zero()) else { continue };
        a.swap(rank, p);
        let pivot = a[rank][c].clone();
        for r in 0..a.len() {
            if r != rank && !a[r][c].is_zero() {
                let f = a[r][c].clone() / pivot.clone();
                for cc in c..ncols {
                    let v = a[rank][cc].clone() * f.clone();
                    a[r][cc] = a[r][cc].clone() - v;
                }
            }
        }
        rank += 1;
    }
    rank
}
