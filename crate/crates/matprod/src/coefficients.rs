//! Λ, λ and the Birkhoff contraction coefficient τ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Scalar};

/// Λ(A) = max over nonzero entries of `‖AU_j‖ / A(i,j)`; Λ(0) = 1.
pub fn lambda_big<T: Scalar>(m: &Mat<T>) -> T {
    let d = m.dim();
    let mut best: Option<T> = None;
    for j in 0..d {
        let n = m.col_norm(j);
        for i in 0..d {
            let a = m.get(i, j);
            if a.is_zero() {
                continue;
            }
            let r = n.clone() / a.magnitude();
            if best.as_ref().map_or(true, |b| r > *b) {
                best = Some(r);
            }
        }
    }
    best.unwrap_or_else(T::one)
}

/// λ(A) = max of `‖AU_{j'}‖ / A(i,j)` over `A(i,j) ≠ 0 = A(i,j')`.
/// Zero when no row mixes zero and nonzero entries (including A = 0).
pub fn lambda_coef<T: Scalar>(m: &Mat<T>) -> T {
    let d = m.dim();
    let norms: Vec<T> = (0..d).map(|j| m.col_norm(j)).collect();
    let mut best = T::zero();
    for i in 0..d {
        let zero_norm = (0..d)
            .filter(|&j| m.get(i, j).is_zero())
            .map(|j| norms[j].clone())
            .fold(None, |acc: Option<T>, x| Some(match acc {
                Some(a) if a >= x => a,
                _ => x,
            }));
        let Some(zn) = zero_norm else { continue };
        for j in 0..d {
            let a = m.get(i, j);
            if !a.is_zero() {
                let r = zn.clone() / a.magnitude();
                if r > best {
                    best = r;
                }
            }
        }
    }
    best
}

/// Birkhoff coefficient of a strictly positive matrix.
pub fn birkhoff_tau<T: Scalar>(m: &Mat<T>) -> Result<f64> {
    if !m.is_positive() {
        return Err(Error::NotPositive);
    }
    let a = m.to_float();
    let d = a.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for k in i + 1..d {
            for j in 0..d {
                for l in j + 1..d {
                    let r = a.get(i, j) * a.get(k, l) / (a.get(i, l) * a.get(k, j));
                    // (1−√r)/(1+√r) with r ↦ 1/r symmetric in absolute value
                    let s = r.sqrt();
                    worst = worst.max(((1.0 - s) / (1.0 + s)).abs());
                }
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffBounds {
    #[serde(rename = "Lambda")]
    pub big: f64,
    #[serde(rename = "lambda")]
    pub small: f64,
    pub tau: Option<f64>,
}

/// Upper bounds on Λ and λ of `M₁⋯M_n` from per-factor values.
pub fn product_bounds(per_factor: &[(f64, f64)]) -> CoeffBounds {
    if per_factor.is_empty() {
        return CoeffBounds { big: 1.0, small: 0.0, tau: None };
    }
    // Λ(M₁⋯M_n) ≤ Λ₁ + λ₁Λ₂ + λ₁λ₂Λ₃ + …
    let mut big = 0.0;
    let mut prefix = 1.0;
    for &(b, l) in per_factor {
        big += prefix * b;
        prefix *= l;
    }
    CoeffBounds { big, small: prefix, tau: None }
}

/// Cap for arbitrarily long products: Λ/(1−λ), if λ < 1.
pub fn infinite_product_cap(big: f64, lam: f64) -> Option<f64> {
    (lam < 1.0).then(|| big / (1.0 - lam))
}

/// Λ, λ, and τ (if positive) in one go, as floats.
pub fn coeff_bounds<T: Scalar>(m: &Mat<T>) -> CoeffBounds {
    CoeffBounds {
        big: lambda_big(m).to_f64(),
        small: lambda_coef(m).to_f64(),
        tau: birkhoff_tau(m).ok(),
    }
}

/// Λ and λ of `P` given column-normalized entries and per-column log norms.
/// Stays finite when the columns of `P` differ by many orders of magnitude.
pub fn coeffs_column_scaled(cols: &Mat<f64>, log_norms: &[f64]) -> (f64, f64) {
    let d = cols.dim();
    let mut big: f64 = 1.0;
    let mut small: f64 = 0.0;
    for i in 0..d {
        let zero_max = (0..d)
            .filter(|&j| *cols.get(i, j) == 0.0 && log_norms[j].is_finite())
            .map(|j| log_norms[j])
            .fold(f64::NEG_INFINITY, f64::max);
        for j in 0..d {
            let a = *cols.get(i, j);
            if a == 0.0 {
                continue;
            }
            big = big.max(1.0 / a);
            if zero_max.is_finite() {
                small = small.max((zero_max - log_norms[j]).exp() / a);
            }
        }
    }
    (big, small)
}
