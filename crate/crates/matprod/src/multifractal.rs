//! L^q scale spectrum of the Bernoulli measure and its Legendre transform.

use serde::{Deserialize, Serialize};

use crate::bernoulli::{beta_root, cell_sum, cells, generation_cells, total_measure, Cell};
use crate::error::{Error, Result};
use crate::linalg::Rational;

pub const MAX_GENERATION: u32 = 16;

fn check_generation(n: u32) -> Result<()> {
    if n == 0 || n > MAX_GENERATION {
        return Err(Error::Invalid(format!("generation {n} outside 1..={MAX_GENERATION}")));
    }
    Ok(())
}

fn log_sum_pow(cells: &[Cell], q: f64) -> f64 {
    let logs: Vec<f64> = cells.iter().filter(|c| c.num > 0).map(|c| q * c.measure().ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + logs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// `Σ ν(w)^q` over the `3ⁿ` cylinders of generation `n`; empty cells are
/// skipped for every `q` (they contribute nothing when `q > 0`).
pub fn partition_sum(q: f64, n: u32) -> Result<f64> {
    check_generation(n)?;
    if q == 1.0 {
        return Ok(1.0);
    }
    Ok(cell_sum(|len, _| len >= n, |c| if c.num > 0 { c.measure().powf(q) } else { 0.0 }))
}

/// Exact `Σ ν(w)^q` for integer `q`; holds all `3ⁿ` cells in memory.
pub fn partition_sum_exact(q: i32, n: u32) -> Result<Rational> {
    check_generation(n)?;
    let mut acc = Rational::from_integer(0.into());
    for c in generation_cells(n).iter().filter(|c| c.num > 0) {
        acc += num_traits::pow::Pow::pow(c.measure_exact(), q);
    }
    Ok(acc)
}

/// The stopping partition at scale `β^{-n}`: each cylinder is refined until its
/// interval has length at most `β^{-n}`.
pub fn scale_cells(n: u32) -> Vec<Cell> {
    cells(|_, cost| cost >= n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub q_grid: Vec<f64>,
    pub tau: Vec<f64>,
    pub generation: u32,
    pub count: usize,
    pub min_length: f64,
    pub max_length: f64,
}

/// `−5, −4.75, …, 5`.
pub fn default_q_grid() -> Vec<f64> {
    q_grid(-5.0, 5.0, 0.25)
}

pub fn q_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    let n = ((max - min) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| min + i as f64 * step).collect()
}

/// `τ̂(q) = log Σ ν(I)^q / Σ ν(I) log|I|` on the stopping partition at scale
/// `β^{-n}`. `τ̂(1) = 0` exactly, since the cells carry total mass 1.
pub fn tau_scale_estimate(q_grid: &[f64], n: u32) -> Result<SpectrumEstimate> {
    check_generation(n)?;
    let cs = scale_cells(n);
    let total = total_measure(&cs);
    if total != Rational::from_integer(1.into()) {
        return Err(Error::Invalid(format!("partition mass {total} ≠ 1")));
    }
    let log_beta = beta_root().ln();
    let log_scale: f64 = -cs.iter().map(|c| c.measure() * c.cost as f64).sum::<f64>() * log_beta;
    let tau = q_grid.iter().map(|&q| if q == 1.0 { 0.0 } else { log_sum_pow(&cs, q) / log_scale }).collect();
    let (lo, hi) = cs.iter().fold((u32::MAX, 0), |(lo, hi), c| (lo.min(c.cost), hi.max(c.cost)));
    Ok(SpectrumEstimate {
        q_grid: q_grid.to_vec(),
        tau,
        generation: n,
        count: cs.len(),
        min_length: (-(hi as f64) * log_beta).exp(),
        max_length: (-(lo as f64) * log_beta).exp(),
    })
}

/// Largest discrete second difference (≤ 0 for a concave sequence), scaled
/// to a second derivative. Assumes a uniform grid.
pub fn max_second_difference(q: &[f64], tau: &[f64]) -> f64 {
    (1..q.len().saturating_sub(1))
        .map(|i| {
            let h = q[i + 1] - q[i];
            (tau[i + 1] - 2.0 * tau[i] + tau[i - 1]) / (h * h)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_concave(q: &[f64], tau: &[f64]) -> bool {
    q.len() < 3 || max_second_difference(q, tau) <= 1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegendrePoint {
    pub alpha: f64,
    pub f: f64,
    /// The infimum sits on the grid boundary, or the value exceeds 1.
    pub edge: bool,
}

/// `f(α) = min_q (αq − τ(q))` over the grid.
pub fn legendre(q: &[f64], tau: &[f64], alpha_grid: &[f64]) -> Result<Vec<LegendrePoint>> {
    if q.len() != tau.len() || q.is_empty() {
        return Err(Error::Invalid("q grid and tau differ in length".into()));
    }
    if !is_concave(q, tau) {
        return Err(Error::Invalid("tau is not concave on the grid".into()));
    }
    Ok(alpha_grid
        .iter()
        .map(|&alpha| {
            let (arg, f) = q
                .iter()
                .zip(tau)
                .map(|(q, t)| alpha * q - t)
                .enumerate()
                .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
            LegendrePoint { alpha, f, edge: arg == 0 || arg == q.len() - 1 || f > 1.0 + 1e-6 }
        })
        .collect())
}

/// `points` values of α spanning the discrete slopes of τ, widened by 10%
/// of the span on each side.
pub fn alpha_grid(est: &SpectrumEstimate, points: usize) -> Vec<f64> {
    let slopes: Vec<f64> = est.q_grid.windows(2).zip(est.tau.windows(2)).map(|(q, t)| (t[1] - t[0]) / (q[1] - q[0])).collect();
    let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    if points < 2 {
        return vec![(lo + hi) / 2.0];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

pub fn spectrum_csv(est: &SpectrumEstimate, curve: &[LegendrePoint]) -> String {
    let mut out = String::from("q,tau\n");
    for (q, t) in est.q_grid.iter().zip(&est.tau) {
        out.push_str(&format!("{q},{t}\n"));
    }
    out.push_str("alpha,f\n");
    for p in curve {
        out.push_str(&format!("{},{}\n", p.alpha, p.f));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sums() {
        assert_eq!(partition_sum(1.0, 5).unwrap(), 1.0);
        assert!((partition_sum(0.0, 1).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(partition_sum_exact(2, 1).unwrap(), Rational::new(377.into(), 800.into()));
        assert_eq!(partition_sum_exact(1, 8).unwrap(), Rational::from_integer(1.into()));
        assert!(partition_sum(2.0, 17).is_err());
    }

    #[test]
    fn grid() {
        let g = default_q_grid();
        assert_eq!(g.len(), 41);
        assert_eq!((g[0], g[20], g[40]), (-5.0, 0.0, 5.0));
    }

    #[test]
    fn estimate_at_twelve() {
        let est = tau_scale_estimate(&default_q_grid(), 12).unwrap();
        assert_eq!(est.tau[24], 0.0);
        assert!(is_concave(&est.q_grid, &est.tau));
        assert!((-1.05..=-0.95).contains(&est.tau[20]), "{}", est.tau[20]);
    }

    #[test]
    fn linear_tau() {
        let q = default_q_grid();
        let tau: Vec<f64> = q.iter().map(|q| q - 1.0).collect();
        let c = legendre(&q, &tau, &[0.5, 1.0, 1.5]).unwrap();
        assert!((c[1].f - 1.0).abs() < 1e-12);
        assert!(c[0].edge && c[2].edge);
    }

    #[test]
    fn parabola_fixture() {
        let q = default_q_grid();
        let tau: Vec<f64> = q.iter().map(|q| (q - 1.0) - (q - 1.0).powi(2) / 2.0).collect();
        // the minimizer is q = 2 − α, on the grid for these α
        for alpha in [0.0, 0.5, 1.0, 1.25, 2.0, 3.5] {
            let f = legendre(&q, &tau, &[alpha]).unwrap()[0].f;
            assert!((f - (alpha - (1.0 - alpha) * (1.0 - alpha) / 2.0)).abs() < 1e-9);
        }
    }
}
