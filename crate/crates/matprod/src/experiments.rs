//! Worked examples and counterexamples, plus seeded Monte-Carlo divergence runs.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit::iterate_direction;
use crate::linalg::{svd_jacobi, ExactMat, FloatMat, Mat, Rational, Scalar};

fn rat(p: i64, q: i64) -> Rational {
    Rational::from_ratio(p, q)
}

/// `A_k = [[1/k², 1−1/k²], [1−1/k², 1/k²]]`.
pub fn bistochastic_factor(k: u64) -> ExactMat {
    let a = Rational::new(1.into(), (k * k).into());
    let b = Rational::one() - &a;
    Mat::from_rows(vec![vec![a.clone(), b.clone()], vec![b, a]]).unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BistochasticStep {
    pub n: u64,
    pub s: Rational,
    pub det: Rational,
}

impl BistochasticStep {
    /// `P_n = [[1−s_n, s_n], [s_n, 1−s_n]]`.
    pub fn matrix(&self) -> ExactMat {
        let one_minus = Rational::one() - &self.s;
        Mat::from_rows(vec![vec![one_minus.clone(), self.s.clone()], vec![self.s.clone(), one_minus]]).unwrap()
    }
}

/// `s_n = Σ_{k≤n} (1−1/k²) det P_{k−1}` and `det P_n = ∏ (2/k² − 1)`, for `n = 1..=n_max`.
pub fn bistochastic_chain(n_max: u64) -> Vec<BistochasticStep> {
    let mut out = Vec::with_capacity(n_max as usize);
    let (mut s, mut det) = (Rational::zero(), Rational::one());
    for k in 1..=n_max {
        let inv = Rational::new(1.into(), (k * k).into());
        s += (Rational::one() - &inv) * &det;
        det *= &inv * rat(2, 1) - Rational::one();
        out.push(BistochasticStep { n: k, s: s.clone(), det: det.clone() });
    }
    out
}

/// The two factors `I + E₂₁` and `I + E₃₁`.
pub fn div3x3_factors() -> [ExactMat; 2] {
    let l21 = ExactMat::from_ints(&[&[1, 0, 0], &[1, 1, 0], &[0, 0, 1]]);
    let l31 = ExactMat::from_ints(&[&[1, 0, 0], &[0, 1, 0], &[1, 0, 1]]);
    [l21, l31]
}

/// `A_n = I + E₂₁` if `4^k ≤ n < 2·4^k` for some `k`, else `I + E₃₁`.
pub fn div3x3_factor(n: u64) -> ExactMat {
    let [l21, l31] = div3x3_factors();
    let top = 63 - n.leading_zeros();
    if top % 2 == 0 {
        l21
    } else {
        l31
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Div3x3Point {
    pub k: u32,
    pub n: u64,
    pub p: ExactMat,
    /// `P_n(2,1) / P_n(3,1)`.
    pub ratio: Rational,
}

/// `P_n` at `n = 2⁰+…+2^{2k−1}` and `n = 2⁰+…+2^{2k}`, built from the
/// dyadic blocks `A^{2^j}`.
pub fn divergence_3x3(k: u32) -> Result<[Div3x3Point; 2]> {
    if k == 0 || k > 30 {
        return Err(Error::Invalid(format!("k = {k} outside 1..=30")));
    }
    let [l21, l31] = div3x3_factors();
    let mut p = ExactMat::identity(3);
    let mut points = Vec::new();
    for j in 0..=2 * k {
        let block = if j % 2 == 0 { &l21 } else { &l31 };
        p = p.mul(&block.pow(1usize << j));
        if j + 1 >= 2 * k {
            let n = (1u64 << (j + 1)) - 1;
            let ratio = p.get(1, 0) / p.get(2, 0);
            points.push(Div3x3Point { k, n, p: p.clone(), ratio });
        }
    }
    let second = points.pop().unwrap();
    let first = points.pop().unwrap();
    Ok([first, second])
}

/// `(4^k−1)/3 / (2(4^k−1)/3)` and `(4^{k+1}−1)/3 / (2(4^k−1)/3)`.
pub fn div3x3_closed_form(k: u32) -> [Rational; 2] {
    let four_k = num_bigint::BigInt::from(4).pow(k);
    let a = Rational::from_integer(&four_k - 1);
    let b = Rational::from_integer(&four_k * 4 - 1);
    [&a / (&a * rat(2, 1)), &b / (&a * rat(2, 1))]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tri2x2 {
    pub r: f64,
    pub s: f64,
    pub direction: [f64; 2],
}

/// Closed form for `A_k = [[a_k, 0], [c_k, d_k]]`: `P_n = a₁⋯a_n [[1,0],[s_n,r_n]]`.
pub fn triangular_2x2(a: &[f64], c: &[f64], d: &[f64], v: [f64; 2]) -> Result<Tri2x2> {
    if a.len() != c.len() || a.len() != d.len() {
        return Err(Error::Invalid("coefficient sequences differ in length".into()));
    }
    if a.iter().chain(c).any(|x| *x <= 0.0) || d.iter().any(|x| *x < 0.0) {
        return Err(Error::Invalid("need a_k > 0, c_k > 0, d_k ≥ 0".into()));
    }
    if v.iter().any(|x| *x < 0.0) || v == [0.0, 0.0] {
        return Err(Error::Invalid("V must be nonnegative and nonzero".into()));
    }
    let (mut r, mut s) = (1.0, 0.0);
    for k in 0..a.len() {
        s += r * c[k] / a[k];
        r *= d[k] / a[k];
    }
    let w = [v[0], s * v[0] + r * v[1]];
    let n = w[0] + w[1];
    Ok(Tri2x2 { r, s, direction: [w[0] / n, w[1] / n] })
}

/// The same direction via the generic product engine.
pub fn triangular_2x2_engine(a: &[f64], c: &[f64], d: &[f64], v: [f64; 2]) -> Result<[f64; 2]> {
    let seq: Vec<FloatMat> =
        (0..a.len()).map(|k| FloatMat::from_rows(vec![vec![a[k], 0.0], vec![c[k], d[k]]])).collect::<Result<_>>()?;
    let dir = iterate_direction(&seq, &v, seq.len())?;
    Ok([dir[0], dir[1]])
}

/// `A_n = [[1/n, 1−1/n], [1−1/n, 1/n]]` for `n = 2..=n_max`.
pub fn positive_chain(n_max: u64) -> Vec<ExactMat> {
    (2..=n_max)
        .map(|n| {
            let a = rat(1, n as i64);
            let b = Rational::one() - &a;
            Mat::from_rows(vec![vec![a.clone(), b.clone()], vec![b, a]]).unwrap()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    GaussianComplex,
    UniformPositive,
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ensemble::GaussianComplex => "gaussian-complex",
            Ensemble::UniformPositive => "uniform-positive",
        })
    }
}

impl FromStr for Ensemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-complex" => Ok(Ensemble::GaussianComplex),
            "uniform-positive" => Ok(Ensemble::UniformPositive),
            _ => Err(Error::Invalid(format!("unknown ensemble {s:?}"))),
        }
    }
}

/// Dense complex `d×d` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub d: usize,
    pub a: Vec<Complex64>,
}

impl CMat {
    pub fn identity(d: usize) -> Self {
        let mut a = vec![Complex64::zero(); d * d];
        for i in 0..d {
            a[i * d + i] = Complex64::one();
        }
        CMat { d, a }
    }

    pub fn from_real(m: &FloatMat) -> Self {
        CMat { d: m.dim(), a: m.entries().iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        let d = self.d;
        let mut a = vec![Complex64::zero(); d * d];
        for i in 0..d {
            for k in 0..d {
                let x = self.a[i * d + k];
                if x != Complex64::zero() {
                    for j in 0..d {
                        a[i * d + j] += x * rhs.a[k * d + j];
                    }
                }
            }
        }
        CMat { d, a }
    }

    /// `Σ |a_ij|`.
    pub fn norm_l1(&self) -> f64 {
        self.a.iter().map(|z| z.norm()).sum()
    }

    pub fn scaled(&self, c: f64) -> CMat {
        CMat { d: self.d, a: self.a.iter().map(|z| z * c).collect() }
    }

    pub fn dist_l1(&self, rhs: &CMat) -> f64 {
        self.a.iter().zip(&rhs.a).map(|(x, y)| (x - y).norm()).sum()
    }

    /// `[[Re, −Im], [Im, Re]]`; its singular values are those of `self`, each twice.
    pub fn real_embedding(&self) -> FloatMat {
        let d = self.d;
        let mut m = FloatMat::zeros(2 * d);
        for i in 0..d {
            for j in 0..d {
                let z = self.a[i * d + j];
                m.set(i, j, z.re);
                m.set(i, j + d, -z.im);
                m.set(i + d, j, z.im);
                m.set(i + d, j + d, z.re);
            }
        }
        m
    }

    /// `δ₂/δ₁`.
    pub fn rank1_gap(&self) -> f64 {
        let s = svd_jacobi(&self.real_embedding()).s;
        if self.d < 2 || s[0] == 0.0 {
            return 0.0;
        }
        (s[2] / s[0]).clamp(0.0, 1.0)
    }
}

pub fn random_matrix(ensemble: Ensemble, d: usize, rng: &mut ChaCha8Rng) -> CMat {
    let a = (0..d * d)
        .map(|_| match ensemble {
            Ensemble::GaussianComplex => {
                let (re, im): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
            Ensemble::UniformPositive => Complex64::new(rng.gen::<f64>(), 0.0),
        })
        .collect();
    CMat { d, a }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub n: usize,
    pub rank1_gap: f64,
    /// `‖P'_n − P'_{n−1}‖₁` with `P' = P/‖P‖₁`; 0 at `n = 1`.
    pub step_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub ensemble: Option<Ensemble>,
    pub d: usize,
    pub rows: Vec<TrialRow>,
}

impl TrialRecord {
    pub fn final_gap(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.rank1_gap)
    }

    /// Largest step distance over the last `window` steps.
    pub fn tail_max_distance(&self, window: usize) -> f64 {
        let from = self.rows.len().saturating_sub(window);
        self.rows[from..].iter().map(|r| r.step_distance).fold(0.0, f64::max)
    }
}

/// Tracks `P'_n` along a given chain.
pub fn track_chain(seed: u64, ensemble: Option<Ensemble>, seq: &[CMat]) -> Result<TrialRecord> {
    let d = seq.first().ok_or_else(|| Error::Invalid("empty chain".into()))?.d;
    let mut p = CMat::identity(d);
    let mut prev: Option<CMat> = None;
    let mut rows = Vec::with_capacity(seq.len());
    for (n, a) in seq.iter().enumerate() {
        p = p.mul(a);
        let norm = p.norm_l1();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Annihilated { step: n + 1 });
        }
        p = p.scaled(1.0 / norm);
        let step_distance = prev.as_ref().map_or(0.0, |q| q.dist_l1(&p));
        rows.push(TrialRow { n: n + 1, rank1_gap: p.rank1_gap(), step_distance });
        prev = Some(p.clone());
    }
    Ok(TrialRecord { seed, ensemble, d, rows })
}

/// One seeded run of `n` iid factors from `ensemble`.
pub fn random_divergence_trial(ensemble: Ensemble, d: usize, n: usize, seed: u64) -> Result<TrialRecord> {
    if d == 0 || d > 8 {
        return Err(Error::Invalid(format!("d = {d} outside 1..=8")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seq: Vec<CMat> = (0..n).map(|_| random_matrix(ensemble, d, &mut rng)).collect();
    track_chain(seed, Some(ensemble), &seq)
}

/// Worker pool sized by `MATPROD_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("MATPROD_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Invalid(format!("thread pool: {e}")))
}

/// Trials for seeds `first..first+count`, in seed order. A trial that hits an
/// exact annihilation is rerun with seed `s + 2³²`.
pub fn monte_carlo(ensemble: Ensemble, d: usize, n: usize, first: u64, count: u64) -> Result<Vec<TrialRecord>> {
    use rayon::prelude::*;
    thread_pool()?.install(|| {
        (first..first + count)
            .into_par_iter()
            .map(|s| match random_divergence_trial(ensemble, d, n, s) {
                Err(Error::Annihilated { .. }) => random_divergence_trial(ensemble, d, n, s.wrapping_add(1 << 32)),
                r => r,
            })
            .collect()
    })
}

pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("seed,ensemble,d,n,rank1_gap,step_distance\n");
    for r in records {
        let ens = r.ensemble.map_or("deterministic".to_string(), |e| e.to_string());
        for row in &r.rows {
            out.push_str(&format!("{},{ens},{},{},{:e},{:e}\n", r.seed, r.d, row.n, row.rank1_gap, row.step_distance));
        }
    }
    out
}

/// Float copies of an exact sequence, for the shared engine.
pub fn to_float_seq<T: Scalar>(seq: &[Mat<T>]) -> Vec<FloatMat> {
    seq.iter().map(|m| m.to_float()).collect()
}
