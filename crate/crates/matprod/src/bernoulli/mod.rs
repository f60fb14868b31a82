//! The Bernoulli convolution with parameter β, the real root of
//! `x³ = 2x² − x + 1`, as a linearly representable measure on `{0,1,2}^ℕ`.

mod constants;
pub mod words;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use constants::{LAMBDA_N0, N0, SWEEP_MAX_WORDS, SWEEP_SAMPLES, SWEEP_SEED};
pub use words::{decompose_word, format_word, parse_word, template_word, Template, WordDecomposition, W_PRIME};

use crate::coefficients::coeffs_column_scaled;
use crate::error::{Error, Result};
use crate::limit::ColumnScaled;
use crate::linalg::{vec_norm_l1, ExactMat, FloatMat, Rational, Scalar};

pub const D: usize = 7;
pub type IntMat = [[i64; D]; D];

const MSTAR: [IntMat; 3] = [
    [
        [1, 0, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0, 0],
        [0, 0, 0, 1, 1, 0, 0],
        [0, 0, 0, 0, 0, 0, 0],
        [1, 0, 0, 0, 0, 0, 1],
        [0, 0, 0, 0, 1, 0, 0],
        [0, 1, 0, 0, 0, 0, 0],
    ],
    [
        [0, 0, 1, 1, 0, 0, 0],
        [0, 0, 0, 0, 0, 1, 0],
        [0, 0, 0, 1, 1, 0, 0],
        [1, 0, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0],
    ],
    [
        [1, 0, 0, 0, 1, 0, 1],
        [0, 0, 0, 0, 0, 0, 0],
        [1, 0, 0, 0, 0, 0, 1],
        [0, 0, 0, 1, 1, 0, 0],
        [0, 0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0],
    ],
];
/// `M_a = M*_a / SCALE[a]`.
pub const SCALE: [i64; 3] = [2, 4, 16];
/// `20·C`.
pub const C20: [i64; D] = [12, 8, 13, 4, 12, 6, 4];
/// `R_a = RCOEF[a]·ᵗU_{RIDX[a]}` (0-based index), with `RCOEF = (1, 1/2, 1/8)`.
pub const RIDX: [usize; 3] = [0, 2, 4];
const RLOG2: [u32; 3] = [0, 1, 3];
/// Lengths of the three basic intervals are `β^{-COST[a]}`.
pub const COST: [u32; 3] = [1, 2, 4];

/// Limit direction of `C_{ω,n}` along `0̄`.
pub const X_ZERO: [f64; D] = [0.0, 0.2, 0.2, 0.0, 0.2, 0.2, 0.2];
/// Limit direction along `2̄`.
pub const X_TWO: [f64; D] = [1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0, 0.0];

fn q(p: i64, d: i64) -> Rational {
    Rational::from_ratio(p, d)
}

fn to_mat(m: &IntMat) -> ExactMat {
    ExactMat::from_rows(m.iter().map(|r| r.iter().map(|&x| q(x, 1)).collect()).collect()).unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoficSystem {
    pub m: [ExactMat; 3],
    pub mstar: [ExactMat; 3],
    pub c: Vec<Rational>,
    pub r: [Vec<Rational>; 3],
    pub beta: f64,
    pub ratios: [f64; 3],
}

impl Default for SoficSystem {
    fn default() -> Self {
        Self::new()
    }
}

impl SoficSystem {
    pub fn new() -> Self {
        let mstar = [to_mat(&MSTAR[0]), to_mat(&MSTAR[1]), to_mat(&MSTAR[2])];
        let m = [0, 1, 2].map(|a| mstar[a].scale(&q(1, SCALE[a])));
        let c = C20.iter().map(|&x| q(x, 20)).collect();
        let r = [0, 1, 2].map(|a| {
            let mut v = vec![q(0, 1); D];
            v[RIDX[a]] = q(1, 1 << RLOG2[a]);
            v
        });
        let beta = beta_root();
        SoficSystem { m, mstar, c, r, beta, ratios: COST.map(|c| beta.powi(-(c as i32))) }
    }

    pub fn m_float(&self) -> [FloatMat; 3] {
        [0, 1, 2].map(|a| self.m[a].to_float())
    }

    /// `M*_w` as an exact matrix.
    pub fn mstar_word(&self, w: &[u8]) -> ExactMat {
        to_mat(&mstar_int(w))
    }

    /// `M_{ω₁}⋯M_{ω_n}`.
    pub fn m_word(&self, w: &[u8]) -> ExactMat {
        w.iter().fold(ExactMat::identity(D), |acc, &a| acc.mul(&self.m[a as usize]))
    }

    pub fn sequence(&self, w: &[u8]) -> Vec<ExactMat> {
        w.iter().map(|&a| self.m[a as usize].clone()).collect()
    }

    pub fn sequence_float(&self, w: &[u8]) -> Vec<FloatMat> {
        let m = self.m_float();
        w.iter().map(|&a| m[a as usize].clone()).collect()
    }
}

pub fn int_mul(a: &IntMat, b: &IntMat) -> IntMat {
    let mut out = [[0i64; D]; D];
    for i in 0..D {
        for k in 0..D {
            if a[i][k] != 0 {
                for j in 0..D {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
    }
    out
}

pub fn int_identity() -> IntMat {
    let mut out = [[0; D]; D];
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = 1;
    }
    out
}

pub fn mstar_int(w: &[u8]) -> IntMat {
    w.iter().fold(int_identity(), |acc, &a| int_mul(&acc, &MSTAR[a as usize]))
}

pub fn mstar_apply(a: u8, x: &[i64; D]) -> [i64; D] {
    let m = &MSTAR[a as usize];
    let mut out = [0; D];
    for i in 0..D {
        out[i] = (0..D).map(|j| m[i][j] * x[j]).sum();
    }
    out
}

/// Newton iteration on `x³ − 2x² + x − 1` from 1.75.
pub fn beta_root() -> f64 {
    let mut x: f64 = 1.75;
    for _ in 0..50 {
        let f = ((x - 2.0) * x + 1.0) * x - 1.0;
        let df = (3.0 * x - 4.0) * x + 1.0;
        let step = f / df;
        x -= step;
        if step.abs() < 1e-17 {
            break;
        }
    }
    x
}

/// `ν([ω₁…ω_n]) = R_{ω₁}M_{ω₂}⋯M_{ω_n}C`, exactly.
pub fn cylinder_measure(w: &[u8]) -> Result<Rational> {
    let (&first, rest) = w.split_first().ok_or_else(|| Error::Invalid("empty cylinder".into()))?;
    let s = SoficSystem::new();
    let v = translated_vector(rest);
    let r = &s.r[first as usize];
    Ok(r.iter().zip(&v).fold(Rational::zero(), |acc, (a, b)| acc + a * b))
}

/// `M_{ω₁}⋯M_{ω_n}C`, exactly.
pub fn translated_vector(w: &[u8]) -> Vec<Rational> {
    let s = SoficSystem::new();
    let mut v = s.c.clone();
    for &a in w.iter().rev() {
        v = s.m[a as usize].mul_vec(&v);
    }
    v
}

/// A cell of a partition of `{0,1,2}^ℕ` into cylinders, with
/// `ν = num / (20·2^log2_den)` and interval length `β^{-cost}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub num: u128,
    pub log2_den: u32,
    pub len: u32,
    pub cost: u32,
}

impl Cell {
    pub fn measure(&self) -> f64 {
        self.num as f64 / (20.0 * (self.log2_den as f64).exp2())
    }

    pub fn measure_exact(&self) -> Rational {
        let den = num_bigint::BigInt::from(20) << self.log2_den as usize;
        Rational::new(num_bigint::BigInt::from(self.num), den)
    }
}

fn visit_cells(row: [u128; D], log2_den: u32, len: u32, cost: u32, stop: &impl Fn(u32, u32) -> bool, visit: &mut impl FnMut(Cell)) {
    if stop(len, cost) {
        let num = row.iter().zip(C20).map(|(r, c)| r * c as u128).sum();
        visit(Cell { num, log2_den, len, cost });
        return;
    }
    for a in 0..3 {
        let m = &MSTAR[a];
        let mut next = [0u128; D];
        for (i, &ri) in row.iter().enumerate() {
            if ri != 0 {
                for j in 0..D {
                    next[j] += ri * m[i][j] as u128;
                }
            }
        }
        visit_cells(next, log2_den + SCALE[a].trailing_zeros(), len + 1, cost + COST[a], stop, visit);
    }
}

fn first_row(a: usize) -> [u128; D] {
    let mut row = [0u128; D];
    row[RIDX[a]] = 1;
    row
}

/// Cylinders `[w]`, grown depth-first until `stop(len, cost)` holds.
/// Integer row vectors keep every measure exact.
pub fn cells(stop: impl Fn(u32, u32) -> bool + Sync) -> Vec<Cell> {
    use rayon::prelude::*;
    (0..3usize)
        .into_par_iter()
        .flat_map_iter(|a| {
            let mut out = Vec::new();
            visit_cells(first_row(a), RLOG2[a], 1, COST[a], &stop, &mut |c| out.push(c));
            out
        })
        .collect()
}

/// `Σ f(cell)` over the same cells as [`cells`], without storing them.
pub fn cell_sum(stop: impl Fn(u32, u32) -> bool + Sync, f: impl Fn(&Cell) -> f64 + Sync) -> f64 {
    use rayon::prelude::*;
    let parts: Vec<f64> = (0..3usize)
        .into_par_iter()
        .map(|a| {
            let mut acc = 0.0;
            visit_cells(first_row(a), RLOG2[a], 1, COST[a], &stop, &mut |c| acc += f(&c));
            acc
        })
        .collect();
    parts.iter().sum()
}

/// The `3^n` cylinders of generation `n`, in lexicographic order.
pub fn generation_cells(n: u32) -> Vec<Cell> {
    cells(|len, _| len >= n)
}

/// `Σ ν` over `cells`, exactly.
pub fn total_measure(cells: &[Cell]) -> Rational {
    let top = cells.iter().map(|c| c.log2_den).max().unwrap_or(0);
    let mut acc = num_bigint::BigUint::zero();
    for c in cells {
        acc += num_bigint::BigUint::from(c.num) << (top - c.log2_den) as usize;
    }
    let den = num_bigint::BigInt::from(20) << top as usize;
    Rational::new(acc.into(), den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeFlags {
    pub in_c: bool,
    pub in_c_prime: bool,
    pub in_c_double_prime: bool,
}

pub fn support_mask(x: &[i64; D]) -> u32 {
    x.iter().enumerate().filter(|(_, &v)| v != 0).fold(0, |m, (i, _)| m | 1 << i)
}

fn mask(idx: &[usize]) -> u32 {
    idx.iter().fold(0, |m, &i| m | 1 << (i - 1))
}

pub fn cone_flags(x: &[i64; D]) -> Result<ConeFlags> {
    if x.iter().any(|&v| v < 0) {
        return Err(Error::Invalid("cone membership needs a nonnegative vector".into()));
    }
    let s = support_mask(x);
    let in_c = [mask(&[1, 3, 4]), mask(&[1, 3, 5]), mask(&[1, 4, 5])].iter().any(|&t| s & t == t);
    let in_c_prime = in_c
        && [mask(&[1, 3, 4, 5]), mask(&[1, 2, 3, 4, 5]), mask(&[1, 2, 3, 5, 6]), mask(&[1, 2, 3, 5, 6, 7])].contains(&s);
    let in_c_double_prime = x.iter().all(|&v| v <= 1) && {
        let b = |i: usize| x[i - 1];
        b(1) * (1 - b(4)) * (1 - b(5)) * b(7) == 0 && (1 - b(1)) * b(4) * b(5) == 0
    };
    Ok(ConeFlags { in_c, in_c_prime, in_c_double_prime })
}

/// `M*_g^j` for `g ∈ {0, 2}` from its closed form, checked against repeated
/// multiplication. For `g = 0` the form only holds at `j = 4ℓ+1`; other `j`
/// only get the row-1 check.
pub fn mstar_power_closed_form(g: u8, j: usize) -> Result<IntMat> {
    if j == 0 {
        return Err(Error::Invalid("power must be ≥ 1".into()));
    }
    let direct = (0..j).fold(int_identity(), |acc, _| int_mul(&acc, &MSTAR[g as usize]));
    let check = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("M*_{g}^{j}: {what} disagrees with the closed form")))
        }
    };
    match g {
        0 => {
            check(direct[0] == [1, 0, 0, 0, 0, 0, 0], "row 1")?;
            if j % 4 == 1 {
                let l = (j / 4) as i64;
                let six = if l == 0 { 0 } else { 1 };
                let closed: IntMat = [
                    [1, 0, 0, 0, 0, 0, 0],
                    [l, 0, 1, 0, 0, 0, 0],
                    [l, 0, 0, 1, 1, 0, 0],
                    [0, 0, 0, 0, 0, 0, 0],
                    [l + 1, 0, 0, 0, 0, 0, 1],
                    [l, 0, 0, six, 1, 0, 0],
                    [l, 1, 0, 0, 0, 0, 0],
                ];
                check(direct == closed, "j = 4l+1 form")?;
            }
        }
        2 => {
            let j = j as i64;
            let closed: IntMat = [
                [1, 0, 0, 0, j, 0, 1],
                [0; D],
                [1, 0, 0, 0, j - 1, 0, 1],
                [0, 0, 0, 1, j, 0, 0],
                [0, 0, 0, 0, 1, 0, 0],
                [0; D],
                [0; D],
            ];
            check(direct == closed, "matrix")?;
        }
        _ => return Err(Error::Invalid(format!("no closed form for M*_{g}"))),
    }
    Ok(direct)
}

/// A point of `{0,1,2}^ℕ`: a finite prefix long enough for the requested depth,
/// or a head followed by a constant tail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Omega {
    Prefix(Vec<u8>),
    EventuallyConstant { head: Vec<u8>, tail: u8 },
}

impl Omega {
    pub fn symbol(&self, k: usize) -> Option<u8> {
        match self {
            Omega::Prefix(w) => w.get(k).copied(),
            Omega::EventuallyConstant { head, tail } => Some(head.get(k).copied().unwrap_or(*tail)),
        }
    }

    pub fn shift(&self, k: usize) -> Omega {
        match self {
            Omega::Prefix(w) => Omega::Prefix(w[k.min(w.len())..].to_vec()),
            Omega::EventuallyConstant { head, tail } => {
                Omega::EventuallyConstant { head: head[k.min(head.len())..].to_vec(), tail: *tail }
            }
        }
    }

    /// Start of a `0̄`/`2̄` tail and its direction.
    fn fixed_tail(&self) -> Option<(usize, [f64; D])> {
        match self {
            Omega::EventuallyConstant { head, tail: 0 } => Some((head.len(), X_ZERO)),
            Omega::EventuallyConstant { head, tail: 2 } => Some((head.len(), X_TWO)),
            _ => None,
        }
    }

    fn need(&self, len: usize) -> Result<()> {
        match self {
            Omega::Prefix(w) if w.len() < len => {
                Err(Error::Invalid(format!("prefix of length {} is shorter than {len}", w.len())))
            }
            _ => Ok(()),
        }
    }
}

pub fn random_omega(seed: u64, len: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(0..3u8)).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= n);
    n
}

fn apply_m(a: u8, v: &[f64; D]) -> [f64; D] {
    let m = &MSTAR[a as usize];
    let s = SCALE[a as usize] as f64;
    let mut out = [0.0; D];
    for i in 0..D {
        out[i] = (0..D).map(|j| m[i][j] as f64 * v[j]).sum::<f64>() / s;
    }
    out
}

fn c_float() -> [f64; D] {
    C20.map(|x| x as f64 / 20.0)
}

/// Backward pass: directions `v_k ≈ C_{σ^kω}` and `log‖M_{ω_{k+1}}v_{k+1}‖`
/// for `k < n`, seeded with `C` at position `n + depth` (or with the exact
/// tail direction once a `0̄`/`2̄` tail starts).
fn backward(omega: &Omega, n: usize, depth: usize) -> Result<(Vec<[f64; D]>, Vec<f64>)> {
    let end = n + depth;
    omega.need(end)?;
    let (start, mut v) = match omega.fixed_tail() {
        Some((t, x)) if t < end => (t, x),
        _ => (end, c_float()),
    };
    let mut dirs = vec![[0.0; D]; n + 1];
    let mut logs = vec![0.0; n];
    if start <= n {
        for d in dirs.iter_mut().skip(start) {
            *d = v;
        }
        for (k, l) in logs.iter_mut().enumerate().skip(start) {
            let mut w = apply_m(omega.symbol(k).unwrap(), &v);
            *l = normalize(&mut w).ln();
        }
    }
    for k in (0..start).rev() {
        let mut w = apply_m(omega.symbol(k).unwrap(), &v);
        let norm = normalize(&mut w);
        if k < n {
            logs[k] = norm.ln();
        }
        v = w;
        if k <= n {
            dirs[k] = v;
        }
    }
    Ok((dirs, logs))
}

/// `C_{ω,depth}`, switching to the closed-form tail limit when ω ends in `0̄` or `2̄`.
pub fn limit_direction(omega: &Omega, depth: usize) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(Error::Invalid("depth must be ≥ 1".into()));
    }
    let (dirs, _) = backward(omega, 0, depth)?;
    Ok(dirs[0].to_vec())
}

/// `Φ(ω) = log‖M_{ω₁}C_{σω}‖`.
pub fn potential_phi(omega: &Omega, depth: usize) -> Result<f64> {
    let (_, logs) = backward(omega, 1, depth)?;
    Ok(logs[0])
}

/// `log ν([ω₁…ω_n])` via a renormalized row vector.
pub fn log_cylinder_measure(w: &[u8]) -> Result<f64> {
    let (&first, rest) = w.split_first().ok_or_else(|| Error::Invalid("empty cylinder".into()))?;
    let mut row = [0.0; D];
    row[RIDX[first as usize]] = 1.0;
    let mut log = -(RLOG2[first as usize] as f64) * std::f64::consts::LN_2;
    for &a in rest {
        let m = &MSTAR[a as usize];
        let mut next = [0.0; D];
        for i in 0..D {
            for j in 0..D {
                next[j] += row[i] * m[i][j] as f64;
            }
        }
        log += normalize(&mut next).ln() - (SCALE[a as usize] as f64).ln();
        row = next;
    }
    let c = c_float();
    Ok(log + row.iter().zip(c).map(|(r, c)| r * c).sum::<f64>().ln())
}

/// `(1/n) log(ν([ω₁…ω_n]) / exp Σ_{k<n} Φ(σ^kω))`.
pub fn weak_gibbs_log_defect(omega: &Omega, n: usize, depth: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Invalid("n must be ≥ 1".into()));
    }
    let (_, logs) = backward(omega, n, depth)?;
    let word: Vec<u8> = (0..n).map(|k| omega.symbol(k).unwrap()).collect();
    Ok((log_cylinder_measure(&word)? - logs.iter().sum::<f64>()) / n as f64)
}

/// `(ν([ω₁…ω_n]) / exp Σ_{k<n} Φ(σ^kω))^{1/n}`.
pub fn weak_gibbs_ratio(omega: &Omega, n: usize, depth: usize) -> Result<f64> {
    weak_gibbs_log_defect(omega, n, depth).map(f64::exp)
}

/// Segmentation of the first `horizon` symbols of ω: the decomposition into
/// template words, cut after every `group` words.
pub fn word_segmentation(omega: &[u8], horizon: usize, group: usize) -> Vec<usize> {
    let d = decompose_word(&omega[..horizon.min(omega.len())]);
    d.boundaries().into_iter().step_by(group.max(1)).collect()
}

/// λ of `M*_{w₁⋯w_N}`, `N = 1..=max_words`, over two word sources: random
/// templates, and the decomposition of a random iid ω. Entry `N−1` is the
/// max over all `samples` draws of both.
pub fn lambda_sweep(seed: u64, samples: usize, max_words: usize) -> Vec<f64> {
    use rayon::prelude::*;
    let m = SoficSystem::new().m_float();
    let prefix_lambdas = |words: &[Vec<u8>]| -> Vec<f64> {
        let mut p = ColumnScaled::identity(D);
        words
            .iter()
            .map(|w| {
                for &a in w {
                    p.mul_assign(&m[a as usize]);
                }
                coeffs_column_scaled(&p.cols, &p.log_norms).1
            })
            .collect()
    };
    let per: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(s));
            let templates: Vec<Vec<u8>> = (0..max_words)
                .map(|_| {
                    Template {
                        n: (rng.gen::<f64>().ln() / 0.5f64.ln()).floor().min(5.0) as usize,
                        i: rng.gen_range(1..=19),
                        j: rng.gen_range(0..4),
                        k: rng.gen_range(0..4),
                    }
                    .word()
                })
                .collect();
            let mut len = 8 * max_words;
            let natural = loop {
                let om: Vec<u8> = (0..len).map(|_| rng.gen_range(0..3u8)).collect();
                let d = decompose_word(&om);
                if d.words.len() >= max_words {
                    break d.words[d.words.len() - max_words..].to_vec();
                }
                len *= 2;
            };
            [prefix_lambdas(&templates), prefix_lambdas(&natural)]
        })
        .collect();
    (0..max_words).map(|n| per.iter().map(|v| v[n]).fold(0.0, f64::max)).collect()
}

/// Smallest `N` with `λ_{N'} < 1` for every `N' ≥ N` in the sweep, and the
/// largest such `λ_{N'}`.
pub fn n0_from_sweep(lams: &[f64]) -> Option<(usize, f64)> {
    let mut n0 = None;
    for n in (0..lams.len()).rev() {
        if lams[n] >= 1.0 {
            break;
        }
        n0 = Some(n + 1);
    }
    n0.map(|n| (n, lams[n - 1..].iter().copied().fold(0.0, f64::max)))
}

/// `(ΣM_i)C = C` and `(ΣR_i)C = 1`.
pub fn system_invariants_hold(s: &SoficSystem) -> bool {
    let sum = s.m[0].add(&s.m[1]).add(&s.m[2]);
    let eig = sum.mul_vec(&s.c) == s.c;
    let r: Rational = (0..D).map(|i| (&s.r[0][i] + &s.r[1][i] + &s.r[2][i]) * &s.c[i]).sum();
    eig && r.is_one()
}

pub fn normalized(v: &[Rational]) -> Vec<Rational> {
    let n = vec_norm_l1(v);
    v.iter().map(|x| x / &n).collect()
}
