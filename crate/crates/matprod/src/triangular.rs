//! Stable support patterns of tail products and the block-triangular form.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Scalar, ScaledProduct};
use crate::support::{
    conjugate, conjugate_pattern, kappa_estimate_patterns, partition_pattern, satisfies_e_pattern,
    sigma_permutation, PermSpec, SupportPattern, MIN_WINDOW,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangularConfig {
    /// Largest start index `m` tried for the κ estimate (default: a quarter of the window).
    pub m_max: Option<usize>,
    /// Recurrences of `𝓘(P_{r,n})` required inside the last quarter of the window.
    pub min_recurrences: usize,
    /// Cap on the number of raw `r_k` extracted.
    pub k_count: usize,
}

impl Default for TriangularConfig {
    fn default() -> Self {
        TriangularConfig { m_max: None, min_recurrences: 1, k_count: usize::MAX }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StablePattern {
    pub r: usize,
    pub r0: usize,
    pub pattern: Vec<(usize, usize)>,
    pub kappa: usize,
    pub stabilized: bool,
}

/// Windowed version of the induction that produces `r`, `r₀`.
pub fn find_stable_pattern_patterns(seq: &[SupportPattern], cfg: &TriangularConfig) -> Result<(StablePattern, SupportPattern)> {
    let n_max = seq.len();
    if n_max == 0 {
        return Err(Error::Unstabilized("empty sequence".into()));
    }
    let d = seq[0].dim();
    let m_max = cfg.m_max.unwrap_or(n_max / 4);
    let ke = kappa_estimate_patterns(seq, m_max, n_max);
    let (r, kappa) = (ke.r, ke.kappa);
    let tail_start = n_max - n_max / 4;

    let mut prods = Vec::with_capacity(n_max - r);
    let mut p = SupportPattern::identity(d);
    for n in r + 1..=n_max {
        p = p.mul(&seq[n - 1]);
        prods.push(p.clone());
    }
    let at = |n: usize| &prods[n - r - 1];
    let mut fallback = None;
    let mut found = None;
    for n in r + 1..=n_max {
        if at(n).h() != kappa {
            continue;
        }
        fallback.get_or_insert(n);
        let recur = (tail_start.max(n) + 1..=n_max).filter(|&n2| at(n2) == at(n)).count();
        if recur >= cfg.min_recurrences {
            found = Some(n);
            break;
        }
    }
    let stabilized = ke.stabilized && found.is_some() && n_max >= MIN_WINDOW;
    let r0 = found.or(fallback).ok_or_else(|| Error::Unstabilized("no index with H(P_{r,n}) = κ".into()))?;
    let pat = at(r0).clone();
    Ok((StablePattern { r, r0, pattern: pat.pairs(), kappa, stabilized }, pat))
}

pub fn find_stable_pattern<T: Scalar>(seq: &[Mat<T>], cfg: &TriangularConfig) -> Result<StablePattern> {
    let pats: Vec<SupportPattern> = seq.iter().map(SupportPattern::of).collect();
    find_stable_pattern_patterns(&pats, cfg).map(|x| x.0)
}

/// Pattern-level triangular form; the numeric version wraps it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternForm {
    pub stable: StablePattern,
    /// `r_0 < r_1 < …` as extracted on the window.
    pub rk_raw: Vec<usize>,
    /// The refined subsequence: `rk[i] = rk_raw[k_i]`.
    pub rk: Vec<usize>,
    pub refine_idx: Vec<usize>,
    pub s: PermSpec,
    pub cuts: Vec<usize>,
    pub tk_raw: Vec<SupportPattern>,
    pub tk: Vec<SupportPattern>,
}

fn block_of(cuts: &[usize], i: usize) -> usize {
    cuts.windows(2).position(|w| w[0] <= i && i < w[1]).expect("index within cuts")
}

/// First entry above the block diagonal, as `(row block, column block)`.
fn upper_violation(p: &SupportPattern, cuts: &[usize]) -> Option<(usize, usize)> {
    p.pairs().into_iter().map(|(i, j)| (block_of(cuts, i), block_of(cuts, j))).find(|(bi, bj)| bi < bj)
}

/// First pair of blocks where two patterns differ.
fn differing_block(a: &SupportPattern, b: &SupportPattern, cuts: &[usize]) -> (usize, usize) {
    let d = a.dim();
    for i in 0..d {
        for j in 0..d {
            if a.get(i, j) != b.get(i, j) {
                return (block_of(cuts, i), block_of(cuts, j));
            }
        }
    }
    (0, 0)
}

/// Cuts the list into consecutive groups whose products all equal one
/// idempotent pattern `e`; then every product of consecutive groups is `e`.
/// Returns group end indices into `tk` (exclusive), preceded by the start.
fn refine_idempotent(tk: &[SupportPattern]) -> Vec<usize> {
    let k = tk.len();
    if k == 0 {
        return vec![0];
    }
    let mut best: Vec<usize> = vec![0, 1];
    let starts = k.min(8);
    for k0 in 0..starts {
        let mut tried = BTreeSet::new();
        let mut prod = tk[k0].clone();
        for k1 in k0 + 1..=k {
            if k1 > k0 + 1 {
                prod = prod.mul(&tk[k1 - 1]);
            }
            if prod.mul(&prod) != prod || !tried.insert(prod.clone()) {
                continue;
            }
            let e = prod.clone();
            let mut cuts = vec![k0, k1];
            let mut acc: Option<SupportPattern> = None;
            for (idx, t) in tk.iter().enumerate().skip(k1) {
                let next = match acc.take() {
                    None => t.clone(),
                    Some(a) => a.mul(t),
                };
                if next == e {
                    cuts.push(idx + 1);
                } else {
                    acc = Some(next);
                }
            }
            if cuts.len() > best.len() {
                best = cuts;
            }
        }
    }
    best
}

pub fn triangular_form_patterns(seq: &[SupportPattern], cfg: &TriangularConfig) -> Result<PatternForm> {
    let (stable, pat_r0) = find_stable_pattern_patterns(seq, cfg)?;
    let (r, kappa) = (stable.r, stable.kappa);
    let n_max = seq.len();
    let d = pat_r0.dim();

    // r_k = min n > r_{k-1} with H(P_{r_{k-1},n}) = κ and 𝓘(P_{r,n}) = 𝓘(P_{r,r₀}).
    let mut prefix_r = vec![SupportPattern::identity(d)];
    for n in r + 1..=n_max {
        let next = prefix_r.last().unwrap().mul(&seq[n - 1]);
        prefix_r.push(next);
    }
    let p_r = |n: usize| &prefix_r[n - r];
    let mut rk_raw = vec![stable.r0];
    let mut segs = Vec::new();
    while rk_raw.len() <= cfg.k_count.min(n_max) {
        let prev = *rk_raw.last().unwrap();
        let mut q = SupportPattern::identity(d);
        let mut hit = None;
        for n in prev + 1..=n_max {
            q = q.mul(&seq[n - 1]);
            if p_r(n) == &pat_r0 && q.h() == kappa {
                hit = Some((n, q.clone()));
                break;
            }
        }
        match hit {
            Some((n, q)) => {
                rk_raw.push(n);
                segs.push(q);
            }
            None => break,
        }
    }

    let part = partition_pattern(&pat_r0);
    let s = sigma_permutation(&part);
    let cuts = part.cuts.clone();
    let tk_raw: Vec<SupportPattern> = segs.iter().map(|q| conjugate_pattern(q, &s)).collect();

    for (k, t) in tk_raw.iter().enumerate() {
        if let Some((h, l)) = upper_violation(t, &cuts) {
            return Err(Error::Verification { k: k + 1, k2: k + 1, h, l, what: "entry above block diagonal".into() });
        }
        if t.h() != kappa {
            return Err(Error::Verification { k: k + 1, k2: k + 1, h: 0, l: 0, what: format!("H(T_k) = {} ≠ κ", t.h()) });
        }
    }

    let groups = refine_idempotent(&tk_raw);
    let mut tk = Vec::new();
    for w in groups.windows(2) {
        let p = tk_raw[w[0]..w[1]].iter().skip(1).fold(tk_raw[w[0]].clone(), |a, t| a.mul(t));
        tk.push(p);
    }
    let refine_idx = groups.clone();
    let rk: Vec<usize> = if tk_raw.is_empty() { vec![stable.r0] } else { groups.iter().map(|&g| rk_raw[g]).collect() };

    let form = PatternForm { stable, rk_raw, rk, refine_idx, s, cuts, tk_raw, tk };
    verify_pattern_form(&form, seq)?;
    Ok(form)
}

/// Checks the four structural invariants of a pattern form.
pub fn verify_pattern_form(f: &PatternForm, seq: &[SupportPattern]) -> Result<()> {
    let d = f.s.sigma.len();
    let kappa = f.stable.kappa;
    if !f.s.is_bijective() || f.cuts.len() != kappa + 1 || f.cuts[kappa] != d {
        return Err(Error::Verification { k: 0, k2: 0, h: 0, l: 0, what: "malformed permutation or cuts".into() });
    }
    let r = f.stable.r;
    let mut p = SupportPattern::identity(d);
    let mut reference = None;
    let mut next = 0;
    for n in r + 1..=seq.len() {
        p = p.mul(&seq[n - 1]);
        if next < f.rk_raw.len() && f.rk_raw[next] == n {
            let first = reference.get_or_insert_with(|| p.clone());
            if *first != p {
                return Err(Error::Verification { k: next, k2: next, h: 0, l: 0, what: "𝓘(P_{r,r_k}) not constant".into() });
            }
            next += 1;
        }
    }
    for (k, t) in f.tk.iter().enumerate() {
        if let Some((h, l)) = upper_violation(t, &f.cuts) {
            return Err(Error::Verification { k: k + 1, k2: k + 1, h, l, what: "entry above block diagonal".into() });
        }
        if t.h() != kappa {
            return Err(Error::Verification { k: k + 1, k2: k + 1, h: 0, l: 0, what: format!("H(T_k) = {} ≠ κ", t.h()) });
        }
    }
    if let Some(first) = f.tk.first() {
        for k in 0..f.tk.len() {
            let mut acc = f.tk[k].clone();
            for k2 in k..f.tk.len() {
                if k2 > k {
                    acc = acc.mul(&f.tk[k2]);
                }
                if acc != *first {
                    let (h, l) = differing_block(&acc, first, &f.cuts);
                    return Err(Error::Verification { k: k + 1, k2: k2 + 1, h, l, what: "joint support not constant".into() });
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangularForm<T> {
    pub r: usize,
    pub r0: usize,
    pub rk_raw: Vec<usize>,
    pub rk: Vec<usize>,
    pub s: PermSpec,
    pub cuts: Vec<usize>,
    /// Conjugated segment products `S⁻¹P_{r_{k-1},r_k}S` on the refined indices,
    /// normalized to unit L1 norm.
    pub tk: Vec<Mat<T>>,
    pub kappa: usize,
    pub stabilized: bool,
    pub patterns: PatternForm,
}

fn normalized_product<T: Scalar>(seq: &[Mat<T>], from: usize, to: usize) -> Mat<T> {
    let d = seq[0].dim();
    let mut p = ScaledProduct::identity(d);
    for a in &seq[from..to] {
        p.mul_assign(a);
    }
    p.mat
}

/// Block-triangularization of `A_1, A_2, …` (`seq[0]` is `A_1`).
pub fn triangular_form<T: Scalar>(seq: &[Mat<T>], cfg: &TriangularConfig) -> Result<TriangularForm<T>> {
    let pats: Vec<SupportPattern> = seq.iter().map(SupportPattern::of).collect();
    let pf = triangular_form_patterns(&pats, cfg)?;
    let tk = pf.rk.windows(2).map(|w| conjugate(&normalized_product(seq, w[0], w[1]), &pf.s)).collect();
    Ok(TriangularForm {
        r: pf.stable.r,
        r0: pf.stable.r0,
        rk_raw: pf.rk_raw.clone(),
        rk: pf.rk.clone(),
        s: pf.s.clone(),
        cuts: pf.cuts.clone(),
        tk,
        kappa: pf.stable.kappa,
        stabilized: pf.stable.stabilized,
        patterns: pf,
    })
}

/// Diagonal blocks `B^{h,h}` nonnull for `h < κ`, for factors satisfying (E).
pub fn verify_diag_blocks_nonnull<T: Scalar>(tf: &TriangularForm<T>, seq: &[Mat<T>]) -> Result<bool> {
    if let Some(idx) = seq.iter().position(|a| !satisfies_e_pattern(&SupportPattern::of(a))) {
        return Err(Error::RequiresE { index: idx + 1 });
    }
    let blocks = tf.kappa.saturating_sub(1);
    let all = tf.patterns.tk_raw.iter().chain(&tf.patterns.tk);
    for t in all {
        for h in 0..blocks {
            let (lo, hi) = (tf.cuts[h], tf.cuts[h + 1]);
            let nonnull = (lo..hi).any(|i| (lo..hi).any(|j| t.get(i, j)));
            if !nonnull {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
