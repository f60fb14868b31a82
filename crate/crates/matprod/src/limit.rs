//! Convergence of `P_nV/‖P_nV‖` for products satisfying condition (C):
//! the condition check, class extraction, limit vectors and certificates.

use serde::{Deserialize, Serialize};

use crate::coefficients::{birkhoff_tau, coeffs_column_scaled, lambda_big};
use crate::error::{Error, Result};
use crate::linalg::{rank_exact, svd_jacobi, vec_norm_l1, FloatMat, Mat, Rational, Scalar, ScaledProduct};
use crate::support::{partition_pattern, satisfies_e_pattern, set_to_vec, vec_to_set, IndexSet, SupportPattern};
use crate::triangular::{triangular_form_patterns, TriangularConfig};

/// A product `P` stored as unit-norm columns plus per-column log norms, so that
/// columns of very different sizes stay representable.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaled {
    pub cols: FloatMat,
    pub log_norms: Vec<f64>,
}

impl ColumnScaled {
    pub fn identity(d: usize) -> Self {
        ColumnScaled { cols: FloatMat::identity(d), log_norms: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.cols.dim()
    }

    pub fn mul_assign(&mut self, a: &FloatMat) {
        let d = self.dim();
        let mut cols = FloatMat::zeros(d);
        let mut logs = vec![f64::NEG_INFINITY; d];
        for j in 0..d {
            let top = (0..d)
                .filter(|&i| *a.get(i, j) > 0.0)
                .map(|i| self.log_norms[i])
                .fold(f64::NEG_INFINITY, f64::max);
            if !top.is_finite() {
                continue;
            }
            let mut col = vec![0.0; d];
            for i in 0..d {
                let w = *a.get(i, j);
                if w > 0.0 && self.log_norms[i].is_finite() {
                    let f = w * (self.log_norms[i] - top).exp();
                    for (r, c) in col.iter_mut().enumerate() {
                        *c += f * self.cols.get(r, i);
                    }
                }
            }
            let n: f64 = col.iter().sum();
            if n > 0.0 {
                for (r, c) in col.iter().enumerate() {
                    cols.set(r, j, c / n);
                }
                logs[j] = top + n.ln();
            }
        }
        self.cols = cols;
        self.log_norms = logs;
    }

    /// `log ‖P‖₁`.
    pub fn log_total(&self) -> f64 {
        log_sum_exp(&self.log_norms)
    }

    /// Unit-norm direction of `P V` (None if annihilated).
    pub fn apply_direction(&self, v: &[f64]) -> Option<Vec<f64>> {
        let d = self.dim();
        let logs: Vec<f64> =
            (0..d).map(|j| if v[j] > 0.0 { self.log_norms[j] + v[j].ln() } else { f64::NEG_INFINITY }).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return None;
        }
        let mut out = vec![0.0; d];
        for j in 0..d {
            if logs[j].is_finite() {
                let w = (logs[j] - top).exp();
                for (i, o) in out.iter_mut().enumerate() {
                    *o += w * self.cols.get(i, j);
                }
            }
        }
        let n: f64 = out.iter().sum();
        Some(out.into_iter().map(|x| x / n).collect())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.cols.column(j)
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + xs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

pub fn dist_l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub k: usize,
    pub start: usize,
    pub end: usize,
    pub satisfies_e: bool,
    #[serde(rename = "sup_Lambda")]
    pub sup_big: f64,
    #[serde(rename = "sup_lambda")]
    pub sup_small: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCReport {
    pub segmentation: Vec<usize>,
    pub segments: Vec<SegmentInfo>,
    #[serde(rename = "Lambda_bound")]
    pub big_bound: f64,
    #[serde(rename = "lambda_bound")]
    pub small_bound: f64,
    pub holds: bool,
}

fn validate_segmentation(seg: &[usize], horizon: usize) -> Result<()> {
    if seg.len() < 2 {
        return Err(Error::Invalid("segmentation needs at least two points".into()));
    }
    if seg.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("segmentation must be strictly increasing".into()));
    }
    if seg[1] > horizon {
        return Err(Error::Invalid(format!("segmentation leaves the window (s_1 = {} > {horizon})", seg[1])));
    }
    Ok(())
}

/// Condition (C) along `seg` on the window `A_1..A_N` (`N = seq.len()`). The
/// sups for segment `k` run over `n ∈ [s_k, s_{k+1})`, clipped to the window.
pub fn check_condition_c<T: Scalar>(seq: &[Mat<T>], seg: &[usize]) -> Result<ConditionCReport> {
    let horizon = seq.len();
    validate_segmentation(seg, horizon)?;
    let floats: Vec<FloatMat> = seq.iter().map(|a| a.to_float()).collect();
    let pats: Vec<SupportPattern> = seq.iter().map(SupportPattern::of).collect();
    let d = seq[0].dim();
    let mut segments = Vec::new();
    for k in 1..seg.len() {
        let (start, end) = (seg[k - 1], seg[k]);
        if end > horizon {
            break;
        }
        let stop = seg.get(k + 1).map_or(horizon, |&s| (s - 1).min(horizon));
        let mut p = ColumnScaled::identity(d);
        let mut pat = SupportPattern::identity(d);
        let (mut sup_big, mut sup_small) = (1.0f64, 0.0f64);
        let mut e = true;
        for n in start + 1..=stop {
            p.mul_assign(&floats[n - 1]);
            pat = pat.mul(&pats[n - 1]);
            if n == end {
                e = satisfies_e_pattern(&pat);
            }
            if n >= end {
                let (b, s) = if T::BACKEND == crate::linalg::Backend::Exact && n - start <= 40 {
                    exact_coeffs(&seq[start..n])
                } else {
                    coeffs_column_scaled(&p.cols, &p.log_norms)
                };
                sup_big = sup_big.max(b);
                sup_small = sup_small.max(s);
            }
        }
        segments.push(SegmentInfo { k, start, end, satisfies_e: e, sup_big, sup_small });
    }
    let big_bound = segments.iter().map(|s| s.sup_big).fold(1.0, f64::max);
    let small_bound = segments.iter().map(|s| s.sup_small).fold(0.0, f64::max);
    let holds = !segments.is_empty() && segments.iter().all(|s| s.satisfies_e) && small_bound < 1.0;
    Ok(ConditionCReport { segmentation: seg.to_vec(), segments, big_bound, small_bound, holds })
}

fn exact_coeffs<T: Scalar>(factors: &[Mat<T>]) -> (f64, f64) {
    let p = Mat::product(factors).expect("nonempty segment");
    (lambda_big(&p).to_f64(), crate::coefficients::lambda_coef(&p).to_f64())
}

/// `P_nV/‖P_nV‖₁` for `n = 1..=N`, via a renormalized running product.
pub fn direction_series<T: Scalar>(seq: &[Mat<T>], v: &[T]) -> Result<Vec<Vec<T>>> {
    let d = v.len();
    if v.iter().any(|x| *x < T::zero()) || v.iter().all(|x| x.is_zero()) {
        return Err(Error::Invalid("V must be nonnegative and nonzero".into()));
    }
    let mut p = ScaledProduct::identity(d);
    let mut out = Vec::with_capacity(seq.len());
    for (n, a) in seq.iter().enumerate() {
        p.mul_assign(a);
        let w = p.mat.mul_vec(v);
        let norm = vec_norm_l1(&w);
        if p.is_annihilated() || norm.is_zero() {
            return Err(Error::Annihilated { step: n + 1 });
        }
        out.push(w.into_iter().map(|x| x / norm.clone()).collect());
    }
    Ok(out)
}

pub fn iterate_direction<T: Scalar>(seq: &[Mat<T>], v: &[T], n: usize) -> Result<Vec<T>> {
    if n == 0 || n > seq.len() {
        return Err(Error::Invalid(format!("n = {n} outside 1..={}", seq.len())));
    }
    Ok(direction_series(&seq[..n], v)?.pop().unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConfig {
    pub triangular: TriangularConfig,
    /// Threshold on the certificate at three quarters of the window.
    pub cauchy_tol: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig { triangular: TriangularConfig::default(), cauchy_tol: 1e-6 }
    }
}

/// Added to every ε_n: the measured defects are float sums of `d` terms.
pub const ROUNDING_SLACK: f64 = 1e-14;

/// `J_h^{(n)}` stored at change points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassChange {
    pub n: usize,
    pub j_sets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub kappa_star: usize,
    pub t0: usize,
    pub t1: usize,
    /// Index `k₀` with `t₀ = s_{k₀}`.
    pub k0: usize,
    pub i_sets: Vec<Vec<usize>>,
    pub classes: Vec<ClassChange>,
    pub v: Vec<Vec<f64>>,
    /// `(n, ε_n)` for `n ≥ t₁`; nonincreasing.
    pub eps: Vec<(usize, f64)>,
    /// First `n ≥ t₁` after which the class partition stays fixed.
    pub burn_in: usize,
    /// Whether `𝓘(P_n) = ⋃ I_h × J_h^{(n)}` held for every `n ≥ t₁`.
    pub support_identity_holds: bool,
    pub converged: bool,
    pub cauchy_defect: f64,
    pub horizon: usize,
    pub condition: ConditionCReport,
}

impl LimitReport {
    pub fn classes_at(&self, n: usize) -> &[Vec<usize>] {
        let idx = self.classes.iter().rposition(|c| c.n <= n).unwrap_or(0);
        &self.classes[idx].j_sets
    }

    pub fn eps_at(&self, n: usize) -> Option<f64> {
        self.eps.iter().find(|e| e.0 == n).map(|e| e.1)
    }
}

/// Everything the report is computed from, kept for follow-up queries.
#[derive(Debug, Clone)]
pub struct LimitAnalysis {
    pub report: LimitReport,
    /// `P_n` for `n = 0..=N`.
    pub products: Vec<ColumnScaled>,
}

/// Limit estimation. Runs whether or not (C) holds; `report.condition`
/// says whether the certificates are backed by the hypotheses.
pub fn analyze<T: Scalar>(seq: &[Mat<T>], seg: &[usize], cfg: &LimitConfig) -> Result<LimitAnalysis> {
    let condition = check_condition_c(seq, seg)?;
    let horizon = seq.len();
    let d = seq[0].dim();
    let pats: Vec<SupportPattern> = seq.iter().map(SupportPattern::of).collect();
    let seg: Vec<usize> = seg.iter().copied().take_while(|&s| s <= horizon).collect();

    let seg_pats: Vec<SupportPattern> = seg
        .windows(2)
        .map(|w| pats[w[0]..w[1]].iter().fold(SupportPattern::identity(d), |a, p| a.mul(p)))
        .collect();
    let pf = triangular_form_patterns(&seg_pats, &cfg.triangular)?;
    if pf.rk.len() < 2 {
        return Err(Error::Unconverged(format!("only {} usable segment indices in the window", pf.rk.len())));
    }
    let k0 = pf.rk[0];
    let (t0, t1) = (seg[pf.rk[0]], seg[pf.rk[1]]);

    let mut from_t0 = SupportPattern::identity(d);
    let mut from_0 = SupportPattern::identity(d);
    let mut products = vec![ColumnScaled::identity(d)];
    let mut support_from_t0 = Vec::new();
    let mut support_from_0 = Vec::new();
    for n in 1..=horizon {
        let mut p = products[n - 1].clone();
        p.mul_assign(&seq[n - 1].to_float());
        products.push(p);
        from_0 = from_0.mul(&pats[n - 1]);
        if n > t0 {
            from_t0 = from_t0.mul(&pats[n - 1]);
        }
        support_from_t0.push(from_t0.clone());
        support_from_0.push(from_0.clone());
    }
    let kappa_star = support_from_t0[t1 - 1].h_star();

    let mut classes: Vec<ClassChange> = Vec::new();
    let mut i_masks: Vec<Option<IndexSet>> = vec![None; kappa_star];
    let mut support_identity_holds = true;
    for n in t1..=horizon {
        let part = partition_pattern(&support_from_t0[n - 1]);
        let j_sets: Vec<Vec<usize>> = part.nonempty_classes().to_vec();
        if j_sets.len() != kappa_star {
            support_identity_holds = false;
        }
        let pn = &support_from_0[n - 1];
        let mut expected = SupportPattern::zeros(d).columns().to_vec();
        for (h, js) in j_sets.iter().enumerate().take(kappa_star) {
            for &j in js {
                let s = pn.column(j);
                match i_masks[h] {
                    None => i_masks[h] = Some(s),
                    Some(m) if m != s => support_identity_holds = false,
                    _ => {}
                }
                expected[j] = i_masks[h].unwrap();
            }
        }
        if SupportPattern::from_columns(d, expected) != *pn {
            support_identity_holds = false;
        }
        if classes.last().map_or(true, |c| c.j_sets != j_sets) {
            classes.push(ClassChange { n, j_sets });
        }
    }
    let burn_in = classes.last().map_or(t1, |c| c.n);
    let i_sets: Vec<Vec<usize>> = i_masks.iter().map(|m| m.map(set_to_vec).unwrap_or_default()).collect();

    let last = &products[horizon];
    let final_classes = &classes.last().unwrap().j_sets;
    let v: Vec<Vec<f64>> = final_classes
        .iter()
        .map(|js| {
            let mut acc = vec![0.0; d];
            for &j in js {
                for (i, a) in acc.iter_mut().enumerate() {
                    *a += last.cols.get(i, j);
                }
            }
            let n: f64 = acc.iter().sum();
            acc.into_iter().map(|x| if n > 0.0 { x / n } else { 0.0 }).collect()
        })
        .collect();

    let report_stub = LimitReport {
        kappa_star,
        t0,
        t1,
        k0,
        i_sets,
        classes,
        v,
        eps: Vec::new(),
        burn_in,
        support_identity_holds,
        converged: false,
        cauchy_defect: 0.0,
        horizon,
        condition,
    };
    let mut raw = Vec::with_capacity(horizon + 1 - t1);
    for n in t1..=horizon {
        let p = &products[n];
        let js = report_stub.classes_at(n);
        let mut in_class: f64 = 0.0;
        for (h, set) in js.iter().enumerate() {
            for &j in set {
                in_class = in_class.max(dist_l1(&p.column(j), &report_stub.v[h]));
            }
        }
        let mut leak: f64 = 0.0;
        for h in 0..js.len() {
            let lo = js[h].iter().map(|&j| p.log_norms[j]).fold(f64::INFINITY, f64::min);
            for later in &js[h + 1..] {
                for &j2 in later {
                    leak = leak.max((p.log_norms[j2] - lo).exp());
                }
            }
        }
        raw.push((n, in_class + 2.0 * leak + ROUNDING_SLACK));
    }
    let mut eps = raw.clone();
    for i in (0..eps.len().saturating_sub(1)).rev() {
        eps[i].1 = eps[i].1.max(eps[i + 1].1);
    }
    let probe = horizon - (horizon - t1) / 4;
    let cauchy_defect = eps.iter().find(|e| e.0 >= probe).map_or(f64::INFINITY, |e| e.1);
    let mut report = report_stub;
    report.eps = eps;
    report.cauchy_defect = cauchy_defect;
    report.converged = cauchy_defect <= cfg.cauchy_tol;
    Ok(LimitAnalysis { report, products })
}

pub fn estimate_limits<T: Scalar>(seq: &[Mat<T>], seg: &[usize], cfg: &LimitConfig) -> Result<LimitReport> {
    analyze(seq, seg, cfg).map(|a| a.report)
}

/// `s_k = k·step` up to the horizon.
pub fn uniform_segmentation(step: usize, horizon: usize) -> Vec<usize> {
    (0..=horizon / step.max(1)).map(|k| k * step.max(1)).collect()
}

/// Tries uniform grids `step = 1..=max_step` and returns the first along which
/// (C) holds. Not complete: a failure here proves nothing.
pub fn search_segmentation<T: Scalar>(seq: &[Mat<T>], max_step: usize) -> Option<Vec<usize>> {
    (1..=max_step.min(seq.len() / 2)).map(|s| uniform_segmentation(s, seq.len())).find(|seg| {
        check_condition_c(seq, seg).map(|r| r.holds).unwrap_or(false)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub n: usize,
    pub ratio: f64,
    /// `λ^{k−k₀}Λ/(1−λ)` where `n ∈ [s_k, s_{k+1})`; None when `k ≤ k₀` or λ ≥ 1.
    pub envelope: Option<f64>,
}

/// Worst ratio `‖P_nU_{j'}‖/‖P_nU_j‖` with `j ∈ J_h^{(n)}`, `j' ∈ J_{h'}^{(n)}` (0-based classes).
pub fn ratio_decay(a: &LimitAnalysis, h: usize, h2: usize) -> Result<Vec<RatioPoint>> {
    let r = &a.report;
    if !(h < h2 && h2 < r.kappa_star) {
        return Ok(Vec::new());
    }
    let seg = &r.condition.segmentation;
    let (big, lam) = (r.condition.big_bound, r.condition.small_bound);
    let mut out = Vec::new();
    for n in r.t1..=r.horizon {
        let js = r.classes_at(n);
        if js.len() <= h2 {
            return Err(Error::Invalid(format!("class {h2} empty at n = {n}")));
        }
        let p = &a.products[n];
        let lo = js[h].iter().map(|&j| p.log_norms[j]).fold(f64::INFINITY, f64::min);
        let hi = js[h2].iter().map(|&j| p.log_norms[j]).fold(f64::NEG_INFINITY, f64::max);
        let k = seg.iter().rposition(|&s| s <= n).unwrap();
        let envelope = (k > r.k0 && lam < 1.0).then(|| lam.powi((k - r.k0) as i32) * big / (1.0 - lam));
        out.push(RatioPoint { n, ratio: (hi - lo).exp(), envelope });
    }
    Ok(out)
}

/// `h_V(n) = min{h : 𝓘(V) ∩ J_h^{(n)} ≠ ∅}` (0-based).
pub fn h_of_v(r: &LimitReport, v: &[f64], n: usize) -> Result<usize> {
    let sv = vec_to_set(&(0..v.len()).filter(|&i| v[i] > 0.0).collect::<Vec<_>>());
    r.classes_at(n)
        .iter()
        .position(|js| js.iter().any(|&j| sv >> j & 1 == 1))
        .ok_or_else(|| Error::Annihilated { step: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectPoint {
    pub n: usize,
    pub h: usize,
    pub defect: f64,
    /// `ε_n / min_{i∈𝓘(V)} V(i)` with `‖V‖₁ = 1`.
    pub bound: f64,
}

/// Direction defect of `P_nV` on the window: realized defect vs the certificate.
pub fn direction_defects(a: &LimitAnalysis, v: &[f64]) -> Result<Vec<DefectPoint>> {
    let total: f64 = v.iter().sum();
    let vn: Vec<f64> = v.iter().map(|x| x / total).collect();
    let min_v = vn.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    let r = &a.report;
    let mut out = Vec::new();
    for &(n, eps) in &r.eps {
        let h = h_of_v(r, &vn, n)?;
        let dir = a.products[n].apply_direction(&vn).ok_or(Error::Annihilated { step: n })?;
        out.push(DefectPoint { n, h, defect: dist_l1(&dir, &r.v[h]), bound: eps / min_v });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank1Report {
    pub c: Vec<f64>,
    /// `L_n` at the horizon.
    pub l_last: Vec<f64>,
    pub defect: Vec<(usize, f64)>,
}

/// `P_n/‖P_n‖ ≈ C·L_n` with `C` the class-1 limit; class 1 is read off
/// `partition(P_n)` unless an analysis is supplied.
pub fn rank1_factorization<T: Scalar>(seq: &[Mat<T>], analysis: Option<&LimitAnalysis>) -> Result<Rank1Report> {
    let d = seq[0].dim();
    let mut p = ColumnScaled::identity(d);
    let mut pat = SupportPattern::identity(d);
    let mut snaps = Vec::with_capacity(seq.len());
    for a in seq {
        p.mul_assign(&a.to_float());
        pat = pat.mul(&SupportPattern::of(a));
        if p.log_norms.iter().all(|x| !x.is_finite()) {
            return Err(Error::Annihilated { step: snaps.len() + 1 });
        }
        let j1 = match analysis {
            Some(an) if snaps.len() + 1 >= an.report.t1 => an.report.classes_at(snaps.len() + 1)[0].clone(),
            _ => partition_pattern(&pat).j_sets[0].clone(),
        };
        snaps.push((p.clone(), j1));
    }
    let (last, j_last) = snaps.last().unwrap();
    let c = match analysis {
        Some(an) => an.report.v[0].clone(),
        None => {
            let mut acc = vec![0.0; d];
            for &j in j_last {
                for (i, x) in acc.iter_mut().enumerate() {
                    *x += last.cols.get(i, j);
                }
            }
            let s: f64 = acc.iter().sum();
            acc.into_iter().map(|x| x / s).collect()
        }
    };
    let mut defect = Vec::with_capacity(snaps.len());
    let mut l_last = vec![0.0; d];
    for (n, (p, j1)) in snaps.iter().enumerate() {
        let lt = p.log_total();
        let mut dsum = 0.0;
        for j in 0..d {
            let w = (p.log_norms[j] - lt).exp();
            if j1.contains(&j) {
                dsum += w * dist_l1(&p.column(j), &c);
                if n + 1 == snaps.len() {
                    l_last[j] = w;
                }
            } else {
                dsum += w;
            }
        }
        defect.push((n + 1, dsum));
    }
    Ok(Rank1Report { c, l_last, defect })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveChainPoint {
    pub n: usize,
    pub direction: Vec<f64>,
    /// `τ(P_n)` computed on the normalized product.
    pub tau_pn: f64,
    /// `∏_{k≤n} τ(A_k)`.
    pub tau_product: f64,
    /// `∏_{k≤n} (1 − 1/Λ(A_k))`.
    pub lambda_product: f64,
}

impl PositiveChainPoint {
    /// Bound on `‖dir_n − dir_m‖₁` for every `m ≥ n`: `2 tanh(Δ/4) = 2τ`.
    pub fn oscillation_bound(&self) -> f64 {
        2.0 * self.tau_pn.min(self.tau_product)
    }
}

/// Birkhoff-route convergence for a chain of positive matrices, with `V = (1,…,1)`.
pub fn positive_chain_limit<T: Scalar>(seq: &[Mat<T>]) -> Result<Vec<PositiveChainPoint>> {
    let d = seq.first().ok_or_else(|| Error::Invalid("empty sequence".into()))?.dim();
    let mut p = ScaledProduct::<f64>::identity(d);
    let (mut tp, mut lp) = (1.0, 1.0);
    let mut out = Vec::with_capacity(seq.len());
    for (n, a) in seq.iter().enumerate() {
        let af = a.to_float();
        let tau = birkhoff_tau(&af).map_err(|_| Error::Invalid(format!("A_{} is not positive", n + 1)))?;
        tp *= tau;
        lp *= 1.0 - 1.0 / lambda_big(&af);
        p.mul_assign(&af);
        let w = p.mat.mul_vec(&vec![1.0; d]);
        let s: f64 = w.iter().sum();
        out.push(PositiveChainPoint {
            n: n + 1,
            direction: w.into_iter().map(|x| x / s).collect(),
            tau_pn: birkhoff_tau(&p.mat).unwrap_or(1.0),
            tau_product: tp,
            lambda_product: lp,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub candidates: usize,
    /// Some pair of limit-point candidates has no common left eigenvector.
    pub obstruction: bool,
    pub exact: bool,
    /// `max ‖P'_n − P'_m‖₁` over `N/2 ≤ n < m ≤ N`.
    pub oscillation: f64,
}

/// Shemesh: `A`, `B` share an eigenvector iff `⋂_{k,l<d} ker[A^k, B^l] ≠ 0`.
/// Applied to transposes for left eigenvectors.
fn commutator_stack<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Vec<Mat<T>> {
    let d = a.dim();
    let (at, bt) = (a.transpose(), b.transpose());
    let mut pa = vec![at.clone()];
    let mut pb = vec![bt.clone()];
    for _ in 2..d {
        pa.push(pa.last().unwrap().mul(&at));
        pb.push(pb.last().unwrap().mul(&bt));
    }
    let mut out = Vec::new();
    for x in &pa {
        for y in &pb {
            let xy = x.mul(y);
            let yx = y.mul(x);
            let mut c = Mat::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    c.set(i, j, xy.get(i, j).clone() - yx.get(i, j).clone());
                }
            }
            out.push(c);
        }
    }
    out
}

pub fn share_left_eigenvector_exact(a: &Mat<Rational>, b: &Mat<Rational>) -> bool {
    if a.dim() == 1 {
        return true;
    }
    let rows: Vec<Vec<Rational>> = commutator_stack(a, b).iter().flat_map(|c| c.rows()).collect();
    rank_exact(&rows) < a.dim()
}

pub fn share_left_eigenvector_float(a: &FloatMat, b: &FloatMat) -> bool {
    let d = a.dim();
    if d == 1 {
        return true;
    }
    let mut g = FloatMat::zeros(d);
    for c in commutator_stack(a, b) {
        g = g.add(&c.transpose().mul(&c));
    }
    let s = svd_jacobi(&g).s;
    let scale = a.norm_l1().max(b.norm_l1()).powi(2 * (d as i32 - 1)).max(1e-300);
    s[d - 1] <= 1e-12 * scale.max(s[0])
}

/// Divergence checks for `P_n/‖P_n‖` on a window.
pub fn divergence_criteria<T: Scalar>(seq: &[Mat<T>], exact: Option<&[Mat<Rational>]>) -> Result<DivergenceReport> {
    let n_max = seq.len();
    let d = seq.first().ok_or_else(|| Error::Invalid("empty sequence".into()))?.dim();
    let from = n_max / 2;
    let mut cand: Vec<usize> = Vec::new();
    for n in (from..n_max).rev() {
        let an = seq[n].to_float();
        let an = an.scale(&(1.0 / an.norm_l1()));
        let dup = cand.iter().any(|&c| {
            let m = seq[c].to_float();
            let m = m.scale(&(1.0 / m.norm_l1()));
            dist_l1(m.entries(), an.entries()) <= 1e-12
        });
        if !dup {
            cand.push(n);
        }
        if cand.len() == 16 {
            break;
        }
    }
    let mut obstruction = false;
    for (x, &i) in cand.iter().enumerate() {
        for &j in &cand[x + 1..] {
            let shared = match exact {
                Some(e) => share_left_eigenvector_exact(&e[i], &e[j]),
                None => share_left_eigenvector_float(&seq[i].to_float(), &seq[j].to_float()),
            };
            obstruction |= !shared;
        }
    }

    let mut p = ScaledProduct::<f64>::identity(d);
    let mut tail = Vec::new();
    for (n, a) in seq.iter().enumerate() {
        p.mul_assign(&a.to_float());
        if p.is_annihilated() {
            return Err(Error::Annihilated { step: n + 1 });
        }
        if n + 1 >= from.max(1) {
            tail.push(p.mat.clone());
        }
    }
    let mut oscillation: f64 = 0.0;
    for a in 0..tail.len() {
        for b in a + 1..tail.len() {
            oscillation = oscillation.max(dist_l1(tail[a].entries(), tail[b].entries()));
        }
    }
    Ok(DivergenceReport { candidates: cand.len(), obstruction, exact: exact.is_some(), oscillation })
}
