#![allow(dead_code)]

pub mod oracle;

use matprod::linalg::{ExactMat, FloatMat, Mat, Rational, Scalar};
use matprod::support::{conjugate, SupportPattern};
use matprod::triangular::TriangularForm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nonnegative rational matrix with roughly `zero_p` zero entries; entries `p/q`, `p ≤ 9`, `q ≤ 4`.
pub fn random_exact(r: &mut ChaCha8Rng, d: usize, zero_p: f64) -> ExactMat {
    let rows = (0..d)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if r.gen::<f64>() < zero_p {
                        Rational::from_ratio(0, 1)
                    } else {
                        Rational::from_ratio(r.gen_range(1..=9), r.gen_range(1..=4))
                    }
                })
                .collect()
        })
        .collect();
    Mat::from_rows(rows).unwrap()
}

pub fn random_positive(r: &mut ChaCha8Rng, d: usize) -> FloatMat {
    let rows = (0..d).map(|_| (0..d).map(|_| r.gen_range(0.05..1.0)).collect()).collect();
    Mat::from_rows(rows).unwrap()
}

/// A matrix whose column supports form a chain `S₁ ⊇ S₂ ⊇ …`, so it satisfies (E).
pub fn random_nested<T: Scalar>(r: &mut ChaCha8Rng, d: usize) -> Mat<T> {
    let mut order: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        order.swap(i, r.gen_range(0..=i));
    }
    let mut m = Mat::zeros(d);
    for j in 0..d {
        // each column keeps a prefix of `order`, never empty
        let len = r.gen_range(1..=d);
        for &i in &order[..len] {
            m.set(i, j, T::from_ratio(r.gen_range(1..=7), r.gen_range(1..=3)));
        }
    }
    m
}

pub fn exact_seq_to_float(seq: &[ExactMat]) -> Vec<FloatMat> {
    seq.iter().map(|m| m.to_float()).collect()
}

pub fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Independent check of the four structural invariants.
pub fn check_invariants<T: Scalar>(tf: &TriangularForm<T>, seq: &[Mat<T>]) -> Result<(), String> {
    let d = seq[0].dim();
    let mut seen = vec![false; d];
    for &s in &tf.s.sigma {
        ensure(!seen[s], || "σ not a permutation".into())?;
        seen[s] = true;
    }
    ensure(
        tf.cuts.first() == Some(&0)
            && tf.cuts.last() == Some(&d)
            && tf.cuts.len() == tf.kappa + 1
            && tf.cuts.windows(2).all(|w| w[0] < w[1]),
        || format!("bad cuts {:?}", tf.cuts),
    )?;
    let block = |i: usize| tf.cuts.windows(2).position(|w| w[0] <= i && i < w[1]).unwrap();

    // 𝓘(P_{r, r_k}) is the same for every k
    let mut p = SupportPattern::identity(d);
    let mut first = None;
    for n in tf.r + 1..=seq.len() {
        p = p.mul(&SupportPattern::of(&seq[n - 1]));
        if tf.rk_raw.contains(&n) {
            ensure(first.get_or_insert_with(|| p.clone()) == &p, || format!("𝓘(P_(r,r_k)) moves at n = {n}"))?;
        }
    }

    let pats: Vec<SupportPattern> = tf.tk.iter().map(SupportPattern::of).collect();
    for (k, t) in pats.iter().enumerate() {
        // block lower triangular
        for (i, j) in t.pairs() {
            ensure(block(i) >= block(j), || format!("T_{} has ({i},{j}) above the diagonal", k + 1))?;
        }
        ensure(t.h() == tf.kappa, || format!("H(T_{}) ≠ κ", k + 1))?;
    }
    // every T_k ⋯ T_k' has the support of T_1
    for k in 0..pats.len() {
        let mut acc = pats[k].clone();
        for k2 in k..pats.len() {
            if k2 > k {
                acc = acc.mul(&pats[k2]);
            }
            ensure(acc == pats[0], || format!("T_{}⋯T_{} changes support", k + 1, k2 + 1))?;
        }
    }

    // T_k is the normalized conjugated segment product
    for (k, w) in tf.rk.windows(2).enumerate() {
        let mut prod = Mat::<T>::identity(d);
        for a in &seq[w[0]..w[1]] {
            prod = prod.mul(a);
        }
        ensure(SupportPattern::of(&conjugate(&prod, &tf.s)) == pats[k], || format!("T_{} is not the segment product", k + 1))?;
    }
    Ok(())
}

pub fn nested_sequence(seed: u64) -> Vec<ExactMat> {
    let mut r = rng(seed);
    let d = r.gen_range(2..=5);
    let letters = r.gen_range(2..=4);
    let alphabet: Vec<ExactMat> = (0..letters).map(|_| random_nested(&mut r, d)).collect();
    (0..160).map(|_| alphabet[r.gen_range(0..letters)].clone()).collect()
}

