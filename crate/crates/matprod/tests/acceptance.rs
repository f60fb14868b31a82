//! One line per acceptance criterion. Exits nonzero when a criterion fails
//! that is not among the known, documented failures.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{ensure, oracle};
use matprod::bernoulli::{
    cylinder_measure, generation_cells, limit_direction, random_omega, system_invariants_hold, total_measure,
    weak_gibbs_log_defect, word_segmentation, Omega, SoficSystem, N0,
};
use matprod::coefficients::{lambda_big, lambda_coef, product_bounds};
use matprod::experiments::{
    bistochastic_chain, div3x3_closed_form, divergence_3x3, monte_carlo, triangular_2x2, Ensemble,
};
use matprod::limit::{analyze, dist_l1, ratio_decay, direction_defects, LimitConfig};
use matprod::linalg::{ExactMat, Rational, Scalar};
use matprod::multifractal::{default_q_grid, is_concave, legendre, max_second_difference, tau_scale_estimate};
use matprod::support::{bool_mul, satisfies_e, SupportPattern};
use matprod::triangular::{triangular_form, verify_diag_blocks_nonnull, TriangularConfig};
use num_traits::{One, Signed};
use rand::Rng;

/// Criteria that fail for reasons recorded alongside the project.
/// 4: the constant (1,1,1) chain approaches (0,1) only at rate 2/(n+2).
/// 8: the defect shrinks from n=250 to n=1000 for 17 of 20 seeds.
const KNOWN_FAILURES: [usize; 2] = [4, 8];

type Check = Result<String, String>;

fn q(a: i64, b: i64) -> Rational {
    Rational::new(a.into(), b.into())
}

fn c1_support_algebra() -> Check {
    let mut r = common::rng(101);
    for t in 0..500 {
        let d = r.gen_range(1..=6);
        let zp = r.gen_range(0.0..0.8);
        let (a, b) = (common::random_exact(&mut r, d, zp), common::random_exact(&mut r, d, zp));
        let lhs = bool_mul(&SupportPattern::of(&a), &SupportPattern::of(&b));
        ensure(lhs == SupportPattern::of(&a.mul(&b)), || format!("pair {t} differs"))?;
    }
    Ok("500 pairs identical".into())
}

fn c2_coefficients() -> Check {
    let mut r = common::rng(102);
    for t in 0..1000 {
        let d = r.gen_range(1..=5);
        let zp = r.gen_range(0.0..0.7);
        let (a, b) = (common::random_exact(&mut r, d, zp), common::random_exact(&mut r, d, zp));
        let ab = a.mul(&b);
        ensure(lambda_big(&ab) <= lambda_big(&a) + lambda_coef(&a) * lambda_big(&b), || format!("Λ bound, pair {t}"))?;
        ensure(lambda_coef(&ab) <= lambda_coef(&a) * lambda_coef(&b), || format!("λ bound, pair {t}"))?;
    }
    let mut worst: f64 = 0.0;
    for t in 0..500 {
        let d = r.gen_range(2..=4);
        let alphabet: Vec<ExactMat> = (0..3).map(|_| common::random_exact(&mut r, d, 0.3)).collect();
        let word: Vec<&ExactMat> = (0..r.gen_range(1..=20)).map(|_| &alphabet[r.gen_range(0..3)]).collect();
        let per: Vec<(f64, f64)> = word.iter().map(|m| (lambda_big(*m).to_f64(), lambda_coef(*m).to_f64())).collect();
        let p = word.iter().fold(ExactMat::identity(d), |p, m| p.mul(m));
        let b = product_bounds(&per);
        let (big, small) = (lambda_big(&p).to_f64(), lambda_coef(&p).to_f64());
        ensure(big <= b.big * (1.0 + 1e-12) && small <= b.small * (1.0 + 1e-12), || format!("certificate, word {t}"))?;
        worst = worst.max(big / b.big);
    }
    Ok(format!("1000 pairs exact, 500 words certified (max Λ/bound {worst:.3})"))
}

fn c3_triangular() -> Check {
    let cfg = TriangularConfig::default();
    for seed in 0..50 {
        let seq = common::nested_sequence(seed);
        let tf = triangular_form(&seq, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        common::check_invariants(&tf, &seq).map_err(|e| format!("seed {seed}: {e}"))?;
        if seq.iter().all(satisfies_e) {
            let ok = verify_diag_blocks_nonnull(&tf, &seq).map_err(|e| e.to_string())?;
            ensure(ok, || format!("seed {seed}: null diagonal block"))?;
        }
    }
    let sys = SoficSystem::new();
    let mut words: Vec<Vec<u8>> = (0..10).map(|s| random_omega(s, 200)).collect();
    words.push(vec![1; 200]);
    words.push([vec![0, 2], vec![1; 198]].concat());
    words.push((0..200).map(|i| (i % 3) as u8).collect());
    for (i, w) in words.iter().enumerate() {
        let seq = sys.sequence(w);
        let tf = triangular_form(&seq, &cfg).map_err(|e| format!("catalog {i}: {e}"))?;
        common::check_invariants(&tf, &seq).map_err(|e| format!("catalog {i}: {e}"))?;
        if seq.iter().all(satisfies_e) {
            let ok = verify_diag_blocks_nonnull(&tf, &seq).map_err(|e| e.to_string())?;
            ensure(ok, || format!("catalog {i}: null diagonal block"))?;
        }
    }
    Ok(format!("50 nested sequences and {} catalog words", words.len()))
}

fn c4_closed_forms() -> Check {
    let n = 1000;
    let run = |a: f64, c: f64, d: f64, v: [f64; 2]| triangular_2x2(&vec![a; n], &vec![c; n], &vec![d; n], v);
    let err = |x: [f64; 2], y: [f64; 2]| (x[0] - y[0]).abs() + (x[1] - y[1]).abs();

    for k in 1..=12u32 {
        let [a, b] = divergence_3x3(k).map_err(|e| e.to_string())?;
        let f = (4i64.pow(k) - 1) / 3;
        ensure(a.ratio == q(1, 2), || format!("div3x3 first ratio at k={k}"))?;
        ensure(b.ratio == q((4i64.pow(k + 1) - 1) / 3, 2 * f), || format!("div3x3 second ratio at k={k}"))?;
        ensure(div3x3_closed_form(k) == [a.ratio, b.ratio], || format!("closed form at k={k}"))?;
    }
    let [_, b10] = divergence_3x3(10).map_err(|e| e.to_string())?;
    let gap10 = (b10.ratio.to_f64() - 2.0).abs();
    ensure(gap10 < 1e-5, || format!("div3x3 k=10 ratio off 2 by {gap10:e}"))?;

    let half = run(2.0, 1.0, 1.0, [1.0, 1.0]).map_err(|e| e.to_string())?;
    let e_half = err(half.direction, [0.5, 0.5]);
    ensure(e_half <= 1e-6, || format!("(2,1,1) off (1/2,1/2) by {e_half:e}"))?;
    let v01 = run(1.0, 1.0, 1.0, [0.0, 1.0]).map_err(|e| e.to_string())?;
    let e_v01 = err(v01.direction, [0.0, 1.0]);
    ensure(e_v01 <= 1e-6, || format!("V=(0,1) off (0,1) by {e_v01:e}"))?;

    // constant (1,1,1): s_n = n, so the distance to (0,1) is 2/(n+2)
    let lin = run(1.0, 1.0, 1.0, [1.0, 1.0]).map_err(|e| e.to_string())?;
    let e_lin = err(lin.direction, [0.0, 1.0]);
    let detail = format!(
        "div3x3 exact k≤12, k=10 gap {gap10:.1e}; (2,1,1) err {e_half:.1e}; V=(0,1) err {e_v01:.1e}; (1,1,1) err {e_lin:.2e}"
    );
    if e_lin <= 1e-6 {
        Ok(detail)
    } else {
        Err(format!("{detail} > 1e-6 (s_n = n, error 2/(n+2))"))
    }
}

fn c5_bernoulli_exact() -> Check {
    ensure(system_invariants_hold(&SoficSystem::new()), || "(ΣM_i)C = C or (ΣR_i)C = 1 fails".into())?;
    for n in 1..=12 {
        ensure(total_measure(&generation_cells(n)).is_one(), || format!("generation {n} does not sum to 1"))?;
    }
    let mu = |w: &[u8]| cylinder_measure(w).map_err(|e| e.to_string());
    ensure(mu(&[0])? == q(3, 5) && mu(&[1])? == q(13, 40) && mu(&[2])? == q(3, 40), || "single symbols".into())?;
    for n in 1..=40u32 {
        let expect = q(3, 5) / Rational::from_integer(num_bigint::BigInt::from(2).pow(n - 1));
        ensure(mu(&vec![0; n as usize])? == expect, || format!("μ([0^{n}])"))?;
    }
    Ok("system exact, generations 1..=12 sum to 1, μ([0^n]) for n ≤ 40".into())
}

fn c6_words() -> Check {
    let n = oracle::check_decomposition(14)?;
    oracle::check_tables(6)?;
    oracle::check_cones(1000, 106)?;
    Ok(format!("{n} words decomposed, 19 tables for n ≤ 6, cones stable"))
}

/// A seeded ω whose prefix does not end in a run of 0 or 2.
fn omega(seed: u64, len: usize) -> Vec<u8> {
    let om = random_omega(seed, len);
    assert!(om[len - 64..].iter().any(|&a| a == 1), "seed {seed}: prefix ends in a constant run");
    om
}

fn c7_theorem_a() -> Check {
    let sys = SoficSystem::new();
    let horizon = 1000;
    let (mut cauchy, mut worst_a3, mut worst_env, mut series): (f64, f64, f64, usize) = (0.0, 0.0, 0.0, 0);
    let mut kappas = std::collections::BTreeSet::new();
    for seed in 0..20 {
        let om = omega(seed, 2000);
        let p = Omega::Prefix(om.clone());
        let dirs: Vec<Vec<f64>> =
            (400..=800).map(|n| limit_direction(&p, n)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        for (i, a) in dirs.iter().enumerate() {
            for b in &dirs[i + 1..] {
                cauchy = cauchy.max(dist_l1(a, b));
            }
        }

        let seq = sys.sequence_float(&om[..horizon]);
        let seg = word_segmentation(&om, horizon, N0);
        let an = analyze(&seq, &seg, &LimitConfig::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(an.report.condition.holds, || format!("seed {seed}: condition (C) fails on the window"))?;
        let c: Vec<f64> = sys.c.iter().map(|x| x.to_f64()).collect();
        for v in [c, vec![1.0; 7]] {
            for pt in direction_defects(&an, &v).map_err(|e| format!("seed {seed}: {e}"))? {
                ensure(pt.defect <= pt.bound, || format!("seed {seed}, n={}: {} > {}", pt.n, pt.defect, pt.bound))?;
                if pt.bound > 0.0 {
                    worst_a3 = worst_a3.max(pt.defect / pt.bound);
                }
            }
        }
        let ks = an.report.kappa_star;
        kappas.insert(ks);
        for h in 0..ks {
            for h2 in h + 1..ks {
                series += 1;
                for pt in ratio_decay(&an, h, h2).map_err(|e| format!("seed {seed}: {e}"))? {
                    if let Some(env) = pt.envelope {
                        ensure(pt.ratio <= env, || format!("seed {seed}, n={}: ratio {} > {env}", pt.n, pt.ratio))?;
                        worst_env = worst_env.max(pt.ratio / env);
                    }
                }
            }
        }
    }
    ensure(cauchy <= 1e-6, || format!("sup ‖C_n − C_m‖ = {cauchy:e}"))?;
    Ok(format!(
        "20 seeds: sup ‖C_n − C_m‖ = {cauchy:.1e}, max defect/bound {worst_a3:.3}, κ* ∈ {kappas:?}, \
         {series} two-class ratio series (max ratio/envelope {worst_env:.3})"
    ))
}

fn c8_weak_gibbs() -> Check {
    let depth = 400;
    let (mut worst, mut improved) = (0.0f64, 0);
    for seed in 0..20 {
        let p = Omega::Prefix(omega(seed, 1000 + depth));
        let g250 = weak_gibbs_log_defect(&p, 250, depth).map_err(|e| e.to_string())?;
        let g1000 = weak_gibbs_log_defect(&p, 1000, depth).map_err(|e| e.to_string())?;
        worst = worst.max(g1000.abs());
        if g1000.abs() < g250.abs() {
            improved += 1;
        }
    }
    let detail = format!("max |defect| at n=1000 {worst:.2e}, improved from n=250 in {improved}/20");
    if worst <= 0.05 && improved >= 18 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_counterexamples() -> Check {
    let ch = bistochastic_chain(201);
    ensure(ch[1].s == q(3, 4) && ch[2].s == q(11, 36), || "s₂, s₃".into())?;
    let mut min_step = q(1, 1);
    for w in ch.windows(2).filter(|w| (10..=200).contains(&w[0].n)) {
        let step = (w[1].s.clone() - w[0].s.clone()).abs();
        ensure(step >= q(1, 20), || format!("|s_(n+1) − s_n| < 1/20 at n = {}", w[0].n))?;
        min_step = min_step.min(step);
    }
    let pos = monte_carlo(Ensemble::UniformPositive, 4, 100, 0, 100).map_err(|e| e.to_string())?;
    let worst_gap = pos.iter().map(|r| r.final_gap()).fold(0.0, f64::max);
    ensure(worst_gap <= 1e-6, || format!("positive ensemble gap {worst_gap:e}"))?;
    let gc = monte_carlo(Ensemble::GaussianComplex, 4, 200, 0, 100).map_err(|e| e.to_string())?;
    let moving = gc.iter().filter(|r| r.tail_max_distance(50) >= 0.01).count();
    ensure(moving >= 95, || format!("only {moving}/100 gaussian trials keep moving"))?;
    Ok(format!(
        "min |Δs| = {:.4}, positive gap ≤ {worst_gap:.1e}, {moving}/100 gaussian trials diverge",
        min_step.to_f64()
    ))
}

fn c10_spectrum() -> Check {
    for n in 1..=16 {
        let est = tau_scale_estimate(&[1.0], n).map_err(|e| e.to_string())?;
        ensure(est.tau[0] == 0.0, || format!("τ(1) = {} at generation {n}", est.tau[0]))?;
    }
    let qs = default_q_grid();
    let est = tau_scale_estimate(&qs, 12).map_err(|e| e.to_string())?;
    ensure(is_concave(&est.q_grid, &est.tau), || "τ not concave at generation 12".into())?;
    let i0 = qs.iter().position(|&x| x == 0.0).unwrap();
    let t0 = est.tau[i0];
    ensure((-1.05..=-0.95).contains(&t0), || format!("τ(0) = {t0}"))?;
    let tau: Vec<f64> = qs.iter().map(|q| -q * q / 2.0).collect();
    let mut fixture = 0.0f64;
    for alpha in [-4.0, -1.5, 0.0, 0.25, 3.0] {
        let p = legendre(&qs, &tau, &[alpha]).map_err(|e| e.to_string())?[0];
        fixture = fixture.max((p.f + alpha * alpha / 2.0).abs());
    }
    ensure(fixture <= 1e-9, || format!("fixture error {fixture:e}"))?;
    Ok(format!(
        "τ(1) = 0 for generations 1..=16, max second difference {:.1e}, τ(0) = {t0:.4}, fixture error {fixture:.1e}",
        max_second_difference(&est.q_grid, &est.tau)
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("support algebra", c1_support_algebra),
        ("coefficient inequalities", c2_coefficients),
        ("triangular structure", c3_triangular),
        ("closed-form examples", c4_closed_forms),
        ("bernoulli exactness", c5_bernoulli_exact),
        ("word machinery", c6_words),
        ("limit theorem on the bernoulli system", c7_theorem_a),
        ("weak-gibbs defect", c8_weak_gibbs),
        ("counterexamples", c9_counterexamples),
        ("spectrum properties", c10_spectrum),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = f();
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {} PASS ({name}): {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                println!("criterion {} FAIL ({name}): {detail} [{secs:.1}s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed == KNOWN_FAILURES {
        println!("failures match the documented set {KNOWN_FAILURES:?}");
        ExitCode::SUCCESS
    } else {
        println!("unexpected failure set {failed:?}, documented {KNOWN_FAILURES:?}");
        ExitCode::FAILURE
    }
}
