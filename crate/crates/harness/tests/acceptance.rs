//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Heavy criteria share work where they are defined over the same runs: the
//! coverage battery (criterion 2) also yields the monotonicity probes
//! (criterion 4), the variance sandwich (criterion 6) and the indicator
//! bound (criterion 7). Run with `--test-threads=1 --nocapture` to see the
//! per-criterion lines and honest per-criterion timings.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rfe_core::explorer::{ExplorerConfig, RecordLevel};
use rfe_core::mdp::hard::hard_instance;
use rfe_core::mdp::random::{random_instance, random_reward};
use rfe_core::mdp::{optimal_value_and_policy, policy_value, validate, Policy, RewardFunction};
use rfe_core::planner::{plan, ClipMode};
use rfe_core::run_exploration;
use rfe_harness::diagnostics::{
    coverage_holds, diagnostics_pass, probe_monotonicity, verify_value_difference_identity,
};
use rfe_harness::experiment::{run_experiment, ExperimentConfig, ExperimentKind};

fn out_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join(tag);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn gauss_jordan_solve(dim: usize, a: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; dim * (dim + 1)];
    for i in 0..dim {
        m[i * (dim + 1)..i * (dim + 1) + dim].copy_from_slice(&a[i * dim..(i + 1) * dim]);
        m[i * (dim + 1) + dim] = rhs[i];
    }
    for col in 0..dim {
        let mut piv = col;
        for r in col + 1..dim {
            if m[r * (dim + 1) + col].abs() > m[piv * (dim + 1) + col].abs() {
                piv = r;
            }
        }
        for j in 0..=dim {
            m.swap(col * (dim + 1) + j, piv * (dim + 1) + j);
        }
        let p = m[col * (dim + 1) + col];
        for j in 0..=dim {
            m[col * (dim + 1) + j] /= p;
        }
        for r in 0..dim {
            if r != col {
                let f = m[r * (dim + 1) + col];
                for j in 0..=dim {
                    m[r * (dim + 1) + j] -= f * m[col * (dim + 1) + j];
                }
            }
        }
    }
    (0..dim).map(|i| m[i * (dim + 1) + dim]).collect()
}

// ---------------------------------------------------------------------------
// Criterion 1 — regression equivalence
// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_regression_equivalence() {
    let shapes = [
        (2usize, 2usize, 2usize, 3usize, 10usize),
        (3, 3, 2, 5, 20),
        (4, 4, 3, 10, 50),
        (8, 5, 3, 8, 30),
        (5, 3, 3, 6, 40),
    ];
    let mut worst_rel: f64 = 0.0;
    for run in 0..20u64 {
        let (d, ns, na, h, k) = shapes[(run % 5) as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(500 + run);
        let mdp = random_instance(ns, na, d, h, &mut rng);
        let mut cfg = ExplorerConfig::for_instance(&mdp.view(), k, 0.1, 900 + run);
        cfg.n_theta = 2;
        let out = run_exploration(&mdp, &cfg).unwrap();
        let m_levels = out.moment_levels;

        for series in 0..2 {
            for m in 0..m_levels {
                let mut gram = vec![0.0; d * d];
                for i in 0..d {
                    gram[i * d + i] = cfg.lambda;
                }
                let mut rhs = vec![0.0; d];
                for rec in &out.records {
                    let detail = rec.detail.as_ref().unwrap();
                    let values = if series == 0 {
                        &detail.hat_values
                    } else {
                        &detail.tilde_values
                    };
                    for (h_idx, step) in rec.steps.iter().enumerate() {
                        let sd = step.detail.as_ref().unwrap();
                        let (phis, sigmas) = if series == 0 {
                            (&sd.hat_phi, &sd.hat_sigma)
                        } else {
                            (&sd.tilde_phi, &sd.tilde_sigma)
                        };
                        let phi = &phis[m * d..(m + 1) * d];
                        let w = 1.0 / (sigmas[m] * sigmas[m]);
                        let mut y = values[(h_idx + 1) * ns + step.next_state];
                        for _ in 0..m {
                            y *= y;
                        }
                        for i in 0..d {
                            for j in 0..d {
                                gram[i * d + j] += w * phi[i] * phi[j];
                            }
                            rhs[i] += w * y * phi[i];
                        }
                    }
                    let expect = gauss_jordan_solve(d, &gram, &rhs);
                    let detail_thetas = if series == 0 {
                        &detail.hat_thetas
                    } else {
                        &detail.tilde_thetas
                    };
                    let got = &detail_thetas[m * d..(m + 1) * d];
                    for i in 0..d {
                        let rel = (got[i] - expect[i]).abs() / expect[i].abs().max(1.0);
                        worst_rel = worst_rel.max(rel);
                        assert!(
                            rel <= 1e-8,
                            "[criterion 1] FAIL — run {run} series {series} level {m} episode {} \
                             component {i}: {} vs batch {}",
                            rec.episode,
                            got[i],
                            expect[i]
                        );
                    }
                }
            }
        }
    }
    println!("[criterion 1] PASS — 20 runs, all boundary estimates match batch ridge (worst rel err {worst_rel:.2e})");
}

// ---------------------------------------------------------------------------
// Criteria 2, 4, 6, 7 — the coverage battery (shared runs)
// ---------------------------------------------------------------------------

struct CoverageBundle {
    covered: Vec<bool>,
    /// worst adjacent-episode rise of a frozen probe's start value (covered
    /// and uncovered seeds alike; the lemma is deterministic in snapshots)
    monotonicity_worst: f64,
    /// sandwich violations over covered seeds
    sandwich_violations: usize,
    /// optimism-gap violations over covered seeds
    optimism_violations: usize,
    /// indicator-bound violations over all completed runs
    g_violations: usize,
}

static COVERAGE: OnceLock<CoverageBundle> = OnceLock::new();

fn coverage_bundle() -> &'static CoverageBundle {
    COVERAGE.get_or_init(|| {
        let seeds: Vec<u64> = (0..50).collect();
        let results: Vec<(bool, f64, usize, usize, bool)> = seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(40_000 + seed);
                let mdp = random_instance(4, 3, 4, 10, &mut rng);
                let mut cfg = ExplorerConfig::for_instance(&mdp.view(), 256, 0.1, 60_000 + seed);
                cfg.record_level = RecordLevel::Full;
                let out = run_exploration(&mdp, &cfg).unwrap();
                let covered = coverage_holds(&mdp, &out);
                let report = diagnostics_pass(&mdp, &out, &cfg).unwrap();

                // ten frozen probes: the oracle triples of the first ten
                // episodes, re-evaluated under every episode's snapshots at
                // the fixed final radius
                let probes: Vec<(Vec<f64>, Policy, RewardFunction)> = out
                    .records
                    .iter()
                    .take(10)
                    .map(|probe_rec| {
                        let pd = probe_rec.detail.as_ref().unwrap();
                        (
                            pd.oracle_theta.clone(),
                            Policy::new(mdp.horizon(), mdp.num_states(), pd.policy.clone())
                                .unwrap(),
                            RewardFunction::new(
                                mdp.horizon(),
                                mdp.num_states(),
                                mdp.num_actions(),
                                pd.pseudo_reward.clone(),
                            )
                            .unwrap(),
                        )
                    })
                    .collect();
                let worst =
                    probe_monotonicity(&mdp, &out.records, &probes, out.beta_final).unwrap();
                (
                    covered,
                    worst,
                    report.sandwich_violations.len(),
                    report.optimism_violations.len(),
                    report.g_bound_violated,
                )
            })
            .collect();

        let covered: Vec<bool> = results.iter().map(|r| r.0).collect();
        let monotonicity_worst = results
            .iter()
            .map(|r| r.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let sandwich_violations = results.iter().filter(|r| r.0).map(|r| r.2).sum::<usize>();
        let optimism_violations = results.iter().filter(|r| r.0).map(|r| r.3).sum::<usize>();
        let g_violations = results.iter().filter(|r| r.4).count();
        CoverageBundle {
            covered,
            monotonicity_worst,
            sandwich_violations,
            optimism_violations,
            g_violations,
        }
    })
}

#[test]
fn acceptance_02_confidence_coverage() {
    let bundle = coverage_bundle();
    let frac = bundle.covered.iter().filter(|c| **c).count() as f64 / bundle.covered.len() as f64;
    println!(
        "[criterion 2] {} — coverage fraction {frac:.3} over 50 seeds (threshold 0.90)",
        if frac >= 0.9 { "PASS" } else { "FAIL" }
    );
    assert!(frac >= 0.9, "coverage fraction {frac}");
}

#[test]
fn acceptance_04_fixed_triple_monotonicity() {
    let bundle = coverage_bundle();
    println!(
        "[criterion 4] {} — worst adjacent probe rise {:.3e} (tolerance 1e-12)",
        if bundle.monotonicity_worst <= 1e-12 {
            "PASS"
        } else {
            "FAIL"
        },
        bundle.monotonicity_worst
    );
    assert!(bundle.monotonicity_worst <= 1e-12);
}

#[test]
fn acceptance_06_variance_sandwich() {
    let bundle = coverage_bundle();
    println!(
        "[criterion 6] {} — {} sandwich violations over covered seeds (zero permitted)",
        if bundle.sandwich_violations == 0 {
            "PASS"
        } else {
            "FAIL"
        },
        bundle.sandwich_violations
    );
    assert_eq!(bundle.sandwich_violations, 0);
    // the optimism-gap inequality rides on the same covered runs
    assert_eq!(
        bundle.optimism_violations, 0,
        "optimism-gap violations on covered seeds"
    );
}

#[test]
fn acceptance_07_indicator_bound() {
    let bundle = coverage_bundle();
    println!(
        "[criterion 7] {} — indicator bound violated on {} of 50 runs (zero permitted)",
        if bundle.g_violations == 0 {
            "PASS"
        } else {
            "FAIL"
        },
        bundle.g_violations
    );
    assert_eq!(bundle.g_violations, 0);
}

// ---------------------------------------------------------------------------
// Criterion 3 — planner exactness
// ---------------------------------------------------------------------------

#[test]
fn acceptance_03_planner_exactness() {
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7_000 + i);
        let ns = rng.gen_range(2usize..=3);
        let na = rng.gen_range(2usize..=3);
        let h = rng.gen_range(2usize..=4);
        let d = rng.gen_range(2usize..=4);
        let mdp = random_instance(ns, na, d, h, &mut rng);
        let r = random_reward(&mdp, &mut rng);

        let planned = plan(&mdp.view(), mdp.theta_star(), &r, ClipMode::Unit).unwrap();
        let achieved = policy_value(&mdp, &planned.policy, &r);

        // full enumeration of deterministic stage policies
        let slots = ns * h;
        let count = na.pow(slots as u32);
        let mut best = f64::NEG_INFINITY;
        for code in 0..count {
            let mut actions = vec![0usize; slots];
            let mut c = code;
            for slot in actions.iter_mut() {
                *slot = c % na;
                c /= na;
            }
            let policy = Policy::new(h, ns, actions).unwrap();
            best = best.max(policy_value(&mdp, &policy, &r));
        }
        let err = (achieved - best).abs();
        worst = worst.max(err);
        assert!(
            err <= 1e-12,
            "[criterion 3] FAIL — instance {i}: planned {achieved} vs enumerated {best}"
        );
    }
    println!("[criterion 3] PASS — 100 instances, planner matches policy enumeration (worst gap {worst:.2e})");
}

// ---------------------------------------------------------------------------
// Criterion 5 — value-difference identity
// ---------------------------------------------------------------------------

#[test]
fn acceptance_05_value_difference_identity() {
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(11_000 + i);
        let mdp = random_instance(2, 2, 3, 3, &mut rng);
        let r = random_reward(&mdp, &mut rng);
        let actions: Vec<usize> = (0..6).map(|_| rng.gen_range(0..2)).collect();
        let policy = Policy::new(3, 2, actions).unwrap();
        let mut theta = mdp.theta_star().to_vec();
        for t in theta.iter_mut() {
            *t += rng.gen_range(-0.02..0.02);
        }
        let (lhs, rhs) = verify_value_difference_identity(&mdp, &theta, &policy, &r).unwrap();
        let err = (lhs - rhs).abs();
        worst = worst.max(err);
        assert!(
            err <= 1e-9,
            "[criterion 5] FAIL — instance {i}: lhs {lhs} rhs {rhs}"
        );
    }
    println!(
        "[criterion 5] PASS — 50 tiny instances, identity holds (worst |lhs-rhs| {worst:.2e})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 8 — episode-budget scaling shape
// ---------------------------------------------------------------------------

#[test]
fn acceptance_08_budget_scaling_shape() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::ScalingK);
    cfg.out_dir = out_dir("acceptance_scaling_k");
    let outcome = run_experiment(&cfg).unwrap();
    let slope = outcome.slope.expect("slope defined");
    for g in &outcome.groups {
        println!(
            "  K={:>5}: mean max-gap {:.6} (stderr {:.6})",
            g.label, g.gap.mean, g.gap.stderr
        );
    }
    let pass = (-0.8..=-0.2).contains(&slope);
    println!(
        "[criterion 8] {} — log-log slope {slope:.3} (window [-0.8, -0.2], target -0.5)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "slope {slope} outside [-0.8, -0.2]");
}

// ---------------------------------------------------------------------------
// Criterion 9 — horizon-freeness shape
// ---------------------------------------------------------------------------

#[test]
fn acceptance_09_horizon_freeness() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::ScalingH);
    cfg.out_dir = out_dir("acceptance_scaling_h");
    let outcome = run_experiment(&cfg).unwrap();
    for g in &outcome.groups {
        println!(
            "  H={:>3}: mean max-gap {:.6} (stderr {:.6})",
            g.label, g.gap.mean, g.gap.stderr
        );
    }
    let ratio = outcome.ratio.expect("ratio defined");
    if ratio <= 3.0 {
        println!("[criterion 9] PASS — max/min mean suboptimality ratio {ratio:.3} <= 3");
    } else if ratio <= 5.0 {
        println!(
            "[criterion 9] PASS (with warning) — ratio {ratio:.3} in (3, 5]; polylog tolerance strained"
        );
    } else {
        println!("[criterion 9] FAIL — ratio {ratio:.3} > 5");
    }
    assert!(ratio <= 5.0, "horizon ratio {ratio} above the hard limit 5");
}

// ---------------------------------------------------------------------------
// Criterion 10 — hard-instance validity
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_hard_instance_validity() {
    for d in [2usize, 4, 8] {
        for k in [100usize, 1875] {
            let (mdp, _, spec) = hard_instance(d, k, 2.0, 10, 7).unwrap();
            let report = validate(&mdp);
            assert!(
                report.is_valid(),
                "[criterion 10] FAIL — d={d} K={k}: {:?}",
                report.violations
            );
            if k == 1875 {
                assert_eq!(
                    spec.gap,
                    1.0 / 600.0,
                    "[criterion 10] FAIL — gap {} != 1/600 exactly",
                    spec.gap
                );
            }
        }
    }
    // optimal value sanity on one member of the family
    let (mdp, reward, spec) = hard_instance(4, 500, 2.0, 8, 3).unwrap();
    let (v_star, _) = optimal_value_and_policy(&mdp, &reward);
    let expect = (spec.delta0 + spec.gap * 3.0) * 7.0 / 8.0;
    assert!((v_star - expect).abs() < 1e-12);
    println!("[criterion 10] PASS — all generator outputs validate; gap(K=1875) = 1/600 exactly");
}

// ---------------------------------------------------------------------------
// Criterion 11 — determinism
// ---------------------------------------------------------------------------

#[test]
fn acceptance_11_determinism() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Coverage);
    cfg.episodes = 16;
    cfg.replications = 4;
    cfg.options.n_theta = 2;
    cfg.out_dir = out_dir("acceptance_det_a");
    let out_a = run_experiment(&cfg).unwrap();
    let mut cfg_b = cfg.clone();
    cfg_b.out_dir = out_dir("acceptance_det_b");
    let out_b = run_experiment(&cfg_b).unwrap();
    assert_eq!(out_a.csv_files.len(), out_b.csv_files.len());
    for (a, b) in out_a.csv_files.iter().zip(out_b.csv_files.iter()) {
        let bytes_a = std::fs::read(a).unwrap();
        let bytes_b = std::fs::read(b).unwrap();
        assert_eq!(
            bytes_a,
            bytes_b,
            "[criterion 11] FAIL — {} differs from {}",
            a.display(),
            b.display()
        );
    }
    println!("[criterion 11] PASS — identical config and seed reproduce byte-identical CSVs");
}
