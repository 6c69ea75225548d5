//! Experiment kinds, replication engine and CSV artifacts.
//!
//! Every kind follows the same shape: build the instance, run seeded
//! replications in parallel (a bounded pool over the seed queue; results are
//! collected in replication order so outputs never depend on scheduling),
//! aggregate, and write one per-replication CSV plus one aggregate CSV.
//! Wall-clock goes to stdout only — CSV outputs are byte-identical across
//! re-runs with the same config and seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use rfe_core::error::{invalid, Result, RfeError};
use rfe_core::explorer::{ExplorationOutput, ExplorationStrategy, ExplorerConfig, RecordLevel};
use rfe_core::mdp::hard::hard_instance;
use rfe_core::mdp::io::read_mdp_json;
use rfe_core::mdp::random::random_instance;
use rfe_core::mdp::LinearMixtureMdp;
use rfe_core::{optimal_value_and_policy, run_exploration, validate};

use crate::csvio::{Cell, CsvDoc};
use crate::diagnostics::{coverage_holds, diagnostics_pass, measure_suboptimality};
use crate::evalrewards::evaluation_rewards;
use crate::stats::{aggregate, loglog_slope, replication_seed, Aggregate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ScalingK,
    ScalingH,
    ScalingD,
    Coverage,
    Diagnostics,
    HardInstance,
    BaselineCompare,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::ScalingK => "scaling_k",
            ExperimentKind::ScalingH => "scaling_h",
            ExperimentKind::ScalingD => "scaling_d",
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::Diagnostics => "diagnostics",
            ExperimentKind::HardInstance => "hard_instance",
            ExperimentKind::BaselineCompare => "baseline_compare",
        }
    }
}

/// Where the instance comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InstanceSpec {
    Random {
        num_states: usize,
        num_actions: usize,
        dim: usize,
        horizon: usize,
        instance_seed: u64,
    },
    Hard {
        dim: usize,
        budget: usize,
        norm_bound: f64,
        horizon: usize,
        mu_seed: u64,
    },
    File {
        path: PathBuf,
    },
}

/// Which exploration output parameterizes the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanningParameter {
    /// The final tilde-series level-0 ridge estimate (default).
    Ridge,
    /// The final episode's oracle parameter.
    Oracle,
}

/// Exploration knobs applied on top of the theorem defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplorerOptions {
    pub delta: f64,
    pub n_theta: usize,
    pub t_oracle: usize,
    #[serde(default)]
    pub constraint_window: Option<usize>,
    #[serde(default = "default_planning_parameter")]
    pub planning_parameter: PlanningParameter,
}

fn default_planning_parameter() -> PlanningParameter {
    PlanningParameter::Ridge
}

impl Default for ExplorerOptions {
    fn default() -> Self {
        Self {
            delta: 0.1,
            n_theta: 4,
            t_oracle: 1,
            constraint_window: None,
            planning_parameter: PlanningParameter::Ridge,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub instance: InstanceSpec,
    /// Episode budget for single-budget kinds and the fixed budget of the
    /// horizon/dimension scans.
    pub episodes: usize,
    #[serde(default)]
    pub k_grid: Vec<usize>,
    #[serde(default)]
    pub h_grid: Vec<usize>,
    #[serde(default)]
    pub d_grid: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub verbose: bool,
    #[serde(default)]
    pub options: ExplorerOptions,
}

impl ExperimentConfig {
    /// Desk-scale defaults per kind.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let random = InstanceSpec::Random {
            num_states: 4,
            num_actions: 3,
            dim: 4,
            horizon: 10,
            instance_seed: 1234,
        };
        let mut cfg = Self {
            kind,
            instance: random,
            episodes: 256,
            k_grid: Vec::new(),
            h_grid: Vec::new(),
            d_grid: Vec::new(),
            replications: 20,
            base_seed: 1000,
            out_dir: PathBuf::from("runs").join(kind.name()),
            verbose: false,
            options: ExplorerOptions::default(),
        };
        match kind {
            ExperimentKind::ScalingK => {
                cfg.k_grid = vec![64, 128, 256, 512, 1024, 2048, 4096];
            }
            ExperimentKind::ScalingH => {
                cfg.episodes = 1024;
                cfg.h_grid = vec![8, 16, 32, 64];
            }
            ExperimentKind::ScalingD => {
                cfg.d_grid = vec![2, 4, 8];
            }
            ExperimentKind::Coverage => {
                cfg.replications = 50;
            }
            ExperimentKind::Diagnostics => {
                cfg.episodes = 64;
                cfg.replications = 4;
            }
            ExperimentKind::HardInstance => {
                cfg.instance = InstanceSpec::Hard {
                    dim: 4,
                    budget: 1875,
                    norm_bound: 2.0,
                    horizon: 10,
                    mu_seed: 7,
                };
                cfg.d_grid = vec![2, 4, 8];
                cfg.k_grid = vec![100, 1875];
                cfg.replications = 1;
            }
            ExperimentKind::BaselineCompare => {
                cfg.instance = InstanceSpec::Hard {
                    dim: 4,
                    budget: 256,
                    norm_bound: 2.0,
                    horizon: 10,
                    mu_seed: 7,
                };
                cfg.replications = 10;
            }
        }
        cfg
    }
}

/// One replication's measured statistics. Wall-clock never enters CSVs.
#[derive(Debug, Clone)]
pub struct RepStats {
    pub rep: usize,
    pub seed: u64,
    pub max_gap: f64,
    pub mean_gap: f64,
    pub covered: bool,
    pub g_count: usize,
    pub g_bound: f64,
    pub wall_secs: f64,
}

/// One scanned group (a K, H, d or strategy setting).
#[derive(Debug, Clone)]
pub struct GroupSummary {
    pub label: String,
    pub x: f64,
    pub gap: Aggregate,
    pub coverage_fraction: f64,
    pub reps: Vec<RepStats>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    pub groups: Vec<GroupSummary>,
    /// Log-log slope of mean max-gap against the scanned variable.
    pub slope: Option<f64>,
    /// Max/min ratio of group means (horizon scan).
    pub ratio: Option<f64>,
    pub coverage_fraction: Option<f64>,
    /// Baseline ordering: optimistic mean <= uniform mean (flag, not a failure).
    pub baseline_ordering_ok: Option<bool>,
    pub csv_files: Vec<PathBuf>,
    pub total_wall_secs: f64,
}

pub fn build_instance(spec: &InstanceSpec) -> Result<LinearMixtureMdp> {
    match spec {
        InstanceSpec::Random {
            num_states,
            num_actions,
            dim,
            horizon,
            instance_seed,
        } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*instance_seed);
            Ok(random_instance(
                *num_states,
                *num_actions,
                *dim,
                *horizon,
                &mut rng,
            ))
        }
        InstanceSpec::Hard {
            dim,
            budget,
            norm_bound,
            horizon,
            mu_seed,
        } => {
            let (mdp, _, _) = hard_instance(*dim, *budget, *norm_bound, *horizon, *mu_seed)?;
            Ok(mdp)
        }
        InstanceSpec::File { path } => {
            let (mdp, _) = read_mdp_json(path)?;
            Ok(mdp)
        }
    }
}

/// Evaluation-family seed shared by every replication of one experiment.
fn eval_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.base_seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(17)
}

fn explorer_config(
    mdp: &LinearMixtureMdp,
    episodes: usize,
    seed: u64,
    opts: &ExplorerOptions,
    record_level: RecordLevel,
    strategy: ExplorationStrategy,
) -> ExplorerConfig {
    let mut cfg = ExplorerConfig::for_instance(&mdp.view(), episodes, opts.delta, seed);
    cfg.n_theta = opts.n_theta;
    cfg.t_oracle = opts.t_oracle;
    cfg.constraint_window = opts.constraint_window;
    cfg.record_level = record_level;
    cfg.strategy = strategy;
    cfg
}

/// Runs one replication end to end: explore, then plan against the whole
/// evaluation family with the ridge estimate.
fn run_replication(
    mdp: &LinearMixtureMdp,
    episodes: usize,
    rep: usize,
    base_seed: u64,
    opts: &ExplorerOptions,
    record_level: RecordLevel,
    strategy: ExplorationStrategy,
    eval_rewards: &[rfe_core::mdp::RewardFunction],
) -> Result<(RepStats, ExplorationOutput)> {
    let t0 = std::time::Instant::now();
    let seed = replication_seed(base_seed, rep);
    let cfg = explorer_config(mdp, episodes, seed, opts, record_level, strategy);
    let out = run_exploration(mdp, &cfg)?;
    let planning_theta = match opts.planning_parameter {
        PlanningParameter::Ridge => &out.ridge_theta,
        PlanningParameter::Oracle => &out.oracle_theta,
    };
    let gaps = measure_suboptimality(mdp, planning_theta, eval_rewards)?;
    if let Some(bad) = gaps.iter().find(|g| **g < -1e-9) {
        return Err(invalid(format!(
            "negative suboptimality {bad}: the optimal value must dominate"
        )));
    }
    let max_gap = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let iota = (1.0
        + (episodes as f64 * mdp.horizon() as f64)
            / (cfg.dim as f64 * cfg.lambda * cfg.alpha * cfg.alpha))
        .ln();
    Ok((
        RepStats {
            rep,
            seed,
            max_gap,
            mean_gap,
            covered: coverage_holds(mdp, &out),
            g_count: out.g_count,
            g_bound: cfg.moment_levels as f64 * cfg.dim as f64 * iota,
            wall_secs: t0.elapsed().as_secs_f64(),
        },
        out,
    ))
}

/// Replications of one group, parallel over the seed queue, collected in
/// replication order.
fn replicate_group(
    mdp: &LinearMixtureMdp,
    episodes: usize,
    cfg: &ExperimentConfig,
    record_level: RecordLevel,
    strategy: ExplorationStrategy,
) -> Result<Vec<(RepStats, ExplorationOutput)>> {
    let eval = evaluation_rewards(mdp, eval_seed(cfg));
    (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            run_replication(
                mdp,
                episodes,
                rep,
                cfg.base_seed,
                &cfg.options,
                record_level,
                strategy,
                &eval,
            )
        })
        .collect()
}

fn group_summary(label: String, x: f64, reps: Vec<RepStats>) -> GroupSummary {
    let gaps: Vec<f64> = reps.iter().map(|r| r.max_gap).collect();
    let covered = reps.iter().filter(|r| r.covered).count();
    GroupSummary {
        label,
        x,
        gap: aggregate(&gaps),
        coverage_fraction: covered as f64 / reps.len().max(1) as f64,
        reps,
    }
}

fn write_replication_csv(
    cfg: &ExperimentConfig,
    group_column: &str,
    groups: &[GroupSummary],
) -> Result<PathBuf> {
    let mut doc = CsvDoc::new(&[
        group_column,
        "rep",
        "seed",
        "max_gap",
        "mean_gap",
        "covered",
        "g_count",
        "g_bound",
    ]);
    doc.comment(format!("kind={}", cfg.kind.name()));
    doc.comment(format!("base_seed={}", cfg.base_seed));
    for g in groups {
        for r in &g.reps {
            doc.push(vec![
                Cell::Str(g.label.clone()),
                Cell::UInt(r.rep as u64),
                Cell::UInt(r.seed),
                Cell::Float(r.max_gap),
                Cell::Float(r.mean_gap),
                Cell::Bool(r.covered),
                Cell::UInt(r.g_count as u64),
                Cell::Float(r.g_bound),
            ]);
        }
    }
    let path = cfg
        .out_dir
        .join(format!("{}_replications.csv", cfg.kind.name()));
    doc.write_to(&path).map_err(io_err(&path))?;
    Ok(path)
}

fn write_aggregate_csv(
    cfg: &ExperimentConfig,
    group_column: &str,
    groups: &[GroupSummary],
    slope: Option<f64>,
    ratio: Option<f64>,
) -> Result<PathBuf> {
    let mut doc = CsvDoc::new(&[
        group_column,
        "n",
        "mean_max_gap",
        "stderr",
        "coverage_fraction",
        "slope",
    ]);
    doc.comment(format!("kind={}", cfg.kind.name()));
    if let Some(s) = slope {
        doc.comment(format!("loglog_slope={s}"));
    }
    if let Some(r) = ratio {
        doc.comment(format!("max_min_ratio={r}"));
    }
    let slope_cell = slope.map_or(Cell::Str(String::new()), Cell::Float);
    for g in groups {
        doc.push(vec![
            Cell::Str(g.label.clone()),
            Cell::UInt(g.gap.n as u64),
            Cell::Float(g.gap.mean),
            Cell::Float(g.gap.stderr),
            Cell::Float(g.coverage_fraction),
            slope_cell.clone(),
        ]);
    }
    let path = cfg
        .out_dir
        .join(format!("{}_aggregate.csv", cfg.kind.name()));
    doc.write_to(&path).map_err(io_err(&path))?;
    Ok(path)
}

/// Per-level weight trace: one row per `(episode, step, level)` with the
/// moment weights, variance estimates and error widths of both series.
fn write_weights_csv(
    cfg: &ExperimentConfig,
    rep: usize,
    out: &ExplorationOutput,
) -> Result<PathBuf> {
    let mut doc = CsvDoc::new(&[
        "k",
        "h",
        "m",
        "sigma_hat",
        "sigma_tilde",
        "var_est_hat",
        "var_est_tilde",
        "err_width_hat",
        "err_width_tilde",
    ]);
    doc.comment(format!("kind={} rep={rep}", cfg.kind.name()));
    for rec in &out.records {
        for (h, step) in rec.steps.iter().enumerate() {
            let sd = match &step.detail {
                Some(sd) => sd,
                None => continue,
            };
            for m in 0..sd.hat_sigma.len() {
                let top = m + 1 == sd.hat_sigma.len();
                doc.push(vec![
                    Cell::UInt(rec.episode as u64),
                    Cell::UInt((h + 1) as u64),
                    Cell::UInt(m as u64),
                    Cell::Float(sd.hat_sigma[m]),
                    Cell::Float(sd.tilde_sigma[m]),
                    if top { Cell::Str(String::new()) } else { Cell::Float(sd.hat_var_est[m]) },
                    if top { Cell::Str(String::new()) } else { Cell::Float(sd.tilde_var_est[m]) },
                    if top { Cell::Str(String::new()) } else { Cell::Float(sd.hat_err_width[m]) },
                    if top { Cell::Str(String::new()) } else { Cell::Float(sd.tilde_err_width[m]) },
                ]);
            }
        }
    }
    let path = cfg.out_dir.join(format!("weights_rep{rep}.csv"));
    doc.write_to(&path).map_err(io_err(&path))?;
    Ok(path)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RfeError + '_ {
    move |e| invalid(format!("write {}: {e}", path.display()))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| invalid(format!("create {}: {e}", cfg.out_dir.display())))?;
    let t0 = std::time::Instant::now();
    let mut outcome = match cfg.kind {
        ExperimentKind::ScalingK => scaling_k(cfg),
        ExperimentKind::ScalingH => scaling_h(cfg),
        ExperimentKind::ScalingD => scaling_d(cfg),
        ExperimentKind::Coverage => coverage(cfg),
        ExperimentKind::Diagnostics => diagnostics_experiment(cfg),
        ExperimentKind::HardInstance => hard_instance_experiment(cfg),
        ExperimentKind::BaselineCompare => baseline_compare(cfg),
    }?;
    outcome.total_wall_secs = t0.elapsed().as_secs_f64();
    Ok(outcome)
}

fn scaling_k(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mdp = build_instance(&cfg.instance)?;
    if cfg.k_grid.is_empty() {
        return Err(invalid("scaling_k needs a non-empty k_grid"));
    }
    let mut groups = Vec::new();
    for &k in &cfg.k_grid {
        let reps = replicate_group(
            &mdp,
            k,
            cfg,
            RecordLevel::Light,
            ExplorationStrategy::Optimistic,
        )?;
        groups.push(group_summary(
            format!("{k}"),
            k as f64,
            reps.into_iter().map(|(s, _)| s).collect(),
        ));
    }
    let points: Vec<(f64, f64)> = groups.iter().map(|g| (g.x, g.gap.mean)).collect();
    let slope = loglog_slope(&points);
    let csv1 = write_replication_csv(cfg, "K", &groups)?;
    let csv2 = write_aggregate_csv(cfg, "K", &groups, slope, None)?;
    Ok(ExperimentOutcome {
        kind: cfg.kind,
        groups,
        slope,
        ratio: None,
        coverage_fraction: None,
        baseline_ordering_ok: None,
        csv_files: vec![csv1, csv2],
        total_wall_secs: 0.0,
    })
}

fn scaling_h(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let base = build_instance(&cfg.instance)?;
    if cfg.h_grid.is_empty() {
        return Err(invalid("scaling_h needs a non-empty h_grid"));
    }
    let mut groups = Vec::new();
    for &h in &cfg.h_grid {
        let mdp = base.clone().with_horizon(h);
        let reps = replicate_group(
            &mdp,
            cfg.episodes,
            cfg,
            RecordLevel::Light,
            ExplorationStrategy::Optimistic,
        )?;
        groups.push(group_summary(
            format!("{h}"),
            h as f64,
            reps.into_iter().map(|(s, _)| s).collect(),
        ));
    }
    let means: Vec<f64> = groups.iter().map(|g| g.gap.mean).collect();
    let ratio = {
        let mx = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mn = means.iter().cloned().fold(f64::INFINITY, f64::min);
        if mn > 0.0 {
            Some(mx / mn)
        } else {
            None
        }
    };
    let csv1 = write_replication_csv(cfg, "H", &groups)?;
    let csv2 = write_aggregate_csv(cfg, "H", &groups, None, ratio)?;
    Ok(ExperimentOutcome {
        kind: cfg.kind,
        groups,
        slope: None,
        ratio,
        coverage_fraction: None,
        baseline_ordering_ok: None,
        csv_files: vec![csv1, csv2],
        total_wall_secs: 0.0,
    })
}

fn scaling_d(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    if cfg.d_grid.is_empty() {
        return Err(invalid("scaling_d needs a non-empty d_grid"));
    }
    let (ns, na, h, instance_seed) = match cfg.instance {
        InstanceSpec::Random {
            num_states,
            num_actions,
            horizon,
            instance_seed,
            ..
        } => (num_states, num_actions, horizon, instance_seed),
        _ => return Err(invalid("scaling_d needs a generated-random instance spec")),
    };
    let mut groups = Vec::new();
    for &d in &cfg.d_grid {
        let spec = InstanceSpec::Random {
            num_states: ns,
            num_actions: na,
            dim: d,
            horizon: h,
            instance_seed,
        };
        let mdp = build_instance(&spec)?;
        let reps = replicate_group(
            &mdp,
            cfg.episodes,
            cfg,
            RecordLevel::Light,
            ExplorationStrategy::Optimistic,
        )?;
        groups.push(group_summary(
            format!("{d}"),
            d as f64,
            reps.into_iter().map(|(s, _)| s).collect(),
        ));
    }
    let points: Vec<(f64, f64)> = groups.iter().map(|g| (g.x, g.gap.mean)).collect();
    let slope = loglog_slope(&points);
    let csv1 = write_replication_csv(cfg, "d", &groups)?;
    let csv2 = write_aggregate_csv(cfg, "d", &groups, slope, None)?;
    Ok(ExperimentOutcome {
        kind: cfg.kind,
        groups,
        slope,
        ratio: None,
        coverage_fraction: None,
        baseline_ordering_ok: None,
        csv_files: vec![csv1, csv2],
        total_wall_secs: 0.0,
    })
}

fn coverage(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mdp = build_instance(&cfg.instance)?;
    let reps = replicate_group(
        &mdp,
        cfg.episodes,
        cfg,
        RecordLevel::Light,
        ExplorationStrategy::Optimistic,
    )?;
    let group = group_summary(
        format!("{}", cfg.episodes),
        cfg.episodes as f64,
        reps.into_iter().map(|(s, _)| s).collect(),
    );
    let fraction = group.coverage_fraction;
    let groups = vec![group];
    let csv1 = write_replication_csv(cfg, "K", &groups)?;
    let csv2 = write_aggregate_csv(cfg, "K", &groups, None, None)?;
    Ok(ExperimentOutcome {
        kind: cfg.kind,
        groups,
        slope: None,
        ratio: None,
        coverage_fraction: Some(fraction),
        baseline_ordering_ok: None,
        csv_files: vec![csv1, csv2],
        total_wall_secs: 0.0,
    })
}

fn diagnostics_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mdp = build_instance(&cfg.instance)?;
    let results = replicate_group(
        &mdp,
        cfg.episodes,
        cfg,
        RecordLevel::Full,
        ExplorationStrategy::Optimistic,
    )?;

    let mut report_doc = CsvDoc::new(&[
        "rep",
        "seed",
        "covered",
        "g",
        "g_bound",
        "level",
        "r_hat",
        "r_tilde",
        "a_hat",
        "a_tilde",
        "s_hat",
        "s_tilde",
        "optimism_violations",
        "sandwich_violations",
    ]);
    report_doc.comment(format!("kind={}", cfg.kind.name()));
    let mut csv_files = Vec::new();
    let mut stats = Vec::new();
    for (rep_stats, out) in &results {
        let ecfg = explorer_config(
            &mdp,
            cfg.episodes,
            rep_stats.seed,
            &cfg.options,
            RecordLevel::Full,
            ExplorationStrategy::Optimistic,
        );
        let report = diagnostics_pass(&mdp, out, &ecfg)?;
        for m in 0..report.moment_levels {
            report_doc.push(vec![
                Cell::UInt(rep_stats.rep as u64),
                Cell::UInt(rep_stats.seed),
                Cell::Bool(rep_stats.covered),
                Cell::UInt(report.g as u64),
                Cell::Float(report.g_bound),
                Cell::UInt(m as u64),
                Cell::Float(report.r_hat[m]),
                Cell::Float(report.r_tilde[m]),
                Cell::Float(report.a_hat[m]),
                Cell::Float(report.a_tilde[m]),
                Cell::Float(report.s_hat[m]),
                Cell::Float(report.s_tilde[m]),
                Cell::UInt(report.optimism_violations.len() as u64),
                Cell::UInt(report.sandwich_violations.len() as u64),
            ]);
        }
        if cfg.verbose {
            csv_files.push(crate::tools::write_episode_csv(
                &cfg.out_dir,
                cfg.kind.name(),
                rep_stats.rep,
                out,
            )?);
            csv_files.push(write_weights_csv(cfg, rep_stats.rep, out)?);
        }
        stats.push(rep_stats.clone());
    }
    let path = cfg.out_dir.join("diagnostics_report.csv");
    report_doc.write_to(&path).map_err(io_err(&path))?;
    csv_files.push(path);

    let group = group_summary(format!("{}", cfg.episodes), cfg.episodes as f64, stats);
    let fraction = group.coverage_fraction;
    let groups = vec![group];
    let csv1 = write_replication_csv(cfg, "K", &groups)?;
    csv_files.push(csv1);
    Ok(ExperimentOutcome {
        kind: cfg.kind,
        groups,
        slope: None,
        ratio: None,
        coverage_fraction: Some(fraction),
        baseline_ordering_ok: None,
        csv_files,
        total_wall_secs: 0.0,
    })
}

fn hard_instance_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let (b, h, mu_seed) = match cfg.instance {
        InstanceSpec::Hard {
            norm_bound,
            horizon,
            mu_seed,
            ..
        } => (norm_bound, horizon, mu_seed),
        _ => return Err(invalid("hard_instance needs a hard instance spec")),
    };
    let d_grid = if cfg.d_grid.is_empty() {
        vec![2, 4, 8]
    } else {
        cfg.d_grid.clone()
    };
    let k_grid = if cfg.k_grid.is_empty() {
        vec![100, 1875]
    } else {
        cfg.k_grid.clone()
    };

    let mut doc = CsvDoc::new(&[
        "d",
        "K",
        "gap_delta",
        "valid",
        "violations",
        "num_actions",
        "theta_norm",
        "optimal_value",
    ]);
    doc.comment(format!(
        "kind={} B={b} H={h} mu_seed={mu_seed}",
        cfg.kind.name()
    ));
    for &d in &d_grid {
        for &k in &k_grid {
            let (mdp, reward, spec) = hard_instance(d, k, b, h, mu_seed)?;
            let report = validate(&mdp);
            let (v_star, _) = optimal_value_and_policy(&mdp, &reward);
            let theta_norm = mdp.theta_star().iter().map(|x| x * x).sum::<f64>().sqrt();
            doc.push(vec![
                Cell::UInt(d as u64),
                Cell::UInt(k as u64),
                Cell::Float(spec.gap),
                Cell::Bool(report.is_valid()),
                Cell::UInt(report.violations.len() as u64),
                Cell::UInt(spec.num_actions as u64),
                Cell::Float(theta_norm),
                Cell::Float(v_star),
            ]);
        }
    }
    let path = cfg.out_dir.join("hard_instances.csv");
    doc.write_to(&path).map_err(io_err(&path))?;
    Ok(ExperimentOutcome {
        kind: cfg.kind,
        groups: Vec::new(),
        slope: None,
        ratio: None,
        coverage_fraction: None,
        baseline_ordering_ok: None,
        csv_files: vec![path],
        total_wall_secs: 0.0,
    })
}

fn baseline_compare(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mdp = build_instance(&cfg.instance)?;
    let strategies = [
        ("optimistic", ExplorationStrategy::Optimistic),
        ("uniform_random", ExplorationStrategy::UniformRandom),
        ("unit_weights", ExplorationStrategy::UnitWeights),
    ];
    let mut groups = Vec::new();
    for (i, (label, strategy)) in strategies.iter().enumerate() {
        let reps = replicate_group(&mdp, cfg.episodes, cfg, RecordLevel::Light, *strategy)?;
        groups.push(group_summary(
            label.to_string(),
            i as f64,
            reps.into_iter().map(|(s, _)| s).collect(),
        ));
    }
    let ordering_ok = groups[0].gap.mean <= groups[1].gap.mean;
    let csv1 = write_replication_csv(cfg, "strategy", &groups)?;
    let csv2 = write_aggregate_csv(cfg, "strategy", &groups, None, None)?;
    Ok(ExperimentOutcome {
        kind: cfg.kind,
        groups,
        slope: None,
        ratio: None,
        coverage_fraction: None,
        baseline_ordering_ok: Some(ordering_ok),
        csv_files: vec![csv1, csv2],
        total_wall_secs: 0.0,
    })
}
