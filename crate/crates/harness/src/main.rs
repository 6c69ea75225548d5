//! CLI experiment runner.
//!
//! One subcommand per experiment kind plus file-level utilities for
//! generating instances, running one exploration and planning from its
//! output. A JSON config file mirrors the `ExperimentConfig` fields and
//! individual flags override it. Identical config plus seed reproduces
//! byte-identical CSV outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use rfe_core::planner::ClipMode;
use rfe_harness::experiment::{run_experiment, ExperimentConfig, ExperimentKind, ExplorerOptions};
use rfe_harness::tools;

const USAGE: &str = "\
rfe — reward-free exploration experiment runner

USAGE:
  rfe <experiment> [FLAGS]
  rfe gen-instance --out PATH [--hard] [--states N] [--actions N] [--dim N]
                   [--horizon N] [--budget K] [--bound B] [--seed U64]
  rfe explore --instance PATH --out DIR [--episodes N] [--seed U64]
  rfe plan --instance PATH --theta PATH --out PATH [--rewards PATH] [--clip-horizon]

EXPERIMENTS:
  scaling-k         suboptimality versus episode budget, log-log slope
  scaling-h         suboptimality versus horizon at fixed budget
  scaling-d         suboptimality versus feature dimension
  coverage          confidence-set coverage of the true parameter
  diagnostics       per-run appendix-quantity report (full records)
  hard-instance     hard-instance generation and validation table
  baseline-compare  optimistic vs uniform vs unit-weight exploration

EXPERIMENT FLAGS:
  --config PATH   JSON config mirroring the experiment fields
  --seed U64      base seed (replication i uses seed + i)
  --reps N        replication count
  --out DIR       output directory for CSV artifacts
  --episodes N    episode budget (single-budget experiments)
  --verbose       also write per-step episode CSVs where supported
  --help          this text

EXAMPLES:
  rfe coverage --reps 50 --seed 1000 --out runs/coverage
  rfe scaling-k --config scaling.json
  rfe gen-instance --hard --dim 4 --budget 1875 --out mdp.json
  rfe explore --instance mdp.json --episodes 256 --seed 7 --out runs/explore
  rfe plan --instance mdp.json --theta runs/explore/exploration.json --out policy.json
";

fn parse_kind(name: &str) -> Option<ExperimentKind> {
    match name {
        "scaling-k" => Some(ExperimentKind::ScalingK),
        "scaling-h" => Some(ExperimentKind::ScalingH),
        "scaling-d" => Some(ExperimentKind::ScalingD),
        "coverage" => Some(ExperimentKind::Coverage),
        "diagnostics" => Some(ExperimentKind::Diagnostics),
        "hard-instance" => Some(ExperimentKind::HardInstance),
        "baseline-compare" => Some(ExperimentKind::BaselineCompare),
        _ => None,
    }
}

/// Usage errors exit with 2 and print the usage text; runtime errors exit
/// with 1 and print only the message.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<String> for CliError {
    fn from(msg: String) -> Self {
        CliError::Usage(msg)
    }
}

impl From<&str> for CliError {
    fn from(msg: &str) -> Self {
        CliError::Usage(msg.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

struct FlagMap {
    flags: Vec<(String, Option<String>)>,
}

impl FlagMap {
    fn parse(args: impl Iterator<Item = String>, value_flags: &[&str]) -> Result<Self, String> {
        let mut flags = Vec::new();
        let mut args = args.peekable();
        while let Some(arg) = args.next() {
            if !arg.starts_with("--") {
                return Err(format!("unexpected argument '{arg}'"));
            }
            let name = arg.trim_start_matches("--").to_string();
            if value_flags.contains(&name.as_str()) {
                let value = args.next().ok_or(format!("missing value for --{name}"))?;
                flags.push((name, Some(value)));
            } else {
                flags.push((name, None));
            }
        }
        Ok(Self { flags })
    }

    fn has(&self, name: &str) -> bool {
        self.flags.iter().any(|(n, _)| n == name)
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.flags
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, v)| v.as_deref())
    }

    fn get_parsed<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(name) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| format!("bad --{name}: {e}")),
        }
    }

    fn check_known(&self, known: &[&str]) -> Result<(), String> {
        for (name, _) in &self.flags {
            if !known.contains(&name.as_str()) {
                return Err(format!("unknown flag '--{name}'"));
            }
        }
        Ok(())
    }
}

fn experiment_command(
    kind: ExperimentKind,
    args: impl Iterator<Item = String>,
) -> Result<(), CliError> {
    let flags = FlagMap::parse(args, &["config", "seed", "reps", "out", "episodes"])?;
    flags.check_known(&[
        "config", "seed", "reps", "out", "episodes", "verbose", "help",
    ])?;
    if flags.has("help") {
        println!("{USAGE}");
        return Ok(());
    }
    let mut cfg = match flags.get("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| runtime(format!("read {path}: {e}")))?;
            let mut from_file: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| runtime(format!("parse {path}: {e}")))?;
            from_file.kind = kind;
            from_file
        }
        None => ExperimentConfig::default_for(kind),
    };
    if let Some(s) = flags.get_parsed::<u64>("seed")? {
        cfg.base_seed = s;
    }
    if let Some(r) = flags.get_parsed::<usize>("reps")? {
        cfg.replications = r;
    }
    if let Some(k) = flags.get_parsed::<usize>("episodes")? {
        cfg.episodes = k;
    }
    if let Some(dir) = flags.get("out") {
        cfg.out_dir = PathBuf::from(dir);
    }
    cfg.verbose |= flags.has("verbose");

    let outcome = run_experiment(&cfg).map_err(runtime)?;
    println!("experiment: {}", outcome.kind.name());
    for g in &outcome.groups {
        println!(
            "  {:>14}  n={:<3} mean_max_gap={:<12.6} stderr={:<12.6} coverage={:.2}",
            g.label, g.gap.n, g.gap.mean, g.gap.stderr, g.coverage_fraction
        );
    }
    if let Some(s) = outcome.slope {
        println!("  log-log slope: {s:.4}");
    }
    if let Some(r) = outcome.ratio {
        println!("  max/min mean ratio: {r:.4}");
    }
    if let Some(c) = outcome.coverage_fraction {
        println!("  coverage fraction: {c:.3}");
    }
    if let Some(ok) = outcome.baseline_ordering_ok {
        println!(
            "  baseline ordering (optimistic <= uniform): {}",
            if ok {
                "holds"
            } else {
                "VIOLATED (flag, not failure)"
            }
        );
    }
    for f in &outcome.csv_files {
        println!("  wrote {}", f.display());
    }
    println!("  wall time: {:.1}s", outcome.total_wall_secs);
    Ok(())
}

fn gen_instance_command(args: impl Iterator<Item = String>) -> Result<(), CliError> {
    let flags = FlagMap::parse(
        args,
        &[
            "out", "states", "actions", "dim", "horizon", "budget", "bound", "seed",
        ],
    )?;
    flags.check_known(&[
        "out", "states", "actions", "dim", "horizon", "budget", "bound", "seed", "hard", "help",
    ])?;
    let out = PathBuf::from(flags.get("out").ok_or("gen-instance needs --out")?);
    let seed = flags.get_parsed::<u64>("seed")?.unwrap_or(0);
    let horizon = flags.get_parsed::<usize>("horizon")?.unwrap_or(10);
    if flags.has("hard") {
        let dim = flags.get_parsed::<usize>("dim")?.unwrap_or(4);
        let budget = flags.get_parsed::<usize>("budget")?.unwrap_or(1875);
        let bound = flags.get_parsed::<f64>("bound")?.unwrap_or(2.0);
        tools::generate_hard_instance_file(dim, budget, bound, horizon, seed, &out)
            .map_err(runtime)?;
    } else {
        let states = flags.get_parsed::<usize>("states")?.unwrap_or(4);
        let actions = flags.get_parsed::<usize>("actions")?.unwrap_or(3);
        let dim = flags.get_parsed::<usize>("dim")?.unwrap_or(4);
        tools::generate_random_instance_file(states, actions, dim, horizon, seed, &out)
            .map_err(runtime)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn explore_command(args: impl Iterator<Item = String>) -> Result<(), CliError> {
    let flags = FlagMap::parse(args, &["instance", "out", "episodes", "seed"])?;
    flags.check_known(&["instance", "out", "episodes", "seed", "help"])?;
    let instance = PathBuf::from(flags.get("instance").ok_or("explore needs --instance")?);
    let out = PathBuf::from(flags.get("out").ok_or("explore needs --out")?);
    let episodes = flags.get_parsed::<usize>("episodes")?.unwrap_or(256);
    let seed = flags.get_parsed::<u64>("seed")?.unwrap_or(0);
    let summary =
        tools::explore_to_files(&instance, episodes, seed, &ExplorerOptions::default(), &out)
            .map_err(runtime)?;
    println!(
        "explored {} episodes (seed {}): beta_K = {:.3}, G = {}, outputs in {}",
        summary.episodes,
        summary.seed,
        summary.beta_final,
        summary.g_count,
        out.display()
    );
    Ok(())
}

fn plan_command(args: impl Iterator<Item = String>) -> Result<(), CliError> {
    let flags = FlagMap::parse(args, &["instance", "theta", "rewards", "out"])?;
    flags.check_known(&[
        "instance",
        "theta",
        "rewards",
        "out",
        "clip-horizon",
        "help",
    ])?;
    let instance = PathBuf::from(flags.get("instance").ok_or("plan needs --instance")?);
    let theta = PathBuf::from(flags.get("theta").ok_or("plan needs --theta")?);
    let out = PathBuf::from(flags.get("out").ok_or("plan needs --out")?);
    let rewards = flags.get("rewards").map(PathBuf::from);
    let clip = if flags.has("clip-horizon") {
        ClipMode::Horizon
    } else {
        ClipMode::Unit
    };
    let value = tools::plan_from_files(&instance, &theta, rewards.as_deref(), clip, &out)
        .map_err(runtime)?;
    println!(
        "planned policy written to {} (model value {value:.6})",
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let first = match args.next() {
        Some(f) => f,
        None => {
            eprintln!("error: missing subcommand\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    if first == "--help" || first == "-h" {
        println!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    let result = if let Some(kind) = parse_kind(&first) {
        experiment_command(kind, args)
    } else {
        match first.as_str() {
            "gen-instance" => gen_instance_command(args),
            "explore" => explore_command(args),
            "plan" => plan_command(args),
            other => Err(CliError::Usage(format!("unknown subcommand '{other}'"))),
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e}\n\n{USAGE}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
