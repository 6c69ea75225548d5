//! File-level utilities behind the non-experiment CLI subcommands:
//! instance generation, one-off exploration runs, and planning against a
//! serialized instance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rfe_core::error::{invalid, Result};
use rfe_core::explorer::{write_checkpoint, ExplorationOutput, RecordLevel};
use rfe_core::mdp::io::{policy_document, read_mdp_json, to_document, write_json};
use rfe_core::mdp::random::random_instance;
use rfe_core::mdp::{hard::hard_instance, LinearMixtureMdp, RewardFunction};
use rfe_core::planner::{plan, ClipMode};
use rfe_core::{run_exploration, ExplorerConfig};

use crate::csvio::{Cell, CsvDoc};
use crate::experiment::ExplorerOptions;

/// Summary document written next to a one-off exploration run; the planner
/// subcommand accepts it directly as its parameter source.
#[derive(Debug, Serialize, Deserialize)]
pub struct ExploreSummaryDoc {
    pub episodes: usize,
    pub seed: u64,
    pub moment_levels: usize,
    pub beta_final: f64,
    pub g_count: usize,
    pub theta_star_covered: Option<bool>,
    pub ridge_theta: Vec<f64>,
    pub oracle_theta: Vec<f64>,
}

pub fn generate_random_instance_file(
    num_states: usize,
    num_actions: usize,
    dim: usize,
    horizon: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mdp = random_instance(num_states, num_actions, dim, horizon, &mut rng);
    write_json(out, &to_document(&mdp, None))
}

pub fn generate_hard_instance_file(
    dim: usize,
    budget: usize,
    norm_bound: f64,
    horizon: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let (mdp, reward, _) = hard_instance(dim, budget, norm_bound, horizon, seed)?;
    write_json(out, &to_document(&mdp, Some(&reward)))
}

/// Per-step episode stream with the fixed column layout.
pub fn write_episode_csv(
    dir: &Path,
    label: &str,
    rep: usize,
    out: &ExplorationOutput,
) -> Result<PathBuf> {
    let mut doc = CsvDoc::new(&[
        "k",
        "h",
        "s",
        "a",
        "s_next",
        "sigma_hat_0",
        "sigma_tilde_0",
        "u",
        "hatV1",
        "indicator",
    ]);
    doc.comment(format!("kind={label} rep={rep}"));
    for rec in &out.records {
        for (h, step) in rec.steps.iter().enumerate() {
            doc.push(vec![
                Cell::UInt(rec.episode as u64),
                Cell::UInt((h + 1) as u64),
                Cell::UInt(step.state as u64),
                Cell::UInt(step.action as u64),
                Cell::UInt(step.next_state as u64),
                Cell::Float(step.hat_sigma0),
                Cell::Float(step.tilde_sigma0),
                Cell::Float(step.u),
                Cell::Float(rec.hat_v1),
                Cell::Bool(step.indicator),
            ]);
        }
    }
    let path = dir.join(format!("episodes_rep{rep}.csv"));
    doc.write_to(&path)
        .map_err(|e| invalid(format!("write {}: {e}", path.display())))?;
    Ok(path)
}

/// One exploration run from a serialized instance: writes the parameter
/// summary, the per-step episode CSV and a run-resume checkpoint.
pub fn explore_to_files(
    instance: &Path,
    episodes: usize,
    seed: u64,
    opts: &ExplorerOptions,
    out_dir: &Path,
) -> Result<ExploreSummaryDoc> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| invalid(format!("create {}: {e}", out_dir.display())))?;
    let (mdp, _) = read_mdp_json(instance)?;
    let mut cfg = ExplorerConfig::for_instance(&mdp.view(), episodes, opts.delta, seed);
    cfg.n_theta = opts.n_theta;
    cfg.t_oracle = opts.t_oracle;
    cfg.constraint_window = opts.constraint_window;
    cfg.record_level = RecordLevel::Light;
    cfg.abort_snapshot_dir = Some(out_dir.to_path_buf());
    let out = run_exploration(&mdp, &cfg)?;

    let summary = ExploreSummaryDoc {
        episodes,
        seed,
        moment_levels: out.moment_levels,
        beta_final: out.beta_final,
        g_count: out.g_count,
        theta_star_covered: Some(out.confidence.contains(mdp.theta_star())),
        ridge_theta: out.ridge_theta.clone(),
        oracle_theta: out.oracle_theta.clone(),
    };
    write_json(&out_dir.join("exploration.json"), &summary)?;
    write_episode_csv(out_dir, "explore", 0, &out)?;
    write_checkpoint(
        &out_dir.join("checkpoint.json"),
        &out.hat_bank,
        &out.tilde_bank,
        &out.confidence,
        episodes,
        cfg.lambda,
    )?;
    Ok(summary)
}

/// Parameter file: either a bare JSON array or an exploration summary.
fn read_theta(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("read {}: {e}", path.display())))?;
    if let Ok(theta) = serde_json::from_str::<Vec<f64>>(&text) {
        return Ok(theta);
    }
    let doc: ExploreSummaryDoc = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("parse {}: {e}", path.display())))?;
    Ok(doc.ridge_theta)
}

/// Nested `[h][s][a]` reward override file.
fn read_rewards_override(path: &Path, mdp: &LinearMixtureMdp) -> Result<RewardFunction> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("read {}: {e}", path.display())))?;
    let table: Vec<Vec<Vec<f64>>> = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("parse {}: {e}", path.display())))?;
    let (h, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut values = vec![0.0; h * ns * na];
    if table.len() != h {
        return Err(invalid("rewards outer length != H"));
    }
    for (hh, per_s) in table.iter().enumerate() {
        for (s, per_a) in per_s.iter().enumerate() {
            for (a, &v) in per_a.iter().enumerate() {
                values[(hh * ns + s) * na + a] = v;
            }
        }
    }
    RewardFunction::new(h, ns, na, values)
}

/// Plans against a serialized instance and writes the policy table.
/// The reward comes from the instance document unless overridden.
pub fn plan_from_files(
    instance: &Path,
    theta_path: &Path,
    rewards_override: Option<&Path>,
    clip: ClipMode,
    out: &Path,
) -> Result<f64> {
    let (mdp, bundled_reward) = read_mdp_json(instance)?;
    let reward = match rewards_override {
        Some(path) => read_rewards_override(path, &mdp)?,
        None => bundled_reward
            .ok_or_else(|| invalid("instance document carries no rewards; pass --rewards"))?,
    };
    let bound = rfe_core::max_total_reward(&mdp, &reward);
    let limit = match clip {
        ClipMode::Horizon => mdp.horizon() as f64,
        _ => 1.0,
    };
    if bound > limit + 1e-9 {
        return Err(invalid(format!(
            "reward violates the total bound: max trajectory total {bound} > {limit}"
        )));
    }
    let theta = read_theta(theta_path)?;
    let result = plan(&mdp.view(), &theta, &reward, clip)?;
    write_json(out, &policy_document(&result.policy))?;
    Ok(result.model_value_at_start)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("rfe_tools_{tag}_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn generate_explore_plan_pipeline() {
        let dir = tmp("pipeline");
        let instance = dir.join("mdp.json");
        generate_hard_instance_file(3, 200, 2.0, 6, 5, &instance).unwrap();

        let mut opts = ExplorerOptions::default();
        opts.n_theta = 2;
        let summary = explore_to_files(&instance, 4, 11, &opts, &dir).unwrap();
        assert_eq!(summary.episodes, 4);
        assert!(dir.join("exploration.json").exists());
        assert!(dir.join("episodes_rep0.csv").exists());
        assert!(dir.join("checkpoint.json").exists());

        let policy_path = dir.join("policy.json");
        let value = plan_from_files(
            &instance,
            &dir.join("exploration.json"),
            None,
            ClipMode::Unit,
            &policy_path,
        )
        .unwrap();
        assert!((0.0..=1.0).contains(&value));
        let text = std::fs::read_to_string(&policy_path).unwrap();
        assert!(text.contains("\"policy\""));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn reward_override_and_bound_check() {
        let dir = tmp("override");
        let instance = dir.join("mdp.json");
        generate_random_instance_file(2, 2, 3, 3, 9, &instance).unwrap();
        let theta_path = dir.join("theta.json");
        std::fs::write(&theta_path, "[0.5, 0.2, 0.1]").unwrap();

        // a uniform 1.0 reward violates the unit total bound
        let bad = dir.join("bad_rewards.json");
        std::fs::write(
            &bad,
            serde_json::to_string(&vec![vec![vec![1.0; 2]; 2]; 3]).unwrap(),
        )
        .unwrap();
        let err = plan_from_files(
            &instance,
            &theta_path,
            Some(&bad),
            ClipMode::Unit,
            &dir.join("p.json"),
        );
        assert!(err.is_err());
        // the same reward is admissible in the horizon-scaled regime
        let value = plan_from_files(
            &instance,
            &theta_path,
            Some(&bad),
            ClipMode::Horizon,
            &dir.join("p.json"),
        )
        .unwrap();
        assert!(value >= 0.0);
        std::fs::remove_dir_all(&dir).ok();
    }
}
