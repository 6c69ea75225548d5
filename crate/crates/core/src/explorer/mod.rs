//! Exploration phase: per-episode optimization, trajectory collection, two
//! parallel M-level weighted regressions with snapshot covariances, and the
//! growing confidence set.
//!
//! Each episode freezes the previous episode's covariances as snapshots,
//! asks the oracle for an optimistic `(theta, policy, pseudo-reward)` triple,
//! rolls one trajectory, and feeds every step through the moment-weight
//! recursion into both regression series (one targeting the trajectory
//! uncertainty values, one the pseudo values). Episode boundaries re-solve
//! the ridge estimates and append one ellipsoid constraint per series and
//! moment level.

pub mod confidence;
pub mod oracle;
pub mod recursion;

pub use confidence::{ConfidenceSet, ConstraintMeta, Series};
pub use oracle::{oracle_argmax, OracleContext, OracleResult};
pub use recursion::{
    greedy_pseudo_value_tables, pseudo_reward_u, pseudo_value_tables, ValueTables,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::error::{invalid, Result, RfeError};
use crate::home::{home, HomeInputs};
use crate::mdp::{FeatureView, LinearMixtureMdp, Policy, RewardFunction};
use crate::numkit::{det_ratio_within, PrecisionState};

/// Determinant-ratio threshold of the step indicator.
pub const INDICATOR_THRESHOLD: f64 = 4.0;

/// How episodes pick their exploration triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExplorationStrategy {
    /// Full optimistic oracle over the candidate grid.
    Optimistic,
    /// Baseline: uniform-random actions, round-robin indicator rewards,
    /// the current ridge estimate as the model parameter.
    UniformRandom,
    /// Ablation: the optimistic oracle but every regression weight fixed at 1.
    UnitWeights,
}

/// How much per-step material episodes retain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordLevel {
    /// Everything the diagnostics need: per-level features, weights, value
    /// tables, boundary estimates and level-0 snapshots.
    Full,
    /// Trajectories, indicators and level-0 weights only.
    Light,
}

/// Exploration-phase configuration; defaults follow the main theorem's
/// parameter settings for the instance at hand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplorerConfig {
    pub dim: usize,
    pub horizon: usize,
    pub norm_bound: f64,
    /// Episode budget K.
    pub episodes: usize,
    /// Moment levels M.
    pub moment_levels: usize,
    /// Ridge parameter, `d / B^2` by default.
    pub lambda: f64,
    /// Weight floor, `H^{-1/2}` by default.
    pub alpha: f64,
    /// Epistemic scale, `d^{-1/4}` by default.
    pub gamma: f64,
    /// Failure probability in the confidence radius.
    pub delta: f64,
    /// Boundary-sample candidates per episode.
    pub n_theta: usize,
    /// Oracle refinement rounds.
    pub t_oracle: usize,
    pub seed: u64,
    pub strategy: ExplorationStrategy,
    /// Keep only the newest W episodes' constraints when set (memory relief
    /// for long runs; full history by default).
    pub constraint_window: Option<usize>,
    pub record_level: RecordLevel,
    /// When set, an infeasible-confidence-set abort writes a checkpoint here.
    pub abort_snapshot_dir: Option<PathBuf>,
}

impl ExplorerConfig {
    /// Theorem-default parameters for an instance: `M = ceil(log2(7KH))`,
    /// `lambda = d/B^2`, `alpha = H^{-1/2}`, `gamma = d^{-1/4}`.
    pub fn for_instance(view: &FeatureView<'_>, episodes: usize, delta: f64, seed: u64) -> Self {
        let d = view.dim;
        let h = view.horizon;
        let b = view.norm_bound;
        let m = ((7.0 * episodes as f64 * h as f64).ln() / std::f64::consts::LN_2)
            .ceil()
            .max(1.0) as usize;
        Self {
            dim: d,
            horizon: h,
            norm_bound: b,
            episodes,
            moment_levels: m,
            lambda: d as f64 / (b * b),
            alpha: 1.0 / (h as f64).sqrt(),
            gamma: (d as f64).powf(-0.25),
            delta,
            n_theta: 4,
            t_oracle: 1,
            seed,
            strategy: ExplorationStrategy::Optimistic,
            constraint_window: None,
            record_level: RecordLevel::Full,
            abort_snapshot_dir: None,
        }
    }

    /// Confidence radius `beta_k = 12 sqrt(d eta tau) + 30 tau / gamma^2 +
    /// sqrt(lambda) B`, with `eta = log(1 + kH/(alpha^2 d lambda))` and
    /// `tau = log(32 c k^2 H^2 / delta)` where `c = max(log(gamma^2/alpha) + 1, 1)`
    /// — the inner term is clamped at 1 to keep the radius finite for small
    /// `d` or large `H`. Non-decreasing in `k`.
    pub fn beta_at(&self, k: usize) -> f64 {
        let d = self.dim as f64;
        let h = self.horizon as f64;
        let kf = k as f64;
        let eta = (1.0 + kf * h / (self.alpha * self.alpha * d * self.lambda)).ln();
        let inner = ((self.gamma * self.gamma / self.alpha).ln() + 1.0).max(1.0);
        let tau = (32.0 * inner * kf * kf * h * h / self.delta).ln();
        12.0 * (d * eta * tau).sqrt()
            + 30.0 * tau / (self.gamma * self.gamma)
            + self.lambda.sqrt() * self.norm_bound
    }

    fn check(&self, view: &FeatureView<'_>) -> Result<()> {
        if self.dim != view.dim || self.horizon != view.horizon {
            return Err(invalid("config shape does not match the instance"));
        }
        if self.episodes == 0 || self.moment_levels == 0 {
            return Err(invalid("K and M must be >= 1"));
        }
        if !(self.lambda > 0.0 && self.alpha > 0.0 && self.gamma > 0.0) {
            return Err(invalid("lambda, alpha, gamma must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0,1)"));
        }
        Ok(())
    }
}

/// One series' M parallel regressors plus the per-episode snapshots and
/// boundary estimates.
#[derive(Debug, Clone)]
pub struct MomentBank {
    pub running: Vec<PrecisionState>,
    pub snapshot: Vec<PrecisionState>,
    pub thetas: Vec<Vec<f64>>,
}

impl MomentBank {
    pub fn new(levels: usize, dim: usize, lambda: f64) -> Result<Self> {
        let running: Vec<PrecisionState> = (0..levels)
            .map(|_| PrecisionState::new(dim, lambda))
            .collect::<Result<_>>()?;
        Ok(Self {
            snapshot: running.clone(),
            thetas: vec![vec![0.0; dim]; levels],
            running,
        })
    }

    /// Episode boundary: freeze the running covariances as the next
    /// episode's snapshots and re-solve the ridge estimates.
    pub fn freeze_boundary(&mut self) {
        self.snapshot = self.running.clone();
        self.thetas = self.running.iter().map(|p| p.solve_estimate()).collect();
    }
}

/// Per-step record; heavy per-level material only under full recording.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    /// Determinant-ratio indicator over all levels and both series.
    pub indicator: bool,
    /// Pseudo-reward along the trajectory.
    pub u: f64,
    pub hat_sigma0: f64,
    pub tilde_sigma0: f64,
    pub detail: Option<StepDetail>,
}

/// Per-level step material (flattened `m x d` feature blocks).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDetail {
    pub hat_phi: Vec<f64>,
    pub tilde_phi: Vec<f64>,
    pub hat_sigma: Vec<f64>,
    pub tilde_sigma: Vec<f64>,
    /// `||phi_m||` in the snapshot inverse metric, per level.
    pub hat_snap_norm: Vec<f64>,
    pub tilde_snap_norm: Vec<f64>,
    pub hat_var_est: Vec<f64>,
    pub hat_err_width: Vec<f64>,
    pub tilde_var_est: Vec<f64>,
    pub tilde_err_width: Vec<f64>,
}

/// Episode-level material retained only under full recording.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeDetail {
    /// `(H+1) x S` trajectory-uncertainty table of the episode's triple.
    pub hat_values: Vec<f64>,
    pub tilde_values: Vec<f64>,
    /// Post-episode boundary estimates, flattened `m x d`.
    pub hat_thetas: Vec<f64>,
    pub tilde_thetas: Vec<f64>,
    /// The episode's oracle parameter.
    pub oracle_theta: Vec<f64>,
    /// The episode's policy, flattened `h x s`.
    pub policy: Vec<usize>,
    /// The episode's pseudo-reward table, flattened `h x s x a`.
    pub pseudo_reward: Vec<f64>,
    /// Level-0 snapshots the episode ran under.
    pub hat_snapshot0: PrecisionState,
    pub tilde_snapshot0: PrecisionState,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub beta: f64,
    /// Optimistic start value of the chosen triple.
    pub hat_v1: f64,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub steps: Vec<StepRecord>,
    pub detail: Option<EpisodeDetail>,
}

/// Everything the planning phase and the diagnostics consume.
#[derive(Debug, Clone)]
pub struct ExplorationOutput {
    /// Tilde-series level-0 ridge estimate at the final boundary; the
    /// default planning parameter.
    pub ridge_theta: Vec<f64>,
    /// The final episode's oracle parameter (the literal reading of the
    /// planning line); selectable for planning instead of the ridge estimate.
    pub oracle_theta: Vec<f64>,
    pub confidence: ConfidenceSet,
    pub records: Vec<EpisodeRecord>,
    /// Count of episodes whose final step indicator failed.
    pub g_count: usize,
    pub beta_final: f64,
    pub moment_levels: usize,
    pub hat_bank: MomentBank,
    pub tilde_bank: MomentBank,
}

/// Runs the exploration phase. Only the feature view and the transition
/// sampler of `mdp` are touched; the true parameter never enters the loop.
pub fn run_exploration(mdp: &LinearMixtureMdp, cfg: &ExplorerConfig) -> Result<ExplorationOutput> {
    let view = mdp.view();
    cfg.check(&view)?;
    let report = crate::mdp::validate(mdp);
    if !report.is_valid() {
        return Err(invalid(format!(
            "instance fails validation with {} violations; first: {}",
            report.violations.len(),
            report.violations[0]
        )));
    }

    let d = view.dim;
    let ns = view.num_states;
    let na = view.num_actions;
    let h_len = view.horizon;
    let m_levels = cfg.moment_levels;
    let full = cfg.record_level == RecordLevel::Full;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut hat_bank = MomentBank::new(m_levels, d, cfg.lambda)?;
    let mut tilde_bank = MomentBank::new(m_levels, d, cfg.lambda)?;
    let mut confidence = ConfidenceSet::new(d, cfg.norm_bound, cfg.constraint_window);
    let mut prev_theta: Option<Vec<f64>> = None;
    let mut records: Vec<EpisodeRecord> = Vec::with_capacity(cfg.episodes);
    let mut g_count = 0usize;

    let mut hat_phis = vec![vec![0.0; d]; m_levels];
    let mut tilde_phis = vec![vec![0.0; d]; m_levels];
    let mut hpow = vec![0.0; ns];
    let mut tpow = vec![0.0; ns];
    let mut scratch = vec![0.0; d];

    for k in 1..=cfg.episodes {
        let beta_k = cfg.beta_at(k);

        let episode_snap_hat0 = full.then(|| hat_bank.snapshot[0].clone());
        let episode_snap_tilde0 = full.then(|| tilde_bank.snapshot[0].clone());

        let (theta_k, policy_k, reward_k, tables, hat_v1) = match cfg.strategy {
            ExplorationStrategy::Optimistic | ExplorationStrategy::UnitWeights => {
                let ctx = OracleContext {
                    view: &view,
                    confidence: &confidence,
                    hat_snapshot0: &hat_bank.snapshot[0],
                    tilde_snapshot0: &tilde_bank.snapshot[0],
                    hat_theta0: &hat_bank.thetas[0],
                    tilde_theta0: &tilde_bank.thetas[0],
                    prev_theta: prev_theta.as_deref(),
                    beta: beta_k,
                    episode: k,
                    n_theta: cfg.n_theta,
                    t_oracle: cfg.t_oracle,
                };
                match oracle_argmax(&ctx, &mut rng) {
                    Ok(res) => (
                        res.theta,
                        res.policy,
                        res.pseudo_reward,
                        res.tables,
                        res.hat_value,
                    ),
                    Err(err) => {
                        if let (RfeError::InfeasibleConfidenceSet { .. }, Some(dir)) =
                            (&err, &cfg.abort_snapshot_dir)
                        {
                            let path = dir.join(format!("abort_episode_{k}.json"));
                            let _ = write_checkpoint(
                                &path,
                                &hat_bank,
                                &tilde_bank,
                                &confidence,
                                k,
                                cfg.lambda,
                            );
                        }
                        return Err(err);
                    }
                }
            }
            ExplorationStrategy::UniformRandom => {
                let count = h_len * ns * na;
                let idx = (k - 1) % count;
                let reward = RewardFunction::indicator(
                    h_len,
                    ns,
                    na,
                    idx / (ns * na),
                    (idx % (ns * na)) / na,
                    idx % na,
                );
                let theta = tilde_bank.thetas[0].clone();
                let actions: Vec<usize> = (0..h_len * ns).map(|_| rng.gen_range(0..na)).collect();
                let policy = Policy::new(h_len, ns, actions)?;
                let tables = pseudo_value_tables(
                    &view,
                    &theta,
                    &policy,
                    &reward,
                    &hat_bank.snapshot[0],
                    &tilde_bank.snapshot[0],
                    beta_k,
                );
                let v1 = tables.hat[view.initial_state];
                (theta, policy, reward, tables, v1)
            }
        };

        let mut s = view.initial_state;
        let mut states = Vec::with_capacity(h_len + 1);
        let mut actions = Vec::with_capacity(h_len);
        let mut steps = Vec::with_capacity(h_len);
        states.push(s);

        for h in 0..h_len {
            let a = policy_k.at(h, s);

            let mut indicator = true;
            for m in 0..m_levels {
                if !det_ratio_within(
                    &hat_bank.snapshot[m],
                    &hat_bank.running[m],
                    INDICATOR_THRESHOLD,
                )? || !det_ratio_within(
                    &tilde_bank.snapshot[m],
                    &tilde_bank.running[m],
                    INDICATOR_THRESHOLD,
                )? {
                    indicator = false;
                    break;
                }
            }
            if h == h_len - 1 && !indicator {
                g_count += 1;
            }

            let s_next = mdp.sample_next(s, a, &mut rng);

            let u = pseudo_reward_u(
                &tilde_bank.snapshot[0],
                beta_k,
                &view,
                &tables.tilde[h * ns..(h + 1) * ns],
                s,
                a,
                &mut scratch,
            );

            hpow.copy_from_slice(&tables.hat[(h + 1) * ns..(h + 2) * ns]);
            tpow.copy_from_slice(&tables.tilde[(h + 1) * ns..(h + 2) * ns]);
            let mut hat_resp = vec![0.0; m_levels];
            let mut tilde_resp = vec![0.0; m_levels];
            for m in 0..m_levels {
                view.phi_v_into(s, a, &hpow, &mut hat_phis[m]);
                view.phi_v_into(s, a, &tpow, &mut tilde_phis[m]);
                hat_resp[m] = hpow[s_next];
                tilde_resp[m] = tpow[s_next];
                for v in hpow.iter_mut() {
                    *v *= *v;
                }
                for v in tpow.iter_mut() {
                    *v *= *v;
                }
            }

            let hat_home = home(&HomeInputs {
                features: &hat_phis,
                thetas: &hat_bank.thetas,
                running: &hat_bank.running,
                snapshots: &hat_bank.snapshot,
                beta: beta_k,
                alpha: cfg.alpha,
                gamma: cfg.gamma,
            })?;
            let tilde_home = home(&HomeInputs {
                features: &tilde_phis,
                thetas: &tilde_bank.thetas,
                running: &tilde_bank.running,
                snapshots: &tilde_bank.snapshot,
                beta: beta_k,
                alpha: cfg.alpha,
                gamma: cfg.gamma,
            })?;
            let unit = cfg.strategy == ExplorationStrategy::UnitWeights;
            let hat_sigmas: Vec<f64> = if unit {
                vec![1.0; m_levels]
            } else {
                hat_home.sigmas.clone()
            };
            let tilde_sigmas: Vec<f64> = if unit {
                vec![1.0; m_levels]
            } else {
                tilde_home.sigmas.clone()
            };

            let detail = full.then(|| {
                let mut hat_phi = Vec::with_capacity(m_levels * d);
                let mut tilde_phi = Vec::with_capacity(m_levels * d);
                let mut hat_snap_norm = Vec::with_capacity(m_levels);
                let mut tilde_snap_norm = Vec::with_capacity(m_levels);
                for m in 0..m_levels {
                    hat_phi.extend_from_slice(&hat_phis[m]);
                    tilde_phi.extend_from_slice(&tilde_phis[m]);
                    hat_snap_norm.push(hat_bank.snapshot[m].inv_norm(&hat_phis[m]));
                    tilde_snap_norm.push(tilde_bank.snapshot[m].inv_norm(&tilde_phis[m]));
                }
                StepDetail {
                    hat_phi,
                    tilde_phi,
                    hat_sigma: hat_sigmas.clone(),
                    tilde_sigma: tilde_sigmas.clone(),
                    hat_snap_norm,
                    tilde_snap_norm,
                    hat_var_est: hat_home.var_estimates.clone(),
                    hat_err_width: hat_home.error_widths.clone(),
                    tilde_var_est: tilde_home.var_estimates.clone(),
                    tilde_err_width: tilde_home.error_widths.clone(),
                }
            });

            for m in 0..m_levels {
                let w = 1.0 / (hat_sigmas[m] * hat_sigmas[m]);
                hat_bank.running[m].rank_one_update(&hat_phis[m], w, hat_resp[m])?;
                let w = 1.0 / (tilde_sigmas[m] * tilde_sigmas[m]);
                tilde_bank.running[m].rank_one_update(&tilde_phis[m], w, tilde_resp[m])?;
            }

            steps.push(StepRecord {
                state: s,
                action: a,
                next_state: s_next,
                indicator,
                u,
                hat_sigma0: hat_sigmas[0],
                tilde_sigma0: tilde_sigmas[0],
                detail,
            });
            states.push(s_next);
            actions.push(a);
            s = s_next;
        }

        hat_bank.freeze_boundary();
        tilde_bank.freeze_boundary();
        let beta_next = cfg.beta_at(k + 1);
        for m in 0..m_levels {
            confidence.push(
                ConstraintMeta {
                    episode: k + 1,
                    series: Series::Hat,
                    level: m,
                },
                &hat_bank.thetas[m],
                hat_bank.snapshot[m].sigma(),
                beta_next,
            );
            confidence.push(
                ConstraintMeta {
                    episode: k + 1,
                    series: Series::Tilde,
                    level: m,
                },
                &tilde_bank.thetas[m],
                tilde_bank.snapshot[m].sigma(),
                beta_next,
            );
        }

        let detail = full.then(|| EpisodeDetail {
            hat_values: tables.hat.clone(),
            tilde_values: tables.tilde.clone(),
            hat_thetas: hat_bank.thetas.concat(),
            tilde_thetas: tilde_bank.thetas.concat(),
            oracle_theta: theta_k.clone(),
            policy: policy_k.table().to_vec(),
            pseudo_reward: reward_k.values().to_vec(),
            hat_snapshot0: episode_snap_hat0.expect("captured under full recording"),
            tilde_snapshot0: episode_snap_tilde0.expect("captured under full recording"),
        });
        records.push(EpisodeRecord {
            episode: k,
            beta: beta_k,
            hat_v1,
            states,
            actions,
            steps,
            detail,
        });
        prev_theta = Some(theta_k);
    }

    Ok(ExplorationOutput {
        ridge_theta: tilde_bank.thetas[0].clone(),
        oracle_theta: prev_theta.expect("at least one episode"),
        confidence,
        records,
        g_count,
        beta_final: cfg.beta_at(cfg.episodes),
        moment_levels: m_levels,
        hat_bank,
        tilde_bank,
    })
}

// ---------------------------------------------------------------------------
// Run-resume checkpointing
// ---------------------------------------------------------------------------

/// On-disk snapshot of both moment banks (flat numeric records) plus the
/// constraint list.
#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointDoc {
    pub version: String,
    pub dim: usize,
    pub moment_levels: usize,
    pub lambda: f64,
    pub episodes_done: usize,
    /// Per level: `[dim, lambda, sigma row-major, b]`.
    pub hat_records: Vec<Vec<f64>>,
    pub tilde_records: Vec<Vec<f64>>,
    pub hat_thetas: Vec<Vec<f64>>,
    pub tilde_thetas: Vec<Vec<f64>>,
    pub confidence: ConfidenceSet,
}

pub const CHECKPOINT_VERSION: &str = "rfe-checkpoint-v1";

pub fn write_checkpoint(
    path: &std::path::Path,
    hat_bank: &MomentBank,
    tilde_bank: &MomentBank,
    confidence: &ConfidenceSet,
    episodes_done: usize,
    lambda: f64,
) -> Result<()> {
    let doc = CheckpointDoc {
        version: CHECKPOINT_VERSION.to_string(),
        dim: confidence.dim(),
        moment_levels: hat_bank.running.len(),
        lambda,
        episodes_done,
        hat_records: hat_bank.running.iter().map(|p| p.to_record()).collect(),
        tilde_records: tilde_bank.running.iter().map(|p| p.to_record()).collect(),
        hat_thetas: hat_bank.thetas.clone(),
        tilde_thetas: tilde_bank.thetas.clone(),
        confidence: confidence.clone(),
    };
    crate::mdp::io::write_json(path, &doc)
}

pub fn read_checkpoint(
    path: &std::path::Path,
) -> Result<(MomentBank, MomentBank, ConfidenceSet, usize)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("read {}: {e}", path.display())))?;
    let doc: CheckpointDoc = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("parse {}: {e}", path.display())))?;
    if doc.version != CHECKPOINT_VERSION {
        return Err(invalid(format!(
            "unknown checkpoint version {}",
            doc.version
        )));
    }
    let restore = |records: &[Vec<f64>], thetas: &[Vec<f64>]| -> Result<MomentBank> {
        let running: Vec<PrecisionState> = records
            .iter()
            .map(|r| PrecisionState::from_record(r))
            .collect::<Result<_>>()?;
        Ok(MomentBank {
            snapshot: running.clone(),
            thetas: thetas.to_vec(),
            running,
        })
    };
    let hat = restore(&doc.hat_records, &doc.hat_thetas)?;
    let tilde = restore(&doc.tilde_records, &doc.tilde_thetas)?;
    Ok((hat, tilde, doc.confidence, doc.episodes_done))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::random::random_instance;

    fn tiny_config(mdp: &LinearMixtureMdp, episodes: usize, seed: u64) -> ExplorerConfig {
        let mut cfg = ExplorerConfig::for_instance(&mdp.view(), episodes, 0.1, seed);
        cfg.n_theta = 2;
        cfg.t_oracle = 1;
        cfg
    }

    #[test]
    fn beta_schedule_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mdp = random_instance(4, 3, 4, 8, &mut rng);
        let cfg = ExplorerConfig::for_instance(&mdp.view(), 16, 0.1, 0);
        // sqrt(lambda)*B = sqrt(d) under the theorem settings
        let tail = cfg.lambda.sqrt() * cfg.norm_bound;
        assert!((tail - (cfg.dim as f64).sqrt()).abs() < 1e-12);
        // strictly increasing in k
        let b1 = cfg.beta_at(1);
        let b2 = cfg.beta_at(2);
        let b4 = cfg.beta_at(4);
        assert!(b1 < b2 && b2 < b4);
        // direct transcription for one k
        let k = 3.0f64;
        let h = cfg.horizon as f64;
        let d = cfg.dim as f64;
        let eta = (1.0 + k * h / (cfg.alpha * cfg.alpha * d * cfg.lambda)).ln();
        let inner = ((cfg.gamma * cfg.gamma / cfg.alpha).ln() + 1.0).max(1.0);
        let tau = (32.0 * inner * k * k * h * h / cfg.delta).ln();
        let expect = 12.0 * (d * eta * tau).sqrt() + 30.0 * tau / (cfg.gamma * cfg.gamma) + tail;
        assert!((cfg.beta_at(3) - expect).abs() < 1e-12);
    }

    #[test]
    fn moment_count_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mdp = random_instance(3, 2, 3, 10, &mut rng);
        let cfg = ExplorerConfig::for_instance(&mdp.view(), 256, 0.1, 0);
        let expect = (7.0 * 256.0 * 10.0f64).ln() / std::f64::consts::LN_2;
        assert_eq!(cfg.moment_levels, expect.ceil() as usize);
    }

    #[test]
    fn deterministic_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mdp = random_instance(3, 2, 3, 4, &mut rng);
        let cfg = tiny_config(&mdp, 4, 99);
        let out1 = run_exploration(&mdp, &cfg).unwrap();
        let out2 = run_exploration(&mdp, &cfg).unwrap();
        assert_eq!(out1.ridge_theta, out2.ridge_theta);
        assert_eq!(out1.oracle_theta, out2.oracle_theta);
        assert_eq!(out1.g_count, out2.g_count);
        for (a, b) in out1.records.iter().zip(out2.records.iter()) {
            assert_eq!(a.states, b.states);
            assert_eq!(a.actions, b.actions);
            assert_eq!(a.hat_v1, b.hat_v1);
        }
    }

    #[test]
    fn single_episode_deterministic_kernel_matches_batch_regression() {
        // single action, deterministic kernel: K=1 episode of H steps
        let (ns, d, h_len) = (2, 2, 3);
        let mut features = vec![0.0; ns * 1 * ns * d];
        let mut set = |s: usize, sn: usize, v: [f64; 2]| {
            let base = ((s) * ns + sn) * d;
            features[base] = v[0];
            features[base + 1] = v[1];
        };
        // s0 -> s1, s1 -> s0 deterministically under theta* = (1, 0)
        set(0, 1, [1.0, 0.0]);
        set(1, 0, [1.0, 0.0]);
        let mdp = LinearMixtureMdp::new(ns, 1, d, h_len, features, vec![1.0, 0.0], 2.0, 0).unwrap();
        let mut cfg = tiny_config(&mdp, 1, 5);
        cfg.moment_levels = 2;
        let out = run_exploration(&mdp, &cfg).unwrap();

        // replay the recorded triples through a from-scratch batch solve
        let rec = &out.records[0];
        let detail = rec.detail.as_ref().unwrap();
        for m in 0..2 {
            let mut gram = vec![0.0; d * d];
            for i in 0..d {
                gram[i * d + i] = cfg.lambda;
            }
            let mut rhs = vec![0.0; d];
            for (h, step) in rec.steps.iter().enumerate() {
                let sd = step.detail.as_ref().unwrap();
                let phi = &sd.tilde_phi[m * d..(m + 1) * d];
                let w = 1.0 / (sd.tilde_sigma[m] * sd.tilde_sigma[m]);
                let pow = 1usize << m;
                let y = detail.tilde_values[(h + 1) * ns + step.next_state].powi(pow as i32);
                for i in 0..d {
                    for j in 0..d {
                        gram[i * d + j] += w * phi[i] * phi[j];
                    }
                    rhs[i] += w * y * phi[i];
                }
            }
            // solve 2x2 system directly
            let det = gram[0] * gram[3] - gram[1] * gram[2];
            let sol = [
                (gram[3] * rhs[0] - gram[1] * rhs[1]) / det,
                (gram[0] * rhs[1] - gram[2] * rhs[0]) / det,
            ];
            let got = &detail.tilde_thetas[m * d..(m + 1) * d];
            for i in 0..d {
                assert!(
                    (got[i] - sol[i]).abs() <= 1e-8 * sol[i].abs().max(1.0),
                    "level {m} component {i}: {} vs {}",
                    got[i],
                    sol[i]
                );
            }
        }
    }

    #[test]
    fn constraints_accumulate_two_per_level_per_episode() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mdp = random_instance(3, 2, 3, 3, &mut rng);
        let cfg = tiny_config(&mdp, 3, 1);
        let out = run_exploration(&mdp, &cfg).unwrap();
        assert_eq!(out.confidence.len(), 3 * 2 * cfg.moment_levels);
        // responses bounded and weights floored
        for rec in &out.records {
            for step in &rec.steps {
                assert!(step.hat_sigma0 >= cfg.alpha - 1e-12);
                assert!(step.tilde_sigma0 >= cfg.alpha - 1e-12);
            }
            let detail = rec.detail.as_ref().unwrap();
            for v in detail.hat_values.iter().chain(detail.tilde_values.iter()) {
                assert!((0.0..=1.0).contains(v));
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mdp = random_instance(3, 2, 3, 3, &mut rng);
        let cfg = tiny_config(&mdp, 2, 11);
        let out = run_exploration(&mdp, &cfg).unwrap();
        let dir = std::env::temp_dir().join("rfe_checkpoint_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ckpt.json");
        write_checkpoint(
            &path,
            &out.hat_bank,
            &out.tilde_bank,
            &out.confidence,
            2,
            cfg.lambda,
        )
        .unwrap();
        let (hat, tilde, conf, done) = read_checkpoint(&path).unwrap();
        assert_eq!(done, 2);
        assert_eq!(conf.len(), out.confidence.len());
        for (a, b) in hat.running.iter().zip(out.hat_bank.running.iter()) {
            assert_eq!(a.sigma(), b.sigma());
            assert_eq!(a.b(), b.b());
        }
        assert_eq!(tilde.thetas, out.tilde_bank.thetas);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn uniform_strategy_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mdp = random_instance(3, 2, 3, 4, &mut rng);
        let mut cfg = tiny_config(&mdp, 3, 21);
        cfg.strategy = ExplorationStrategy::UniformRandom;
        let out = run_exploration(&mdp, &cfg).unwrap();
        assert_eq!(out.records.len(), 3);
    }

    #[test]
    fn unit_weight_strategy_fixes_sigmas() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mdp = random_instance(3, 2, 3, 4, &mut rng);
        let mut cfg = tiny_config(&mdp, 2, 21);
        cfg.strategy = ExplorationStrategy::UnitWeights;
        let out = run_exploration(&mdp, &cfg).unwrap();
        for rec in &out.records {
            for step in &rec.steps {
                assert_eq!(step.hat_sigma0, 1.0);
                assert_eq!(step.tilde_sigma0, 1.0);
            }
        }
    }
}
