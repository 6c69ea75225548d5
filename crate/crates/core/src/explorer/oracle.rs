//! Approximate per-episode optimization of `(policy, theta, reward)`.
//!
//! The exact joint argmax over the confidence set, the bounded reward class
//! and all policies is intractable; this oracle scores a finite candidate
//! grid by the optimistic start value and returns the best triple. Rewards
//! come from the indicator family plus the zero reward; parameters come from
//! projections of the two regression estimates, the previous episode's
//! winner, and boundary samples of the newest ellipsoid. The indicator grid
//! is enumerated from an episode-rotated offset so saturated start values
//! (ties) cycle through targets instead of locking onto one.

use rand::Rng;

use crate::error::{Result, RfeError};
use crate::explorer::confidence::ConfidenceSet;
use crate::explorer::recursion::{greedy_pseudo_value_tables, ValueTables};
use crate::mdp::{FeatureView, Policy, RewardFunction};
use crate::numkit::PrecisionState;

/// Winning triple with its evaluated tables.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub theta: Vec<f64>,
    pub policy: Policy,
    pub pseudo_reward: RewardFunction,
    pub tables: ValueTables,
    /// Optimistic start value of the winning triple.
    pub hat_value: f64,
}

pub struct OracleContext<'a> {
    pub view: &'a FeatureView<'a>,
    pub confidence: &'a ConfidenceSet,
    pub hat_snapshot0: &'a PrecisionState,
    pub tilde_snapshot0: &'a PrecisionState,
    /// Boundary estimate of the hat series, level 0.
    pub hat_theta0: &'a [f64],
    /// Boundary estimate of the tilde series, level 0.
    pub tilde_theta0: &'a [f64],
    pub prev_theta: Option<&'a [f64]>,
    pub beta: f64,
    pub episode: usize,
    pub n_theta: usize,
    pub t_oracle: usize,
}

/// Number of reward candidates: the zero reward plus all indicators.
fn reward_count(view: &FeatureView<'_>) -> usize {
    1 + view.horizon * view.num_states * view.num_actions
}

/// Candidate `idx` in fixed order: 0 is the zero reward, the rest decode to
/// `1{h = h*, s = s*, a = a*}`.
fn reward_candidate(view: &FeatureView<'_>, idx: usize) -> RewardFunction {
    let (ns, na, h_len) = (view.num_states, view.num_actions, view.horizon);
    if idx == 0 {
        RewardFunction::zero(h_len, ns, na)
    } else {
        let flat = idx - 1;
        let h_star = flat / (ns * na);
        let rem = flat % (ns * na);
        RewardFunction::indicator(h_len, ns, na, h_star, rem / na, rem % na)
    }
}

fn push_unique(cands: &mut Vec<Vec<f64>>, theta: Vec<f64>) {
    if !cands.iter().any(|c| c == &theta) {
        cands.push(theta);
    }
}

pub fn oracle_argmax(ctx: &OracleContext<'_>, rng: &mut impl Rng) -> Result<OracleResult> {
    let mut thetas: Vec<Vec<f64>> = Vec::new();
    let projected_hat = ctx.confidence.project(ctx.hat_theta0);
    let projected_tilde = ctx.confidence.project(ctx.tilde_theta0);
    if let Some(t) = projected_hat.clone() {
        push_unique(&mut thetas, t);
    }
    if let Some(t) = projected_tilde {
        push_unique(&mut thetas, t);
    }
    if let Some(prev) = ctx.prev_theta {
        if ctx.confidence.contains(prev) {
            push_unique(&mut thetas, prev.to_vec());
        }
    }
    for pt in ctx.confidence.sample_boundary_members(ctx.n_theta, rng) {
        push_unique(&mut thetas, pt);
    }
    if thetas.is_empty() {
        return Err(RfeError::InfeasibleConfidenceSet {
            episode: ctx.episode,
            detail: "no boundary sample passed membership and alternating projection failed"
                .to_string(),
        });
    }

    let count = reward_count(ctx.view);
    let offset = (ctx.episode - 1) % count;
    let s1 = ctx.view.initial_state;
    let ns = ctx.view.num_states;

    let mut best: Option<(f64, usize, Vec<f64>, Policy, ValueTables)> = None;
    for theta in &thetas {
        for i in 0..count {
            let reward_idx = (offset + i) % count;
            let reward = reward_candidate(ctx.view, reward_idx);
            let (policy, tables) = greedy_pseudo_value_tables(
                ctx.view,
                theta,
                &reward,
                ctx.hat_snapshot0,
                ctx.tilde_snapshot0,
                ctx.beta,
            );
            let v1 = tables.hat[s1];
            if best.as_ref().map_or(true, |(bv, ..)| v1 > *bv) {
                best = Some((v1, reward_idx, theta.clone(), policy, tables));
            }
        }
    }
    let (mut best_v1, best_reward_idx, mut best_theta, mut best_policy, mut best_tables) =
        best.expect("candidate grid is non-empty");
    let best_reward = reward_candidate(ctx.view, best_reward_idx);

    // refinement: push theta along the start stage's optimistic feature
    // direction, project back into the set, keep strict improvements
    let mut phi = vec![0.0; ctx.view.dim];
    for round in 0..ctx.t_oracle {
        let a1 = best_policy.at(0, s1);
        ctx.view
            .phi_v_into(s1, a1, &best_tables.hat[ns..2 * ns], &mut phi);
        let dir_norm = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if dir_norm < 1e-12 {
            break;
        }
        let scale = ctx.view.norm_bound / dir_norm * 0.5f64.powi(round as i32);
        for sign in [1.0, -1.0] {
            let moved: Vec<f64> = best_theta
                .iter()
                .zip(phi.iter())
                .map(|(t, g)| t + sign * scale * g)
                .collect();
            if let Some(cand) = ctx.confidence.project(&moved) {
                let (policy, tables) = greedy_pseudo_value_tables(
                    ctx.view,
                    &cand,
                    &best_reward,
                    ctx.hat_snapshot0,
                    ctx.tilde_snapshot0,
                    ctx.beta,
                );
                let v1 = tables.hat[s1];
                if v1 > best_v1 {
                    best_v1 = v1;
                    best_theta = cand;
                    best_policy = policy;
                    best_tables = tables;
                }
            }
        }
    }

    Ok(OracleResult {
        theta: best_theta,
        policy: best_policy,
        pseudo_reward: best_reward,
        tables: best_tables,
        hat_value: best_v1,
    })
}
