//! Planning against the learned linear model.
//!
//! Given the real reward and a parameter estimate, computes the output
//! policy by backward dynamic programming under the estimated kernel
//! `P_theta(s'|s,a) = <phi(s'|s,a), theta>`. Because the estimate induces a
//! signed measure, stage values are clipped; the clipping range is
//! selectable to support the reward-scale variants.

use crate::error::{invalid, Result};
use crate::mdp::{FeatureView, Policy, RewardFunction};

/// Per-stage value clipping applied under an estimated (signed) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipMode {
    /// Clip to `[0,1]` — the bounded-total-reward regime.
    Unit,
    /// Clip to `[0,H]` — the rescaled regime with trajectory totals up to H.
    Horizon,
    /// No clipping; used by identity checks on the raw linear recursion.
    None,
}

impl ClipMode {
    fn apply(self, x: f64, horizon: usize) -> f64 {
        match self {
            ClipMode::Unit => x.clamp(0.0, 1.0),
            ClipMode::Horizon => x.clamp(0.0, horizon as f64),
            ClipMode::None => x,
        }
    }
}

/// Planner output: the greedy policy and its model value table.
#[derive(Debug, Clone)]
pub struct PlanResult {
    pub policy: Policy,
    /// `(H+1) x S` table of model values, terminal row zero.
    pub model_values: Vec<f64>,
    pub model_value_at_start: f64,
}

/// Backward induction under the estimated kernel:
/// `Q_h(s,a) = r_h(s,a) + <phi_{V_{h+1}}(s,a), theta>`,
/// `V_h(s) = clip(max_a Q_h(s,a))`, ties to the smallest action index.
pub fn plan(
    view: &FeatureView<'_>,
    theta: &[f64],
    r: &RewardFunction,
    clip: ClipMode,
) -> Result<PlanResult> {
    if theta.len() != view.dim {
        return Err(invalid("theta length != d"));
    }
    if theta.iter().any(|x| !x.is_finite()) {
        return Err(invalid("non-finite theta"));
    }
    if r.horizon() != view.horizon
        || r.num_states() != view.num_states
        || r.num_actions() != view.num_actions
    {
        return Err(invalid("reward shape does not match the instance"));
    }
    let (ns, na, h_len) = (view.num_states, view.num_actions, view.horizon);
    let mut values = vec![0.0; (h_len + 1) * ns];
    let mut policy = Policy::uniform_action(h_len, ns, 0);
    let mut phi = vec![0.0; view.dim];
    for h in (0..h_len).rev() {
        let (head, tail) = values.split_at_mut((h + 1) * ns);
        let v_next = &tail[..ns];
        let v_row = &mut head[h * ns..(h + 1) * ns];
        for s in 0..ns {
            let mut best_q = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..na {
                view.phi_v_into(s, a, v_next, &mut phi);
                let q = r.get(h, s, a) + dot(&phi, theta);
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            v_row[s] = clip.apply(best_q, h_len);
            policy.set(h, s, best_a);
        }
    }
    let start = values[view.initial_state];
    Ok(PlanResult {
        model_values: values,
        model_value_at_start: start,
        policy,
    })
}

/// Model value table of a FIXED policy under the estimated kernel, with the
/// same stage clipping options. This is the `V_h(.; theta, pi, r)` recursion.
pub fn policy_model_values(
    view: &FeatureView<'_>,
    theta: &[f64],
    policy: &Policy,
    r: &RewardFunction,
    clip: ClipMode,
) -> Vec<f64> {
    let (ns, h_len) = (view.num_states, view.horizon);
    debug_assert_eq!(policy.horizon(), h_len);
    let mut values = vec![0.0; (h_len + 1) * ns];
    let mut phi = vec![0.0; view.dim];
    for h in (0..h_len).rev() {
        let (head, tail) = values.split_at_mut((h + 1) * ns);
        let v_next = &tail[..ns];
        let v_row = &mut head[h * ns..(h + 1) * ns];
        for s in 0..ns {
            let a = policy.at(h, s);
            view.phi_v_into(s, a, v_next, &mut phi);
            v_row[s] = clip.apply(r.get(h, s, a) + dot(&phi, theta), h_len);
        }
    }
    values
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}
