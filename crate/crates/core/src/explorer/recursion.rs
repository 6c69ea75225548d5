//! Exploration-driving pseudo-reward and truncated optimistic recursion.
//!
//! For a triple `(theta, pi, r)` two coupled tables are built backward from
//! the terminal stage:
//!
//! * the model value `V_h(s) = clip01(r_h(s, pi(s)) + <phi_{V_{h+1}}, theta>)`,
//! * the trajectory-uncertainty value
//!   `Vhat_h(s) = clamp01(u_h(s, pi(s)) + 2 beta ||phi_{Vhat_{h+1}}||_hat + <phi_{Vhat_{h+1}}, theta>)`,
//!
//! where the pseudo-reward `u_h(s,a) = min(1, beta ||phi_{V_h}(s,a)||_tilde)`
//! reads the model-value table at the same stage and both norms are taken in
//! the inverse metrics of the previous episode's snapshot covariances.

use crate::mdp::{FeatureView, Policy, RewardFunction};
use crate::numkit::PrecisionState;

/// Both tables, `(H+1) x S` flat with a zero terminal row.
#[derive(Debug, Clone)]
pub struct ValueTables {
    pub hat: Vec<f64>,
    pub tilde: Vec<f64>,
}

impl ValueTables {
    pub fn hat_at(&self, num_states: usize, h: usize, s: usize) -> f64 {
        self.hat[h * num_states + s]
    }

    pub fn tilde_at(&self, num_states: usize, h: usize, s: usize) -> f64 {
        self.tilde[h * num_states + s]
    }
}

/// `u = min(1, beta ||phi_V(s,a)||)` in the tilde-snapshot inverse metric.
pub fn pseudo_reward_u(
    tilde_snapshot0: &PrecisionState,
    beta: f64,
    view: &FeatureView<'_>,
    value_row: &[f64],
    s: usize,
    a: usize,
    scratch: &mut [f64],
) -> f64 {
    view.phi_v_into(s, a, value_row, scratch);
    (beta * tilde_snapshot0.inv_norm(scratch)).min(1.0)
}

/// Literal evaluation of both tables for a FIXED policy.
pub fn pseudo_value_tables(
    view: &FeatureView<'_>,
    theta: &[f64],
    policy: &Policy,
    reward: &RewardFunction,
    hat_snapshot0: &PrecisionState,
    tilde_snapshot0: &PrecisionState,
    beta: f64,
) -> ValueTables {
    let (ns, h_len) = (view.num_states, view.horizon);
    let mut hat = vec![0.0; (h_len + 1) * ns];
    let mut tilde = vec![0.0; (h_len + 1) * ns];
    let mut phi = vec![0.0; view.dim];
    for h in (0..h_len).rev() {
        for s in 0..ns {
            let a = policy.at(h, s);
            let (t_row, t_next) = split_rows(&mut tilde, ns, h);
            view.phi_v_into(s, a, t_next, &mut phi);
            t_row[s] = (reward.get(h, s, a) + dot(&phi, theta)).clamp(0.0, 1.0);
        }
        for s in 0..ns {
            let a = policy.at(h, s);
            let u = {
                let t_row = &tilde[h * ns..(h + 1) * ns];
                view.phi_v_into(s, a, t_row, &mut phi);
                (beta * tilde_snapshot0.inv_norm(&phi)).min(1.0)
            };
            let (h_row, h_next) = split_rows(&mut hat, ns, h);
            view.phi_v_into(s, a, h_next, &mut phi);
            let bonus = 2.0 * beta * hat_snapshot0.inv_norm(&phi);
            h_row[s] = (u + bonus + dot(&phi, theta)).clamp(0.0, 1.0);
        }
    }
    ValueTables { hat, tilde }
}

/// Builds a greedy policy inside the backward pass and returns the literal
/// tables under that policy. At each stage the action is scored with the
/// next-stage model values standing in for the pseudo-reward argument (the
/// same-stage table only exists once the stage's actions are fixed); the
/// stored stage values are then recomputed literally for the chosen actions.
pub fn greedy_pseudo_value_tables(
    view: &FeatureView<'_>,
    theta: &[f64],
    reward: &RewardFunction,
    hat_snapshot0: &PrecisionState,
    tilde_snapshot0: &PrecisionState,
    beta: f64,
) -> (Policy, ValueTables) {
    let (ns, na, h_len) = (view.num_states, view.num_actions, view.horizon);
    let mut policy = Policy::uniform_action(h_len, ns, 0);
    let mut hat = vec![0.0; (h_len + 1) * ns];
    let mut tilde = vec![0.0; (h_len + 1) * ns];
    let mut phi = vec![0.0; view.dim];
    for h in (0..h_len).rev() {
        {
            let t_next = &tilde[(h + 1) * ns..(h + 2) * ns];
            let h_next = &hat[(h + 1) * ns..(h + 2) * ns];
            for s in 0..ns {
                let mut best_score = f64::NEG_INFINITY;
                let mut best_a = 0;
                for a in 0..na {
                    view.phi_v_into(s, a, t_next, &mut phi);
                    let u_proxy = (beta * tilde_snapshot0.inv_norm(&phi)).min(1.0);
                    view.phi_v_into(s, a, h_next, &mut phi);
                    let score =
                        u_proxy + 2.0 * beta * hat_snapshot0.inv_norm(&phi) + dot(&phi, theta);
                    if score > best_score {
                        best_score = score;
                        best_a = a;
                    }
                }
                policy.set(h, s, best_a);
            }
        }
        for s in 0..ns {
            let a = policy.at(h, s);
            let (t_row, t_next) = split_rows(&mut tilde, ns, h);
            view.phi_v_into(s, a, t_next, &mut phi);
            t_row[s] = (reward.get(h, s, a) + dot(&phi, theta)).clamp(0.0, 1.0);
        }
        for s in 0..ns {
            let a = policy.at(h, s);
            let u = {
                let t_row = &tilde[h * ns..(h + 1) * ns];
                view.phi_v_into(s, a, t_row, &mut phi);
                (beta * tilde_snapshot0.inv_norm(&phi)).min(1.0)
            };
            let (h_row, h_next) = split_rows(&mut hat, ns, h);
            view.phi_v_into(s, a, h_next, &mut phi);
            let bonus = 2.0 * beta * hat_snapshot0.inv_norm(&phi);
            h_row[s] = (u + bonus + dot(&phi, theta)).clamp(0.0, 1.0);
        }
    }
    (policy, ValueTables { hat, tilde })
}

/// Mutable stage row `h` plus shared next row `h+1`.
fn split_rows(table: &mut [f64], ns: usize, h: usize) -> (&mut [f64], &[f64]) {
    let (head, tail) = table.split_at_mut((h + 1) * ns);
    (&mut head[h * ns..], &tail[..ns])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}
