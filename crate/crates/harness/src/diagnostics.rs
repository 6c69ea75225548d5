//! True-parameter diagnostics over completed exploration runs.
//!
//! With oracle access to the generating instance these passes recompute the
//! indicator-gated bonus sums, martingale increments and conditional
//! variances of both regression series, check the per-step optimism-gap and
//! variance-sandwich inequalities, verify the determinant-growth bound on
//! the indicator failures, and evaluate the exact value-difference identity
//! on enumerable instances.

use rfe_core::error::{invalid, Result};
use rfe_core::explorer::{EpisodeRecord, ExplorationOutput, ExplorerConfig};
use rfe_core::mdp::{LinearMixtureMdp, Policy, RewardFunction};
use rfe_core::planner::{plan, policy_model_values, ClipMode};
use rfe_core::{optimal_value_and_policy, policy_value};

/// Float guard on non-strict inequalities.
const GAP_TOL: f64 = 1e-9;
const SANDWICH_TOL: f64 = 1e-12;

/// Outcome of one diagnostics pass; violations carry locations.
#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub moment_levels: usize,
    /// Final confidence radius used by the gated bonus sums.
    pub beta: f64,
    /// `log(1 + KH/(d lambda alpha^2))`.
    pub iota: f64,
    /// Count of episodes whose final-step indicator failed.
    pub g: usize,
    /// Deterministic bound `M d iota`.
    pub g_bound: f64,
    pub g_bound_violated: bool,
    /// Indicator-gated truncated bonus sums per level, both series.
    pub r_hat: Vec<f64>,
    pub r_tilde: Vec<f64>,
    /// Indicator-gated martingale increments per level.
    pub a_hat: Vec<f64>,
    pub a_tilde: Vec<f64>,
    /// Indicator-gated conditional variances per level.
    pub s_hat: Vec<f64>,
    pub s_tilde: Vec<f64>,
    /// `(episode, step, description)` entries.
    pub optimism_violations: Vec<(usize, usize, String)>,
    pub sandwich_violations: Vec<(usize, usize, String)>,
    /// Weights whose square fell below the true conditional variance.
    pub dominance_violations: Vec<(usize, usize, String)>,
    /// Max abs difference between the feature-route and kernel-route
    /// evaluations of the increment sums (two-pass consistency).
    pub route_divergence: f64,
}

impl DiagnosticsReport {
    pub fn clean(&self) -> bool {
        !self.g_bound_violated
            && self.optimism_violations.is_empty()
            && self.sandwich_violations.is_empty()
            && self.dominance_violations.is_empty()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Expectation of `table_row^(2^m)` under the true kernel at `(s,a)`.
fn kernel_moment(
    p: &[f64],
    ns: usize,
    na: usize,
    s: usize,
    a: usize,
    row: &[f64],
    pow: u32,
) -> f64 {
    let base = (s * na + a) * ns;
    let mut acc = 0.0;
    for sn in 0..ns {
        let mut v = row[sn];
        for _ in 0..pow {
            v *= v;
        }
        acc += p[base + sn] * v;
    }
    acc
}

/// Runs every record-level check. Requires full exploration records.
pub fn diagnostics_pass(
    mdp: &LinearMixtureMdp,
    out: &ExplorationOutput,
    cfg: &ExplorerConfig,
) -> Result<DiagnosticsReport> {
    let m_levels = out.moment_levels;
    let ns = mdp.num_states();
    let na = mdp.num_actions();
    let h_len = mdp.horizon();
    let k_total = out.records.len();
    let theta_star = mdp.theta_star();
    let p = mdp.transition_table();
    let beta = out.beta_final;
    let iota = (1.0
        + (k_total as f64 * h_len as f64) / (cfg.dim as f64 * cfg.lambda * cfg.alpha * cfg.alpha))
        .ln();

    let mut r_hat = vec![0.0; m_levels];
    let mut r_tilde = vec![0.0; m_levels];
    let mut a_hat = vec![0.0; m_levels];
    let mut a_tilde = vec![0.0; m_levels];
    let mut a_hat_feat = vec![0.0; m_levels];
    let mut a_tilde_feat = vec![0.0; m_levels];
    let mut s_hat = vec![0.0; m_levels];
    let mut s_tilde = vec![0.0; m_levels];
    let mut g = 0usize;
    let mut optimism_violations = Vec::new();
    let mut sandwich_violations = Vec::new();
    let mut dominance_violations = Vec::new();

    for rec in &out.records {
        let detail = rec
            .detail
            .as_ref()
            .ok_or_else(|| invalid("diagnostics need full exploration records"))?;
        let d = theta_star.len();
        if !rec.steps.iter().all(|st| st.detail.is_some()) {
            return Err(invalid("diagnostics need full step records"));
        }
        let last = rec.steps.last().expect("non-empty episode");
        if !last.indicator {
            g += 1;
        }
        for (h, step) in rec.steps.iter().enumerate() {
            let sd = step.detail.as_ref().expect("checked above");
            let gate = if step.indicator { 1.0 } else { 0.0 };
            let (s, a, sn) = (step.state, step.action, step.next_state);
            let hat_next = &detail.hat_values[(h + 1) * ns..(h + 2) * ns];
            let tilde_next = &detail.tilde_values[(h + 1) * ns..(h + 2) * ns];

            for m in 0..m_levels {
                r_hat[m] += gate * (beta * sd.hat_snap_norm[m]).min(1.0);
                r_tilde[m] += gate * (beta * sd.tilde_snap_norm[m]).min(1.0);

                let pow = m as u32;
                // two routes to [P V^{2^m}](s,a): recorded features against
                // theta*, and the kernel applied to the stored table
                let hat_mean_feat = dot(&sd.hat_phi[m * d..(m + 1) * d], theta_star);
                let tilde_mean_feat = dot(&sd.tilde_phi[m * d..(m + 1) * d], theta_star);
                let hat_mean = kernel_moment(&p, ns, na, s, a, hat_next, pow);
                let tilde_mean = kernel_moment(&p, ns, na, s, a, tilde_next, pow);

                let mut hat_real = hat_next[sn];
                let mut tilde_real = tilde_next[sn];
                for _ in 0..pow {
                    hat_real *= hat_real;
                    tilde_real *= tilde_real;
                }
                a_hat[m] += gate * (hat_mean - hat_real);
                a_tilde[m] += gate * (tilde_mean - tilde_real);
                a_hat_feat[m] += gate * (hat_mean_feat - hat_real);
                a_tilde_feat[m] += gate * (tilde_mean_feat - tilde_real);

                let hat_second = kernel_moment(&p, ns, na, s, a, hat_next, pow + 1);
                let tilde_second = kernel_moment(&p, ns, na, s, a, tilde_next, pow + 1);
                s_hat[m] += gate * (hat_second - hat_mean * hat_mean);
                s_tilde[m] += gate * (tilde_second - tilde_mean * tilde_mean);

                // variance sandwich against the recorded estimate and width,
                // plus weight dominance of the true conditional variance
                if m + 1 < m_levels {
                    let hat_true_var = hat_second - hat_mean * hat_mean;
                    let err = (hat_true_var - sd.hat_var_est[m]).abs();
                    if err > sd.hat_err_width[m] + SANDWICH_TOL {
                        sandwich_violations.push((
                            rec.episode,
                            h,
                            format!(
                                "hat level {m}: |{hat_true_var} - {}| > {}",
                                sd.hat_var_est[m], sd.hat_err_width[m]
                            ),
                        ));
                    }
                    let tilde_true_var = tilde_second - tilde_mean * tilde_mean;
                    let err = (tilde_true_var - sd.tilde_var_est[m]).abs();
                    if err > sd.tilde_err_width[m] + SANDWICH_TOL {
                        sandwich_violations.push((
                            rec.episode,
                            h,
                            format!(
                                "tilde level {m}: |{tilde_true_var} - {}| > {}",
                                sd.tilde_var_est[m], sd.tilde_err_width[m]
                            ),
                        ));
                    }
                    let hat_w = sd.hat_sigma[m] * sd.hat_sigma[m];
                    if hat_w < hat_true_var - SANDWICH_TOL {
                        dominance_violations.push((
                            rec.episode,
                            h,
                            format!("hat level {m}: weight^2 {hat_w} < variance {hat_true_var}"),
                        ));
                    }
                    let tilde_w = sd.tilde_sigma[m] * sd.tilde_sigma[m];
                    if tilde_w < tilde_true_var - SANDWICH_TOL {
                        dominance_violations.push((
                            rec.episode,
                            h,
                            format!(
                                "tilde level {m}: weight^2 {tilde_w} < variance {tilde_true_var}"
                            ),
                        ));
                    }
                }
            }

            // optimism gap: Vhat_h(s) - u - [P Vhat_{h+1}](s,a) bounded by
            // four truncated level-0 bonuses at the episode's own radius
            let v_here = detail.hat_values[h * ns + s];
            let p_next = kernel_moment(&p, ns, na, s, a, hat_next, 0);
            let lhs = v_here - step.u - p_next;
            let rhs = 4.0 * (rec.beta * sd.hat_snap_norm[0]).min(1.0);
            if lhs > rhs + GAP_TOL {
                optimism_violations.push((
                    rec.episode,
                    h,
                    format!("gap {lhs} exceeds bound {rhs}"),
                ));
            }
        }
    }

    let mut route_divergence = 0.0f64;
    for m in 0..m_levels {
        route_divergence = route_divergence
            .max((a_hat[m] - a_hat_feat[m]).abs())
            .max((a_tilde[m] - a_tilde_feat[m]).abs());
    }

    let g_bound = m_levels as f64 * cfg.dim as f64 * iota;
    Ok(DiagnosticsReport {
        moment_levels: m_levels,
        beta,
        iota,
        g,
        g_bound,
        g_bound_violated: (g as f64) > g_bound,
        r_hat,
        r_tilde,
        a_hat,
        a_tilde,
        s_hat,
        s_tilde,
        optimism_violations,
        sandwich_violations,
        dominance_violations,
        route_divergence,
    })
}

/// True iff the generating parameter satisfies every stored constraint.
pub fn coverage_holds(mdp: &LinearMixtureMdp, out: &ExplorationOutput) -> bool {
    out.confidence.contains(mdp.theta_star())
}

/// Per-reward suboptimality of planning with `theta` and evaluating the
/// planned policy under the true kernel.
pub fn measure_suboptimality(
    mdp: &LinearMixtureMdp,
    theta: &[f64],
    eval_rewards: &[RewardFunction],
) -> Result<Vec<f64>> {
    let view = mdp.view();
    let mut gaps = Vec::with_capacity(eval_rewards.len());
    for r in eval_rewards {
        let planned = plan(&view, theta, r, ClipMode::Unit)?;
        let achieved = policy_value(mdp, &planned.policy, r);
        let (v_star, _) = optimal_value_and_policy(mdp, r);
        gaps.push(v_star - achieved);
    }
    Ok(gaps)
}

/// Both sides of the exact value-difference identity for an estimated
/// parameter: the left side differences the unclipped model values, the
/// right side takes the exact trajectory-tree expectation of the truncated
/// increment recursion. Guarded to enumerable instances.
pub fn verify_value_difference_identity(
    mdp: &LinearMixtureMdp,
    theta: &[f64],
    policy: &Policy,
    r: &RewardFunction,
) -> Result<(f64, f64)> {
    let ns = mdp.num_states();
    let na = mdp.num_actions();
    let h_len = mdp.horizon();
    let paths = ((ns * na) as f64).powi(h_len as i32);
    if paths > 1e6 {
        return Err(invalid(format!(
            "trajectory tree too large to enumerate: (S*A)^H = {paths}"
        )));
    }
    let view = mdp.view();
    let v_theta = policy_model_values(&view, theta, policy, r, ClipMode::None);
    let v_true = policy_model_values(&view, mdp.theta_star(), policy, r, ClipMode::None);
    let s1 = mdp.initial_state();
    let lhs = v_theta[s1] - v_true[s1];

    // per-(h,s) increment (P_theta - P) V_{h+1}(.; theta) at the policy action
    let mut increments = vec![0.0; h_len * ns];
    let diff: Vec<f64> = theta
        .iter()
        .zip(mdp.theta_star().iter())
        .map(|(a, b)| a - b)
        .collect();
    for h in 0..h_len {
        for s in 0..ns {
            let a = policy.at(h, s);
            let phi = mdp.phi_v(s, a, &v_theta[(h + 1) * ns..(h + 2) * ns])?;
            increments[h * ns + s] = dot(&phi, &diff);
        }
    }

    let p = mdp.transition_table();
    // depth-first enumeration of all positive-probability state paths; the
    // truncated recursion folds backward along each realized path
    let mut rhs = 0.0;
    let mut stack_r = vec![0.0; h_len];
    fn walk(
        h: usize,
        s: usize,
        prob: f64,
        h_len: usize,
        ns: usize,
        na: usize,
        p: &[f64],
        policy: &Policy,
        increments: &[f64],
        stack_r: &mut Vec<f64>,
        rhs: &mut f64,
    ) {
        if h == h_len {
            let mut w = 0.0;
            for hh in (0..h_len).rev() {
                w = (stack_r[hh] + w).min(1.0);
            }
            *rhs += prob * w;
            return;
        }
        let a = policy.at(h, s);
        stack_r[h] = increments[h * ns + s];
        let base = (s * na + a) * ns;
        for sn in 0..ns {
            let q = p[base + sn];
            if q > 0.0 {
                walk(
                    h + 1,
                    sn,
                    prob * q,
                    h_len,
                    ns,
                    na,
                    p,
                    policy,
                    increments,
                    stack_r,
                    rhs,
                );
            }
        }
    }
    walk(
        0,
        s1,
        1.0,
        h_len,
        ns,
        na,
        &p,
        policy,
        &increments,
        &mut stack_r,
        &mut rhs,
    );
    Ok((lhs, rhs))
}

/// Evaluates the optimistic start value of frozen `(theta, policy, reward)`
/// probes under every recorded episode's snapshots; the sequences must be
/// non-increasing in the episode index. Returns the worst (most positive)
/// increase observed across probes and adjacent episode pairs.
pub fn probe_monotonicity(
    mdp: &LinearMixtureMdp,
    records: &[EpisodeRecord],
    probes: &[(Vec<f64>, Policy, RewardFunction)],
    betas_fixed: f64,
) -> Result<f64> {
    let view = mdp.view();
    let s1 = mdp.initial_state();
    let mut worst = f64::NEG_INFINITY;
    for (theta, policy, reward) in probes {
        let mut prev = f64::INFINITY;
        for rec in records {
            let detail = rec
                .detail
                .as_ref()
                .ok_or_else(|| invalid("probe evaluation needs full records"))?;
            let tables = rfe_core::explorer::pseudo_value_tables(
                &view,
                theta,
                policy,
                reward,
                &detail.hat_snapshot0,
                &detail.tilde_snapshot0,
                betas_fixed,
            );
            let v1 = tables.hat[s1];
            if prev.is_finite() {
                worst = worst.max(v1 - prev);
            }
            prev = v1;
        }
    }
    Ok(worst)
}
