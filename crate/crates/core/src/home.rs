//! High-order moment estimator: regression weights from variance estimates.
//!
//! Level `m` estimates the `2^m`-th moment of the value function. The weight
//! for level `m` combines an epistemic term `gamma^2 ||phi||_{Sigma^-1}` on
//! the running covariance with an aleatoric term: the clipped-moment variance
//! estimate plus its error width, both taken against the per-episode snapshot
//! covariances. The top level replaces the aleatoric term with its trivial
//! upper bound of 1.

use crate::error::{invalid, Result};
use crate::numkit::PrecisionState;

/// `[x]_{[0,1]} = min(1, max(0, x))`.
pub fn clip01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Per-step inputs for one series of `M` moment levels.
pub struct HomeInputs<'a> {
    /// `phi_{k,h,m}` for `m = 0..M-1`.
    pub features: &'a [Vec<f64>],
    /// Episode-boundary estimates `theta_{k,m}`.
    pub thetas: &'a [Vec<f64>],
    /// Running covariances `Sigma_{k,h,m}`.
    pub running: &'a [PrecisionState],
    /// Snapshot covariances frozen at the episode boundary.
    pub snapshots: &'a [PrecisionState],
    /// Confidence radius `beta_k`.
    pub beta: f64,
    /// Weight floor parameter; every weight satisfies `sigma^2 >= alpha^2`.
    pub alpha: f64,
    /// Epistemic scale.
    pub gamma: f64,
}

/// The `M` regression weights plus the intermediate estimates that produced
/// them (kept for diagnostics).
#[derive(Debug, Clone)]
pub struct HomeOutputs {
    /// `sigma_{k,h,m}` for `m = 0..M-1` (square roots, not variances).
    pub sigmas: Vec<f64>,
    /// Clipped-moment variance estimates for `m = 0..M-2`.
    pub var_estimates: Vec<f64>,
    /// Error widths `E_{k,h,m}` for `m = 0..M-2`.
    pub error_widths: Vec<f64>,
}

/// Variance estimate from two adjacent moment levels:
/// `[<phi_{m+1}, theta_{m+1}>]_{[0,1]} - [<phi_m, theta_m>]^2_{[0,1]}`.
/// May be negative; the weight floor keeps the final weight positive.
pub fn estimate_variance(phi_m: &[f64], theta_m: &[f64], phi_m1: &[f64], theta_m1: &[f64]) -> f64 {
    let second = clip01(dot(phi_m1, theta_m1));
    let first = clip01(dot(phi_m, theta_m));
    second - first * first
}

/// `[2 beta ||phi_m||]_{[0,1]} + [beta ||phi_{m+1}||]_{[0,1]}` under the
/// snapshot inverse metrics; lies in `[0, 2]`.
pub fn error_width(
    phi_m: &[f64],
    phi_m1: &[f64],
    snapshot_m: &PrecisionState,
    snapshot_m1: &PrecisionState,
    beta: f64,
) -> f64 {
    clip01(2.0 * beta * snapshot_m.inv_norm(phi_m)) + clip01(beta * snapshot_m1.inv_norm(phi_m1))
}

/// Runs the full weight recursion for one series.
pub fn home(inputs: &HomeInputs<'_>) -> Result<HomeOutputs> {
    let m_levels = inputs.features.len();
    if m_levels == 0 {
        return Err(invalid("need at least one moment level"));
    }
    if inputs.thetas.len() != m_levels
        || inputs.running.len() != m_levels
        || inputs.snapshots.len() != m_levels
    {
        return Err(invalid("moment level lists must share length M"));
    }
    let d = inputs.running[0].dim();
    for m in 0..m_levels {
        if inputs.features[m].len() != d || inputs.thetas[m].len() != d {
            return Err(invalid("feature/theta dimension mismatch"));
        }
    }

    let gamma_sq = inputs.gamma * inputs.gamma;
    let alpha_sq = inputs.alpha * inputs.alpha;
    let mut sigmas = Vec::with_capacity(m_levels);
    let mut var_estimates = Vec::with_capacity(m_levels.saturating_sub(1));
    let mut error_widths = Vec::with_capacity(m_levels.saturating_sub(1));

    for m in 0..m_levels - 1 {
        let vv = estimate_variance(
            &inputs.features[m],
            &inputs.thetas[m],
            &inputs.features[m + 1],
            &inputs.thetas[m + 1],
        );
        let e = error_width(
            &inputs.features[m],
            &inputs.features[m + 1],
            &inputs.snapshots[m],
            &inputs.snapshots[m + 1],
            inputs.beta,
        );
        // the epistemic term uses the first power of the norm, as defined
        let epistemic = gamma_sq * inputs.running[m].inv_norm(&inputs.features[m]);
        let sigma_sq = epistemic.max(vv + e).max(alpha_sq);
        sigmas.push(sigma_sq.sqrt());
        var_estimates.push(vv);
        error_widths.push(e);
    }
    let top = m_levels - 1;
    let epistemic = gamma_sq * inputs.running[top].inv_norm(&inputs.features[top]);
    let sigma_sq = epistemic.max(1.0).max(alpha_sq);
    sigmas.push(sigma_sq.sqrt());

    Ok(HomeOutputs {
        sigmas,
        var_estimates,
        error_widths,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}
