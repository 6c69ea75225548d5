//! Hard-to-learn three-state instance family.
//!
//! States `{x1, x2, x3}` with `x2, x3` absorbing; actions are sign vectors
//! `a in {-1,+1}^(d-1)`; from `x1` the chance of reaching the rewarding state
//! `x3` is `delta + <mu, a>` with `mu in {-Delta, +Delta}^(d-1)`, so the
//! learner must identify the sign pattern of `mu`. The reward pays `1/H` in
//! `x3`, keeping every trajectory total at most `(H-1)/H <= 1`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use crate::error::{invalid, Result};
use crate::mdp::{LinearMixtureMdp, RewardFunction};

/// Baseline reach probability of the rewarding state.
pub const HARD_DELTA0: f64 = 1.0 / 6.0;
/// Actions are enumerated exhaustively up to this many sign vectors; above
/// it the generator keeps a random subsample that always contains
/// `sign(mu)` and `-sign(mu)`.
pub const HARD_ACTION_CAP: usize = 1 << 12;

/// The constructed family's parameters.
#[derive(Debug, Clone)]
pub struct HardInstanceSpec {
    pub dim: usize,
    pub episode_budget: usize,
    pub norm_bound: f64,
    /// Baseline probability `delta = 1/6`.
    pub delta0: f64,
    /// Per-coordinate gap `Delta = sqrt(delta/K) / (4 sqrt(2))`.
    pub gap: f64,
    /// Sign pattern scaled by the gap, `mu in {-Delta, +Delta}^(d-1)`.
    pub mu: Vec<f64>,
    /// First-coordinate feature normalizer.
    pub alpha_n: f64,
    /// Sign-block feature normalizer.
    pub beta_n: f64,
    pub num_actions: usize,
}

/// Builds the hard instance for dimension `d`, planned episode budget `k`,
/// norm bound `b` and horizon `h`. The sign pattern `mu` is drawn from the
/// given seed.
pub fn hard_instance(
    d: usize,
    k: usize,
    b: f64,
    horizon: usize,
    seed: u64,
) -> Result<(LinearMixtureMdp, RewardFunction, HardInstanceSpec)> {
    if d < 2 {
        return Err(invalid("hard instance needs d >= 2"));
    }
    if k < 1 {
        return Err(invalid("hard instance needs K >= 1"));
    }
    if !(b > 1.0) {
        return Err(invalid("hard instance needs B > 1"));
    }
    if horizon < 1 {
        return Err(invalid("hard instance needs H >= 1"));
    }
    let delta0 = HARD_DELTA0;
    // Delta = sqrt(delta/K) / (4 sqrt(2)) = sqrt(1/(32*6*K)); forming the
    // integer denominator first keeps the constant exact in f64 (1/600 at
    // K = 1875).
    let gap = (1.0 / (32.0 * 6.0 * k as f64)).sqrt();
    let m = d - 1;
    if gap * m as f64 + delta0 > 1.0 {
        return Err(invalid(format!(
            "infeasible gap: Delta*(d-1) + delta = {} + {} > 1",
            gap * m as f64,
            delta0
        )));
    }

    // Normalizers: alpha = 1/sqrt(2) and beta = 1/(sqrt(2)*sqrt(d-1)) keep
    // ||phi_V||_2 <= 1 over binary V; theta* = (1/alpha, mu/beta) then has
    // norm sqrt(2 + 2*Delta^2*(d-1)^2), slightly above sqrt(2).
    let alpha_n = 1.0 / 2.0f64.sqrt();
    let beta_n = 1.0 / (2.0f64.sqrt() * (m as f64).sqrt());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu: Vec<f64> = (0..m)
        .map(|_| if rng.gen::<bool>() { gap } else { -gap })
        .collect();

    let mut theta_star = Vec::with_capacity(d);
    theta_star.push(1.0 / alpha_n);
    for &mi in &mu {
        theta_star.push(mi / beta_n);
    }
    let theta_norm = theta_star.iter().map(|x| x * x).sum::<f64>().sqrt();
    if theta_norm > b {
        return Err(invalid(format!(
            "norm bound too small: ||theta*|| = {theta_norm} > B = {b}"
        )));
    }

    let actions = enumerate_actions(m, &mu, &mut rng);
    let na = actions.len();

    // features: 3 states, na actions, dimension d
    let ns = 3;
    let mut features = vec![0.0; ns * na * ns * d];
    {
        let mut set_row = |s: usize, a: usize, sn: usize, row: &[f64]| {
            let base = ((s * na + a) * ns + sn) * d;
            features[base..base + d].copy_from_slice(row);
        };
        let mut row = vec![0.0; d];
        for (ai, a) in actions.iter().enumerate() {
            // x1 -> x2: (alpha*(1-delta), -beta * a)
            row[0] = alpha_n * (1.0 - delta0);
            for j in 0..m {
                row[1 + j] = -beta_n * a[j];
            }
            set_row(0, ai, 1, &row);
            // x1 -> x3: (alpha*delta, beta * a)
            row[0] = alpha_n * delta0;
            for j in 0..m {
                row[1 + j] = beta_n * a[j];
            }
            set_row(0, ai, 2, &row);
            // absorbing states: (alpha, 0)
            row.fill(0.0);
            row[0] = alpha_n;
            set_row(1, ai, 1, &row);
            set_row(2, ai, 2, &row);
        }
    }

    let mdp = LinearMixtureMdp::new(ns, na, d, horizon, features, theta_star, b, 0)?;

    let mut reward_values = vec![0.0; horizon * ns * na];
    for h in 0..horizon {
        for a in 0..na {
            reward_values[(h * ns + 2) * na + a] = 1.0 / horizon as f64;
        }
    }
    let reward = RewardFunction::new(horizon, ns, na, reward_values)?;

    let spec = HardInstanceSpec {
        dim: d,
        episode_budget: k,
        norm_bound: b,
        delta0,
        gap,
        mu,
        alpha_n,
        beta_n,
        num_actions: na,
    };
    Ok((mdp, reward, spec))
}

/// All sign vectors when `2^m` fits under the cap, otherwise a seeded
/// subsample that always includes `sign(mu)` and `-sign(mu)`.
fn enumerate_actions(m: usize, mu: &[f64], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let full = m < 64 && (1u64 << m) as usize <= HARD_ACTION_CAP;
    if full {
        let count = 1usize << m;
        (0..count)
            .map(|code| {
                (0..m)
                    .map(|j| if (code >> j) & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect()
    } else {
        let sign_mu: Vec<f64> = mu
            .iter()
            .map(|&x| if x >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let neg_sign_mu: Vec<f64> = sign_mu.iter().map(|x| -x).collect();
        let mut seen: HashSet<Vec<i8>> = HashSet::new();
        let key = |v: &[f64]| {
            v.iter()
                .map(|&x| if x > 0.0 { 1i8 } else { -1i8 })
                .collect::<Vec<i8>>()
        };
        let mut actions = vec![sign_mu.clone(), neg_sign_mu.clone()];
        seen.insert(key(&sign_mu));
        seen.insert(key(&neg_sign_mu));
        while actions.len() < HARD_ACTION_CAP {
            let cand: Vec<f64> = (0..m)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            if seen.insert(key(&cand)) {
                actions.push(cand);
            }
        }
        actions
    }
}
