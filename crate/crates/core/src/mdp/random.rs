//! Seeded generators for valid random instances and bounded rewards.

use rand::Rng;

use super::{max_total_reward, LinearMixtureMdp, RewardFunction};

/// Draws a valid linear mixture MDP: `d` base transition kernels with
/// Dirichlet(1) rows, mixed by a Dirichlet(1) weight vector. Features are the
/// base kernels scaled by `1/sqrt(d)` and `theta*` is the weight vector
/// scaled by `sqrt(d)`, which makes `||phi_V||_2 <= 1` for every
/// `V: S -> [0,1]` and keeps `||theta*||_2 <= sqrt(d) = B`.
pub fn random_instance(
    num_states: usize,
    num_actions: usize,
    dim: usize,
    horizon: usize,
    rng: &mut impl Rng,
) -> LinearMixtureMdp {
    let sqrt_d = (dim as f64).sqrt();
    let mut features = vec![0.0; num_states * num_actions * num_states * dim];
    let mut row = vec![0.0; num_states];
    for s in 0..num_states {
        for a in 0..num_actions {
            for i in 0..dim {
                dirichlet_row(&mut row, rng);
                for (sn, &q) in row.iter().enumerate() {
                    features[((s * num_actions + a) * num_states + sn) * dim + i] = q / sqrt_d;
                }
            }
        }
    }
    let mut weights = vec![0.0; dim];
    dirichlet_row(&mut weights, rng);
    let theta_star: Vec<f64> = weights.iter().map(|w| w * sqrt_d).collect();
    LinearMixtureMdp::new(
        num_states,
        num_actions,
        dim,
        horizon,
        features,
        theta_star,
        sqrt_d,
        0,
    )
    .expect("generated shape is consistent")
}

/// Uniform random reward rescaled so its maximum trajectory total is exactly 1.
pub fn random_reward(mdp: &LinearMixtureMdp, rng: &mut impl Rng) -> RewardFunction {
    let (h, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let values: Vec<f64> = (0..h * ns * na).map(|_| rng.gen::<f64>()).collect();
    let mut r = RewardFunction::new(h, ns, na, values).expect("shape");
    let mx = max_total_reward(mdp, &r);
    if mx > 0.0 {
        r.scale(1.0 / mx);
    }
    r
}

/// Dirichlet(1, ..., 1) sample via normalized unit exponentials.
fn dirichlet_row(out: &mut [f64], rng: &mut impl Rng) {
    let mut total = 0.0;
    for v in out.iter_mut() {
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        *v = -u.ln();
        total += *v;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_instances_validate_cleanly() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mdp = random_instance(4, 3, 4, 10, &mut rng);
            let report = validate(&mdp);
            assert!(report.is_valid(), "seed {seed}: {:?}", report.violations);
        }
    }

    #[test]
    fn random_reward_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mdp = random_instance(3, 2, 3, 6, &mut rng);
        let r = random_reward(&mdp, &mut rng);
        let mx = max_total_reward(&mdp, &r);
        assert!((mx - 1.0).abs() < 1e-9, "max total {mx}");
    }
}
