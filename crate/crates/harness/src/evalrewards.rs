//! Evaluation reward family for the reward-free guarantee.
//!
//! The guarantee is uniform over the bounded-total-reward class; the desk
//! proxy is the full indicator family plus a handful of seeded random
//! rewards rescaled so their maximum trajectory total is exactly 1.
//! Reported suboptimality is the max over the family.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfe_core::mdp::random::random_reward;
use rfe_core::mdp::{LinearMixtureMdp, RewardFunction};

pub const RANDOM_EVAL_REWARDS: usize = 5;

pub fn evaluation_rewards(mdp: &LinearMixtureMdp, seed: u64) -> Vec<RewardFunction> {
    let (h, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut rewards = Vec::with_capacity(h * ns * na + RANDOM_EVAL_REWARDS);
    for hh in 0..h {
        for s in 0..ns {
            for a in 0..na {
                rewards.push(RewardFunction::indicator(h, ns, na, hh, s, a));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_EVAL_REWARDS {
        rewards.push(random_reward(mdp, &mut rng));
    }
    rewards
}

#[cfg(test)]
mod tests {
    use super::*;
    use rfe_core::max_total_reward;
    use rfe_core::mdp::random::random_instance;

    #[test]
    fn family_members_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mdp = random_instance(3, 2, 3, 4, &mut rng);
        let family = evaluation_rewards(&mdp, 9);
        assert_eq!(family.len(), 4 * 3 * 2 + RANDOM_EVAL_REWARDS);
        for r in &family {
            assert!(max_total_reward(&mdp, r) <= 1.0 + 1e-9);
        }
    }
}
