//! Reward-free exploration for tabular linear mixture MDPs.
//!
//! Two-phase protocol: an exploration phase collects episodes without any
//! reward signal, driving itself with an optimistic pseudo-reward and fitting
//! the transition parameter by uncertainty-weighted value-targeted
//! regression with a high-order moment weight recursion; a planning phase
//! then answers arbitrary bounded reward functions by dynamic programming
//! under the learned model. Exact-DP oracles and a hard-instance generator
//! support desk-scale verification of the scheme's claimed behavior.

pub mod error;
pub mod explorer;
pub mod home;
pub mod mdp;
pub mod numkit;
pub mod planner;

pub use error::{Result, RfeError};
pub use explorer::{
    run_exploration, ConfidenceSet, ExplorationOutput, ExplorationStrategy, ExplorerConfig,
    MomentBank, RecordLevel,
};
pub use mdp::{
    max_total_reward, optimal_value_and_policy, policy_value, sample_episode, validate,
    LinearMixtureMdp, Policy, RewardFunction, Trajectory,
};
pub use planner::{plan, ClipMode, PlanResult};
