//! Degradation-aware routing of beam and blockage agents to modality combos.

mod eval;
mod policy;
mod ppo;
mod reward;
mod state;
mod sweep;

pub use eval::{evaluate_policies, metrics_to_csv, EvalMix, PolicyMetrics};
pub use policy::{
    baseline_policy, oracle_policy, oracle_policy_by_head, random_action, rule_based_action, BaselineKind,
    RandomPolicy, RoutingPolicy, RuleBasedPolicy, TabularPolicy,
};
pub use ppo::{
    ppo_train, sample_training_state, DrlPolicy, PolicyNet, TrainConfig, TrainLog, POLICY_FILE_MAGIC,
    POLICY_FILE_VERSION,
};
pub use reward::{
    beam_latency_ms, block_latency_ms, latency_normalizers, routing_reward, PenaltyMode, RewardModel,
    RewardParams, RewardParts,
};
pub use state::{DegradationState, RoutingAction};
pub use sweep::{best_tau, sweep_to_csv, threshold_sweep, SweepConfig, SweepPoint};
