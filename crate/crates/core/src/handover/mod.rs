//! Persistence-gated handover between Unit 1 and BS2, the comparison
//! strategies, and their evaluation harness.

mod ensemble;
mod eval;
mod fsm;
mod strategy;

pub use ensemble::{generate_ensemble, generate_sequence, read_ensemble_jsonl, write_ensemble_jsonl, EnsembleConfig};
pub use eval::{evaluate_strategies, event_onset, handover_metrics_to_csv, StrategyMetrics};
pub use fsm::{
    fsm_step, trigger_conditions, BsId, HandoverConfig, HandoverDecision, HandoverFsmState, LinkSample,
    PendingSwitch, Trigger,
};
pub use strategy::{
    brute_force_schedule, dbm_to_mw, oracle_schedule, run_strategy, schedule_value, served_power_dbm,
    StrategyKind, StrategyTrace,
};
