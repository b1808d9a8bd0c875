//! Per-tick orchestration: classifier, memory, routing, mock agents, link
//! scoring and handover, with latency accounting and decision packets.

mod engine;
mod latency;
mod report;

pub use engine::{
    environment_summary, read_packets_jsonl, simulate, write_packets_jsonl, Assets, BeamReport, BlockageBranch,
    BlockageReport, DecisionPacket, MemoryFlags, Orchestrator, OrchestratorConfig, SmoothedView, TrajectoryView,
};
pub use latency::{critical_path_ms, LatencyLedger, LatencyModel};
pub use report::{render_report, render_reports, ReasoningAdapter, REPORT_SECTIONS};
