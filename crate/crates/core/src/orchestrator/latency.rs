//! Critical-path accounting for one control tick.
//!
//! The beam and blockage agents run in parallel, so the tick costs the
//! invocation plus the slower agent. Agent latency is the table's inference
//! column; preprocessing is assumed to be subsumed unless `include_preproc`
//! is set. Response generation runs off the control loop and is logged only.

use serde::{Deserialize, Serialize};

use crate::agents::{ModalityCombo, PerfTable};
use crate::error::{Error, Result};
use crate::routing::RoutingAction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyModel {
    pub invocation_ms: f64,
    pub classifier_ms: f64,
    pub drl_ms: f64,
    pub handover_ms: f64,
    /// Sampling interval the critical path must fit in.
    pub budget_ms: f64,
    /// Add each combo's preprocessing time to its inference time.
    pub include_preproc: bool,
    /// Add the classifier, policy and handover stages to the critical path.
    pub include_serial: bool,
    /// Asynchronous response generation; never on the critical path.
    pub response_ms: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            invocation_ms: 222.7,
            classifier_ms: 3.0,
            drl_ms: 2.0,
            handover_ms: 3.0,
            budget_ms: 300.0,
            include_preproc: false,
            include_serial: false,
            response_ms: 2170.0,
        }
    }
}

impl LatencyModel {
    pub fn zero() -> Self {
        Self {
            invocation_ms: 0.0,
            classifier_ms: 0.0,
            drl_ms: 0.0,
            handover_ms: 0.0,
            budget_ms: 0.0,
            include_preproc: false,
            include_serial: false,
            response_ms: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.invocation_ms,
            self.classifier_ms,
            self.drl_ms,
            self.handover_ms,
            self.budget_ms,
            self.response_ms,
        ];
        if all.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("latencies must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn beam_ms(&self, table: &PerfTable, c: ModalityCombo) -> f64 {
        let r = table.t1(c);
        r.beam_infer_ms + if self.include_preproc { r.preproc_ms } else { 0.0 }
    }

    pub fn block_ms(&self, table: &PerfTable, c: ModalityCombo) -> f64 {
        let r = table.t1(c);
        r.block_infer_ms + if self.include_preproc { r.preproc_ms } else { 0.0 }
    }

    pub fn serial_ms(&self) -> f64 {
        if self.include_serial {
            self.classifier_ms + self.drl_ms + self.handover_ms
        } else {
            0.0
        }
    }

    pub fn ledger(&self, table: &PerfTable, action: RoutingAction) -> LatencyLedger {
        let beam_ms = self.beam_ms(table, action.beam);
        let block_ms = self.block_ms(table, action.block);
        let serial_ms = self.serial_ms();
        let critical_path_ms = self.invocation_ms + beam_ms.max(block_ms) + serial_ms;
        LatencyLedger {
            invocation_ms: self.invocation_ms,
            beam_ms,
            block_ms,
            serial_ms,
            critical_path_ms,
            budget_ms: self.budget_ms,
            over_budget: critical_path_ms > self.budget_ms,
            async_response_ms: self.response_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyLedger {
    pub invocation_ms: f64,
    pub beam_ms: f64,
    pub block_ms: f64,
    pub serial_ms: f64,
    /// `invocation_ms + max(beam_ms, block_ms) + serial_ms`.
    pub critical_path_ms: f64,
    pub budget_ms: f64,
    pub over_budget: bool,
    pub async_response_ms: f64,
}

impl LatencyLedger {
    /// Recomputes the critical path from the ledger's own parts.
    pub fn is_consistent(&self) -> bool {
        let cp = self.invocation_ms + self.beam_ms.max(self.block_ms) + self.serial_ms;
        cp == self.critical_path_ms && self.over_budget == (cp > self.budget_ms)
    }
}

pub fn critical_path_ms(latency: &LatencyModel, action: RoutingAction, table: &PerfTable) -> f64 {
    latency.ledger(table, action).critical_path_ms
}
