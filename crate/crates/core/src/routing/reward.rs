use serde::{Deserialize, Serialize};

use super::state::{DegradationState, RoutingAction};
use crate::agents::{ModalityCombo, PerfTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Scale accuracy by the clean share of the combo's modalities.
    Multiplicative,
    /// Ignore degradation.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub perf_weight: f64,
    pub latency_weight: f64,
    /// Beam latency normalizer in ms; `None` uses the table maximum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam_norm_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_norm_ms: Option<f64>,
    pub penalty: PenaltyMode,
    /// Use `-w * (T_beam - T_block)` as literally printed instead of `-w * (T_beam + T_block)`.
    pub verbatim_sign: bool,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            perf_weight: 0.9,
            latency_weight: 0.1,
            beam_norm_ms: None,
            block_norm_ms: None,
            penalty: PenaltyMode::Multiplicative,
            verbatim_sign: false,
        }
    }
}

impl RewardParams {
    pub fn zeroed() -> Self {
        Self {
            perf_weight: 0.0,
            latency_weight: 0.0,
            ..Self::default()
        }
    }
}

/// Total t+1 latency of each task's combo: preprocessing plus inference.
pub fn beam_latency_ms(table: &PerfTable, c: ModalityCombo) -> f64 {
    let r = table.t1(c);
    r.preproc_ms + r.beam_infer_ms
}

pub fn block_latency_ms(table: &PerfTable, c: ModalityCombo) -> f64 {
    let r = table.t1(c);
    r.preproc_ms + r.block_infer_ms
}

/// Per-task maxima over the 15 combos.
pub fn latency_normalizers(table: &PerfTable) -> (f64, f64) {
    ModalityCombo::all().fold((0.0f64, 0.0f64), |(b, k), c| {
        (b.max(beam_latency_ms(table, c)), k.max(block_latency_ms(table, c)))
    })
}

/// Reward split into its weighted parts: `total = perf - latency`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParts {
    pub perf: f64,
    pub latency: f64,
    pub total: f64,
}

fn reliability(combo: ModalityCombo, state: DegradationState, mode: PenaltyMode) -> f64 {
    match mode {
        PenaltyMode::Multiplicative => 1.0 - combo.overlap(state.mask()) as f64 / combo.len() as f64,
        PenaltyMode::None => 1.0,
    }
}

/// Precomputed per-head reward terms for every state and combo.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    params: RewardParams,
    /// `[state][combo]` weighted beam-head contribution.
    beam: [[RewardParts; 15]; 16],
    block: [[RewardParts; 15]; 16],
}

impl RewardModel {
    pub fn new(table: &PerfTable, params: &RewardParams) -> Result<Self> {
        let (bmax, kmax) = latency_normalizers(table);
        let bn = params.beam_norm_ms.unwrap_or(bmax);
        let kn = params.block_norm_ms.unwrap_or(kmax);
        if !(bn > 0.0 && kn > 0.0) {
            return Err(Error::InvalidConfig("latency normalizers must be > 0".into()));
        }
        let zero = RewardParts {
            perf: 0.0,
            latency: 0.0,
            total: 0.0,
        };
        let mut beam = [[zero; 15]; 16];
        let mut block = [[zero; 15]; 16];
        let block_sign = if params.verbatim_sign { -1.0 } else { 1.0 };
        for s in DegradationState::all() {
            for c in ModalityCombo::all() {
                let rel = reliability(c, s, params.penalty);
                let r = table.t1(c);
                let bp = params.perf_weight * r.beam_top3_acc * rel;
                let bl = params.latency_weight * beam_latency_ms(table, c) / bn;
                beam[s.mask() as usize][c.index()] = RewardParts {
                    perf: bp,
                    latency: bl,
                    total: bp - bl,
                };
                let kp = params.perf_weight * r.block_f1 * rel;
                let kl = block_sign * params.latency_weight * block_latency_ms(table, c) / kn;
                block[s.mask() as usize][c.index()] = RewardParts {
                    perf: kp,
                    latency: kl,
                    total: kp - kl,
                };
            }
        }
        Ok(Self {
            params: *params,
            beam,
            block,
        })
    }

    pub fn params(&self) -> &RewardParams {
        &self.params
    }

    pub fn beam_term(&self, s: DegradationState, c: ModalityCombo) -> RewardParts {
        self.beam[s.mask() as usize][c.index()]
    }

    pub fn block_term(&self, s: DegradationState, c: ModalityCombo) -> RewardParts {
        self.block[s.mask() as usize][c.index()]
    }

    pub fn parts(&self, s: DegradationState, a: RoutingAction) -> RewardParts {
        let b = self.beam_term(s, a.beam);
        let k = self.block_term(s, a.block);
        RewardParts {
            perf: b.perf + k.perf,
            latency: b.latency + k.latency,
            total: b.total + k.total,
        }
    }

    pub fn reward(&self, s: DegradationState, a: RoutingAction) -> f64 {
        self.parts(s, a).total
    }
}

/// `w_p (A_beam + A_block) - w_l (T_beam + T_block)` for one state-action pair.
pub fn routing_reward(
    state: DegradationState,
    action: RoutingAction,
    table: &PerfTable,
    params: &RewardParams,
) -> Result<f64> {
    let (bmax, kmax) = latency_normalizers(table);
    let bn = params.beam_norm_ms.unwrap_or(bmax);
    let kn = params.block_norm_ms.unwrap_or(kmax);
    let rb = table.t1(action.beam);
    let rk = table.t1(action.block);
    let a_beam = rb.beam_top3_acc * reliability(action.beam, state, params.penalty);
    let a_block = rk.block_f1 * reliability(action.block, state, params.penalty);
    let t_beam = beam_latency_ms(table, action.beam) / bn;
    let t_block = block_latency_ms(table, action.block) / kn;
    let t = if params.verbatim_sign { t_beam - t_block } else { t_beam + t_block };
    Ok(params.perf_weight * (a_beam + a_block) - params.latency_weight * t)
}
