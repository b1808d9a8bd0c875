//! The per-tick control loop.
//!
//! Per tick: synthesize features from the scenario's degradation, classify,
//! smooth, route on the persistent mask, query the beam agent for both BSs
//! and the blockage agent for the Unit 1 link, fuse, score both links and
//! step the handover machine. Every random draw comes from a stream keyed by
//! `(seed, tick)`, so classification can run ahead in parallel without
//! changing the result.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::latency::{LatencyLedger, LatencyModel};
use crate::agents::{
    late_fuse, mock_beam_predict_with, mock_blockage_predict_with, BeamPrediction, BlockagePrediction, Modality,
    ModalityCombo, PerfTable, BLOCKAGE_BASE_RATE, HORIZONS,
};
use crate::error::{Error, Result};
use crate::handover::{fsm_step, BsId, HandoverConfig, HandoverDecision, HandoverFsmState, LinkSample};
use crate::linkmodel::{beam_gain_db, GeoPoint};
use crate::memory::{MemoryStore, WindowSummary, DEFAULT_CAPACITY};
use crate::routing::{DegradationState, RewardModel, RoutingAction, RoutingPolicy};
use crate::scenario::{truth_at, Scenario};
use crate::seed::{rng_for, stream};
use crate::sensing::{smooth_update, synth_features_with, Classifier, DegradationFlags, SmoothedStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    /// Smoothing threshold on the trailing impairment fraction.
    pub tau: f64,
    pub seed: u64,
    pub memory_capacity: usize,
    /// Blocked share assumed when deriving the blockage agent's false-positive rate.
    pub blockage_base_rate: f64,
    pub handover: HandoverConfig,
    pub latency: LatencyModel,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            tau: 0.3,
            seed: 0,
            memory_capacity: DEFAULT_CAPACITY,
            blockage_base_rate: BLOCKAGE_BASE_RATE,
            handover: HandoverConfig::default(),
            latency: LatencyModel::default(),
        }
    }
}

impl OrchestratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidConfig(format!("tau {} outside (0,1]", self.tau)));
        }
        if self.memory_capacity == 0 {
            return Err(Error::InvalidConfig("memory capacity must be >= 1".into()));
        }
        if !(self.blockage_base_rate > 0.0 && self.blockage_base_rate < 1.0) {
            return Err(Error::InvalidConfig("blockage base rate must lie in (0,1)".into()));
        }
        self.handover.validate()?;
        self.latency.validate()
    }
}

/// Trained models and tables the loop reads but never mutates.
#[derive(Clone, Copy)]
pub struct Assets<'a> {
    pub table: &'a PerfTable,
    pub classifier: &'a Classifier,
    pub policy: &'a dyn RoutingPolicy,
    pub reward: &'a RewardModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedView {
    pub fraction: [f64; 4],
    pub persistent: [bool; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryView {
    pub position: GeoPoint,
    /// Indexed Unit 1, BS2.
    pub distance_m: [f64; 2],
    pub bearing_deg: [f64; 2],
    pub los: [bool; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamReport {
    pub bs: BsId,
    pub prediction: BeamPrediction,
    /// Strongest codeword of the predicted set; the one the link uses.
    pub beam: usize,
    /// Relative to the BS boresight.
    pub center_deg: f64,
    pub width_deg: f64,
    pub gain_db: f64,
    pub received_dbm: f64,
    pub optimal_beam: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockageBranch {
    pub modality: Modality,
    pub probs: [f64; HORIZONS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockageReport {
    pub combo: ModalityCombo,
    pub branches: Vec<BlockageBranch>,
    /// Fusion weights per horizon, in branch order.
    pub weights: Vec<[f64; HORIZONS]>,
    pub fused: BlockagePrediction,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryFlags {
    pub blockage_run: u64,
    pub handover_flag: bool,
    pub degraded_fraction: [f64; 4],
    pub retained: usize,
}

/// Complete output of one control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPacket {
    pub tick: u64,
    pub time_s: f64,
    pub flags: DegradationFlags,
    pub smoothed: SmoothedView,
    pub state: DegradationState,
    pub policy: String,
    pub action: RoutingAction,
    /// Reward of the action under the perceived state.
    pub expected_reward: f64,
    pub trajectory: TrajectoryView,
    /// Indexed Unit 1, BS2.
    pub beams: [BeamReport; 2],
    pub blockage: BlockageReport,
    /// Serving BS after this tick's handover step.
    pub serving: BsId,
    pub handover: Option<HandoverDecision>,
    pub memory: MemoryFlags,
    pub latency: LatencyLedger,
}

/// One scenario's loop state. Single writer over smoothing, memory and the
/// handover machine.
pub struct Orchestrator<'a> {
    scenario: &'a Scenario,
    assets: Assets<'a>,
    config: OrchestratorConfig,
    status: SmoothedStatus,
    memory: MemoryStore,
    fsm: HandoverFsmState,
}

impl<'a> Orchestrator<'a> {
    pub fn new(scenario: &'a Scenario, assets: Assets<'a>, config: OrchestratorConfig) -> Result<Self> {
        config.validate()?;
        scenario.validate()?;
        Ok(Self {
            scenario,
            assets,
            config,
            status: SmoothedStatus::new(),
            memory: MemoryStore::with_capacity(config.memory_capacity)?,
            fsm: HandoverFsmState::default(),
        })
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn handover_state(&self) -> &HandoverFsmState {
        &self.fsm
    }

    /// Classifier output for `tick`; pure, so it may run ahead of the loop.
    pub fn classify_tick(&self, tick: u64) -> Result<DegradationFlags> {
        let spec = self
            .scenario
            .degradation
            .get(tick as usize)
            .ok_or_else(|| Error::Domain(format!("tick {tick} outside scenario of {} ticks", self.scenario.ticks)))?;
        let mut rng = rng_for(self.config.seed, stream::FEATURES, tick);
        Ok(self.assets.classifier.classify(&synth_features_with(&mut rng, spec)))
    }

    pub fn orchestrate_tick(&mut self, tick: u64) -> Result<DecisionPacket> {
        let flags = self.classify_tick(tick)?;
        self.step(tick, flags)
    }

    /// Everything after classification, in loop order.
    pub fn step(&mut self, tick: u64, flags: DegradationFlags) -> Result<DecisionPacket> {
        let cfg = self.config;
        let sc = self.scenario;
        let truth = truth_at(sc, tick)?;
        let t = tick as usize;

        let status = smooth_update(&self.status, flags, cfg.tau)?;
        let state = DegradationState::from_mask(status.persistent_mask())?;
        let action = self
            .assets
            .policy
            .act(state, &mut rng_for(cfg.seed, stream::POLICY, tick));

        let mut beam_rng = rng_for(cfg.seed, stream::BEAM_MOCK, tick);
        let mut beams = Vec::with_capacity(2);
        for (i, bs) in [BsId::Unit1, BsId::Bs2].into_iter().enumerate() {
            let profile = sc.profile(bs, t);
            let prediction = mock_beam_predict_with(&mut beam_rng, action.beam, &profile, 1, self.assets.table)?;
            let (beam, power) = prediction.best();
            beams.push(BeamReport {
                bs,
                beam,
                center_deg: sc.codebook.centers[beam],
                width_deg: sc.codebook.widths[beam],
                gain_db: beam_gain_db(power)?,
                received_dbm: sc.received_power_dbm(bs, tick, beam)?,
                optimal_beam: truth.optimal_beam[i],
                prediction,
            });
        }
        let beams: [BeamReport; 2] = beams.try_into().expect("two base stations");

        let blockage = self.predict_blockage(tick, action.block)?;

        let sample = LinkSample {
            tick,
            p1: beams[0].received_dbm,
            p2: beams[1].received_dbm,
            blocked: blockage.verdict,
            block_prob: Some(blockage.fused.probs[0]),
        };
        let (fsm, handover) = fsm_step(&self.fsm, &sample, &cfg.handover)?;

        let expected_reward = self.assets.reward.reward(state, action);
        self.memory.record_window(WindowSummary {
            tick,
            flags,
            action,
            blocked: blockage.verdict,
            block_prob: blockage.fused.probs[0],
            reward: expected_reward,
            environment: environment_summary(&truth.degradation),
        })?;
        self.status = status;
        self.fsm = fsm;

        Ok(DecisionPacket {
            tick,
            time_s: tick as f64 * sc.ts_ms / 1000.0,
            flags,
            smoothed: SmoothedView {
                fraction: self.status.fraction,
                persistent: self.status.persistent,
            },
            state,
            policy: self.assets.policy.name().to_string(),
            action,
            expected_reward,
            trajectory: TrajectoryView {
                position: truth.position,
                distance_m: truth.distance_m,
                bearing_deg: truth.bearing_deg,
                los: truth.los,
            },
            beams,
            blockage,
            serving: self.fsm.serving,
            handover,
            memory: MemoryFlags {
                blockage_run: self.memory.blockage_run(),
                handover_flag: self.memory.handover_flag(),
                degraded_fraction: self.memory.degraded_fraction(),
                retained: self.memory.len(),
            },
            latency: cfg.latency.ledger(self.assets.table, action),
        })
    }

    /// One blockage branch per modality of `combo`, late-fused per horizon
    /// with softmax weights over each branch's single-modality F1.
    fn predict_blockage(&self, tick: u64, combo: ModalityCombo) -> Result<BlockageReport> {
        let sc = self.scenario;
        let last = sc.ticks - 1;
        let truth: [bool; HORIZONS] = std::array::from_fn(|h| sc.blocked[(tick as usize + h + 1).min(last)]);
        let mut rng = rng_for(self.config.seed, stream::BLOCK_MOCK, tick);
        let branches = combo
            .modalities()
            .map(|m| {
                let p = mock_blockage_predict_with(
                    &mut rng,
                    ModalityCombo::single(m),
                    &truth,
                    self.config.blockage_base_rate,
                    self.assets.table,
                )?;
                Ok(BlockageBranch { modality: m, probs: p.probs })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut weights = vec![[0.0; HORIZONS]; branches.len()];
        let mut fused = [0.0; HORIZONS];
        for h in 0..HORIZONS {
            let scores = branches
                .iter()
                .map(|b| Ok(self.assets.table.lookup(ModalityCombo::single(b.modality), h + 1)?.block_f1))
                .collect::<Result<Vec<f64>>>()?;
            let probs: Vec<f64> = branches.iter().map(|b| b.probs[h]).collect();
            let f = late_fuse(&scores, &probs)?;
            for (w, fw) in weights.iter_mut().zip(&f.weights) {
                w[h] = *fw;
            }
            fused[h] = f.prob;
        }
        let fused = BlockagePrediction::new(fused)?;
        Ok(BlockageReport {
            combo,
            branches,
            weights,
            verdict: fused.blocked_next(),
            fused,
        })
    }
}

/// Human-readable ground-truth degradation, used as the memory entry's
/// environment field.
pub fn environment_summary(spec: &crate::sensing::DegradationSpec) -> String {
    let parts: Vec<String> = Modality::ALL
        .iter()
        .filter(|m| spec.get(**m).is_degraded())
        .map(|m| format!("{m}:{}@{:.2}", spec.get(*m).kind, spec.get(*m).severity))
        .collect();
    if parts.is_empty() {
        "clean".into()
    } else {
        parts.join(",")
    }
}

/// Runs the loop over every tick of the scenario. Classification runs in
/// parallel; the stateful stages run in tick order.
pub fn simulate(scenario: &Scenario, assets: Assets<'_>, config: OrchestratorConfig) -> Result<Vec<DecisionPacket>> {
    let mut orch = Orchestrator::new(scenario, assets, config)?;
    let flags: Vec<DegradationFlags> = (0..scenario.ticks as u64)
        .into_par_iter()
        .map(|t| orch.classify_tick(t))
        .collect::<Result<_>>()?;
    flags
        .into_iter()
        .enumerate()
        .map(|(t, f)| orch.step(t as u64, f))
        .collect()
}

pub fn write_packets_jsonl<W: Write>(packets: &[DecisionPacket], mut w: W) -> Result<()> {
    for p in packets {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_packets_jsonl<R: BufRead>(r: R) -> Result<Vec<DecisionPacket>> {
    let mut out: Vec<DecisionPacket> = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: DecisionPacket = serde_json::from_str(&line)?;
        if let Some(last) = out.last() {
            if p.tick <= last.tick {
                return Err(Error::Sequencing { last: last.tick, got: p.tick });
            }
        }
        out.push(p);
    }
    Ok(out)
}
