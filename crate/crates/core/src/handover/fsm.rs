//! Dual-trigger, persistence-gated handover state machine.
//!
//! Trigger A (power superiority): the alternate BS beats the serving BS by at
//! least `delta_power_db`. Trigger B (blockage-aware): the Unit 1 link is
//! predicted blocked while Unit 1 serves and BS2 offers any improvement. When a
//! trigger run reaches `persistence` a switch is armed and executes `delay`
//! ticks later.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BsId {
    Unit1,
    Bs2,
}

impl BsId {
    pub fn other(self) -> BsId {
        match self {
            BsId::Unit1 => BsId::Bs2,
            BsId::Bs2 => BsId::Unit1,
        }
    }
}

impl fmt::Display for BsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BsId::Unit1 => "Unit 1",
            BsId::Bs2 => "BS2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandoverConfig {
    pub delta_power_db: f64,
    /// Consecutive ticks a trigger must hold before a switch is armed.
    pub persistence: u32,
    /// Ticks between arming and executing a switch.
    pub delay: u32,
    /// Count one run over "A or B" instead of one run per trigger.
    pub disjunction: bool,
    /// Power lost on the tick a switch executes; part of the power
    /// accounting every strategy, the oracle included, is scored against.
    pub switch_loss_db: f64,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        Self {
            delta_power_db: 3.0,
            persistence: 5,
            delay: 1,
            disjunction: false,
            switch_loss_db: 3.0,
        }
    }
}

impl HandoverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_power_db >= 0.0 && self.delta_power_db.is_finite()) {
            return Err(Error::InvalidConfig("delta_power_db must be finite and >= 0".into()));
        }
        if self.persistence == 0 {
            return Err(Error::InvalidConfig("persistence must be >= 1".into()));
        }
        if !(self.switch_loss_db >= 0.0 && self.switch_loss_db.is_finite()) {
            return Err(Error::InvalidConfig("switch_loss_db must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// One tick of link observations. Powers in dBm; `blocked` is the fused
/// verdict on the Unit 1 link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub tick: u64,
    pub p1: f64,
    pub p2: f64,
    pub blocked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_prob: Option<f64>,
}

impl LinkSample {
    pub fn power(&self, bs: BsId) -> f64 {
        match bs {
            BsId::Unit1 => self.p1,
            BsId::Bs2 => self.p2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p1.is_finite() && self.p2.is_finite()) {
            return Err(Error::Data(format!("non-finite power at tick {}", self.tick)));
        }
        if let Some(p) = self.block_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Data(format!("block_prob {p} outside [0,1] at tick {}", self.tick)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    PowerSuperiority,
    BlockageAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendingSwitch {
    pub remaining: u32,
    pub target: BsId,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandoverFsmState {
    pub serving: BsId,
    /// Run of trigger A, or of "A or B" in disjunction mode.
    pub run_a: u32,
    pub run_b: u32,
    pub pending: Option<PendingSwitch>,
    pub last_tick: Option<u64>,
}

impl Default for HandoverFsmState {
    fn default() -> Self {
        Self {
            serving: BsId::Unit1,
            run_a: 0,
            run_b: 0,
            pending: None,
            last_tick: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandoverDecision {
    pub tick: u64,
    pub target: BsId,
    /// Target power minus previous serving power at the execution tick.
    pub gain_db: f64,
    pub confidence: f64,
    pub trigger: Trigger,
}

/// Instantaneous trigger conditions relative to the serving BS.
pub fn trigger_conditions(serving: BsId, s: &LinkSample, cfg: &HandoverConfig) -> (bool, bool) {
    let alt = serving.other();
    let a = s.power(alt) - s.power(serving) >= cfg.delta_power_db;
    let b = serving == BsId::Unit1 && s.blocked && s.p2 > s.p1;
    (a, b)
}

pub fn fsm_step(
    state: &HandoverFsmState,
    sample: &LinkSample,
    cfg: &HandoverConfig,
) -> Result<(HandoverFsmState, Option<HandoverDecision>)> {
    if let Some(last) = state.last_tick {
        if sample.tick <= last {
            return Err(Error::Sequencing { last, got: sample.tick });
        }
    }
    let mut next = *state;
    next.last_tick = Some(sample.tick);
    let (a, b) = trigger_conditions(state.serving, sample, cfg);
    let bump = |run: u32, hold: bool| if hold { run.saturating_add(1) } else { 0 };
    if cfg.disjunction {
        next.run_a = bump(state.run_a, a || b);
        next.run_b = 0;
    } else {
        next.run_a = bump(state.run_a, a);
        next.run_b = bump(state.run_b, b);
    }

    match &mut next.pending {
        Some(p) => p.remaining = p.remaining.saturating_sub(1),
        None => {
            let armed = if cfg.disjunction {
                (next.run_a >= cfg.persistence).then_some(if b { Trigger::BlockageAware } else { Trigger::PowerSuperiority })
            } else if next.run_b >= cfg.persistence {
                Some(Trigger::BlockageAware)
            } else if next.run_a >= cfg.persistence {
                Some(Trigger::PowerSuperiority)
            } else {
                None
            };
            next.pending = armed.map(|trigger| PendingSwitch {
                remaining: cfg.delay,
                target: state.serving.other(),
                trigger,
            });
        }
    }

    let Some(p) = next.pending.filter(|p| p.remaining == 0) else {
        return Ok((next, None));
    };
    let confidence = match p.trigger {
        Trigger::PowerSuperiority => 1.0,
        Trigger::BlockageAware => {
            let run = if cfg.disjunction { next.run_a } else { next.run_b };
            let held = run.min(cfg.persistence) as f64 / cfg.persistence as f64;
            held * sample.block_prob.unwrap_or(1.0)
        }
    };
    let decision = HandoverDecision {
        tick: sample.tick,
        target: p.target,
        gain_db: sample.power(p.target) - sample.power(state.serving),
        confidence,
        trigger: p.trigger,
    };
    next.serving = p.target;
    next.run_a = 0;
    next.run_b = 0;
    next.pending = None;
    Ok((next, Some(decision)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(tick: u64, p1: f64, p2: f64, blocked: bool) -> LinkSample {
        LinkSample {
            tick,
            p1,
            p2,
            blocked,
            block_prob: None,
        }
    }

    fn run(samples: &[LinkSample], cfg: &HandoverConfig) -> Vec<Option<HandoverDecision>> {
        let mut st = HandoverFsmState::default();
        samples
            .iter()
            .map(|x| {
                let (n, d) = fsm_step(&st, x, cfg).unwrap();
                st = n;
                d
            })
            .collect()
    }

    #[test]
    fn blockage_switch_executes_after_delay() {
        let seq: Vec<_> = (1..=6).map(|t| s(t, -80.0, -79.0, true)).collect();
        let d = run(&seq, &HandoverConfig::default());
        assert!(d[..5].iter().all(Option::is_none));
        let d6 = d[5].unwrap();
        assert_eq!((d6.tick, d6.target, d6.trigger), (6, BsId::Bs2, Trigger::BlockageAware));
        assert!((d6.gain_db - 1.0).abs() < 1e-12);
        assert_eq!(d6.confidence, 1.0);
    }

    #[test]
    fn broken_run_resets() {
        let mut seq: Vec<_> = (1..=4).map(|t| s(t, -80.0, -79.0, true)).collect();
        seq.push(s(5, -80.0, -79.0, false));
        seq.extend((6..=9).map(|t| s(t, -80.0, -79.0, true)));
        assert!(run(&seq, &HandoverConfig::default()).iter().all(Option::is_none));
    }

    #[test]
    fn power_threshold_is_inclusive() {
        let seq: Vec<_> = (1..=6).map(|t| s(t, -80.0, -77.0, false)).collect();
        let d = run(&seq, &HandoverConfig::default());
        assert_eq!(d[5].unwrap().trigger, Trigger::PowerSuperiority);
        let below: Vec<_> = (1..=6).map(|t| s(t, -80.0, -77.0 - 1e-9, false)).collect();
        assert!(run(&below, &HandoverConfig::default()).iter().all(Option::is_none));
    }

    #[test]
    fn zero_delay_executes_on_arming_tick() {
        let cfg = HandoverConfig { delay: 0, ..HandoverConfig::default() };
        let seq: Vec<_> = (1..=5).map(|t| s(t, -80.0, -70.0, false)).collect();
        assert_eq!(run(&seq, &cfg)[4].unwrap().tick, 5);
    }

    #[test]
    fn blockage_trigger_ignored_on_bs2() {
        let st = HandoverFsmState { serving: BsId::Bs2, ..HandoverFsmState::default() };
        let (n, _) = fsm_step(&st, &s(1, -70.0, -72.0, true), &HandoverConfig::default()).unwrap();
        assert_eq!((n.run_a, n.run_b), (0, 0));
    }

    #[test]
    fn switch_back_uses_power_trigger() {
        let cfg = HandoverConfig::default();
        let st = HandoverFsmState { serving: BsId::Bs2, ..HandoverFsmState::default() };
        let mut st = st;
        let mut last = None;
        for t in 1..=6 {
            let (n, d) = fsm_step(&st, &s(t, -60.0, -70.0, false), &cfg).unwrap();
            st = n;
            last = d.or(last);
        }
        let d = last.unwrap();
        assert_eq!((d.target, d.gain_db), (BsId::Unit1, 10.0));
        assert_eq!(st.serving, BsId::Unit1);
    }

    #[test]
    fn disjunction_counts_either_condition() {
        let per = HandoverConfig::default();
        let dis = HandoverConfig { disjunction: true, ..per };
        // Alternates between A-only and B-only ticks.
        let seq: Vec<_> = (1..=6)
            .map(|t| if t % 2 == 0 { s(t, -80.0, -70.0, false) } else { s(t, -80.0, -79.0, true) })
            .collect();
        assert!(run(&seq, &per).iter().all(Option::is_none));
        assert!(run(&seq, &dis)[5].is_some());
    }

    #[test]
    fn confidence_scales_with_block_prob() {
        let seq: Vec<_> = (1..=6)
            .map(|t| LinkSample { block_prob: Some(0.8), ..s(t, -80.0, -79.0, true) })
            .collect();
        let d = run(&seq, &HandoverConfig::default())[5].unwrap();
        assert!((d.confidence - 0.8).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_tick_rejected() {
        let cfg = HandoverConfig::default();
        let (st, _) = fsm_step(&HandoverFsmState::default(), &s(3, 0.0, 0.0, false), &cfg).unwrap();
        assert!(matches!(fsm_step(&st, &s(3, 0.0, 0.0, false), &cfg), Err(Error::Sequencing { last: 3, got: 3 })));
    }
}
