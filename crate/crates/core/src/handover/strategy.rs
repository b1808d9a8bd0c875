//! The four comparison strategies and the power accounting they share.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::fsm::{fsm_step, BsId, HandoverConfig, HandoverDecision, HandoverFsmState, LinkSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    None,
    Immediate,
    Oracle,
    Persistence,
}

impl StrategyKind {
    /// Column order of the comparison table.
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::None,
        StrategyKind::Immediate,
        StrategyKind::Oracle,
        StrategyKind::Persistence,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::None => "no_handover",
            StrategyKind::Immediate => "immediate",
            StrategyKind::Oracle => "oracle",
            StrategyKind::Persistence => "persistence",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.label() == s || (s == "none" && *k == StrategyKind::None))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown handover strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTrace {
    /// Serving BS on each tick.
    pub serving: Vec<BsId>,
    pub decisions: Vec<HandoverDecision>,
}

impl StrategyTrace {
    /// Ticks on which the serving BS differs from the previous tick; the
    /// link starts on Unit 1.
    pub fn switch_ticks(&self) -> Vec<usize> {
        let mut prev = BsId::Unit1;
        let mut out = Vec::new();
        for (t, &b) in self.serving.iter().enumerate() {
            if b != prev {
                out.push(t);
            }
            prev = b;
        }
        out
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Power delivered on each tick, in dBm: the serving BS's power, less
/// `switch_loss_db` on ticks where a switch executes.
pub fn served_power_dbm(seq: &[LinkSample], serving: &[BsId], cfg: &HandoverConfig) -> Vec<f64> {
    let mut prev = BsId::Unit1;
    seq.iter()
        .zip(serving)
        .map(|(s, &b)| {
            let loss = if b != prev { cfg.switch_loss_db } else { 0.0 };
            prev = b;
            s.power(b) - loss
        })
        .collect()
}

/// Cumulative delivered power in mW, summed in tick order.
pub fn schedule_value(seq: &[LinkSample], serving: &[BsId], cfg: &HandoverConfig) -> f64 {
    served_power_dbm(seq, serving, cfg).into_iter().map(dbm_to_mw).sum()
}

fn validate_sequence(seq: &[LinkSample]) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::Data("empty handover sequence".into()));
    }
    for w in seq.windows(2) {
        if w[1].tick <= w[0].tick {
            return Err(Error::Sequencing {
                last: w[0].tick,
                got: w[1].tick,
            });
        }
    }
    seq.iter().try_for_each(LinkSample::validate)
}

fn run_fsm(seq: &[LinkSample], cfg: &HandoverConfig) -> Result<StrategyTrace> {
    let mut st = HandoverFsmState::default();
    let mut serving = Vec::with_capacity(seq.len());
    let mut decisions = Vec::new();
    for s in seq {
        let (next, d) = fsm_step(&st, s, cfg)?;
        st = next;
        serving.push(st.serving);
        decisions.extend(d);
    }
    Ok(StrategyTrace { serving, decisions })
}

/// Offline schedule maximizing [`schedule_value`]. Two-state dynamic program;
/// on equal value the predecessor without a switch wins.
pub fn oracle_schedule(seq: &[LinkSample], cfg: &HandoverConfig) -> Vec<BsId> {
    const BS: [BsId; 2] = [BsId::Unit1, BsId::Bs2];
    let term = |s: &LinkSample, b: BsId, switched: bool| {
        dbm_to_mw(s.power(b) - if switched { cfg.switch_loss_db } else { 0.0 })
    };
    let n = seq.len();
    let mut value = [0.0f64; 2];
    let mut from = vec![[0usize; 2]; n];
    for (t, s) in seq.iter().enumerate() {
        let mut next = [0.0; 2];
        for (j, &b) in BS.iter().enumerate() {
            if t == 0 {
                next[j] = term(s, b, b != BsId::Unit1);
                from[t][j] = 0;
                continue;
            }
            let stay = value[j] + term(s, b, false);
            let moved = value[1 - j] + term(s, b, true);
            if stay >= moved {
                next[j] = stay;
                from[t][j] = j;
            } else {
                next[j] = moved;
                from[t][j] = 1 - j;
            }
        }
        value = next;
    }
    let mut j = if value[0] >= value[1] { 0 } else { 1 };
    let mut out = vec![BsId::Unit1; n];
    for t in (0..n).rev() {
        out[t] = BS[j];
        j = from[t][j];
    }
    out
}

/// Exhaustive search over all `2^n` schedules; the first maximum in
/// enumeration order wins. Test oracle for short sequences only.
pub fn brute_force_schedule(seq: &[LinkSample], cfg: &HandoverConfig) -> Result<(Vec<BsId>, f64)> {
    if seq.len() > 20 {
        return Err(Error::Domain(format!("exhaustive search over {} ticks", seq.len())));
    }
    let mut best: Option<(Vec<BsId>, f64)> = None;
    for bits in 0u32..(1 << seq.len()) {
        let sched: Vec<BsId> = (0..seq.len())
            .map(|t| if bits >> t & 1 == 1 { BsId::Bs2 } else { BsId::Unit1 })
            .collect();
        let v = schedule_value(seq, &sched, cfg);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((sched, v));
        }
    }
    Ok(best.expect("non-empty"))
}

pub fn run_strategy(kind: StrategyKind, seq: &[LinkSample], cfg: &HandoverConfig) -> Result<StrategyTrace> {
    cfg.validate()?;
    validate_sequence(seq)?;
    match kind {
        StrategyKind::None => Ok(StrategyTrace {
            serving: vec![BsId::Unit1; seq.len()],
            decisions: Vec::new(),
        }),
        StrategyKind::Persistence => run_fsm(seq, cfg),
        StrategyKind::Immediate => run_fsm(
            seq,
            &HandoverConfig {
                persistence: 1,
                ..*cfg
            },
        ),
        StrategyKind::Oracle => {
            let serving = oracle_schedule(seq, cfg);
            let mut prev = BsId::Unit1;
            let mut decisions = Vec::new();
            for (s, &b) in seq.iter().zip(&serving) {
                if b != prev {
                    decisions.push(HandoverDecision {
                        tick: s.tick,
                        target: b,
                        gain_db: s.power(b) - s.power(prev),
                        confidence: 1.0,
                        trigger: super::fsm::Trigger::PowerSuperiority,
                    });
                }
                prev = b;
            }
            Ok(StrategyTrace { serving, decisions })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq_from(p: &[(f64, f64, bool)]) -> Vec<LinkSample> {
        p.iter()
            .enumerate()
            .map(|(t, &(p1, p2, blocked))| LinkSample {
                tick: t as u64,
                p1,
                p2,
                blocked,
                block_prob: None,
            })
            .collect()
    }

    #[test]
    fn unit1_dominant_means_nobody_switches() {
        let seq = seq_from(&[(-60.0, -70.0, false); 20]);
        let cfg = HandoverConfig::default();
        for k in StrategyKind::ALL {
            let tr = run_strategy(k, &seq, &cfg).unwrap();
            assert!(tr.serving.iter().all(|b| *b == BsId::Unit1), "{k}");
            assert!(tr.decisions.is_empty());
        }
    }

    #[test]
    fn single_tick_spike_only_moves_immediate() {
        let mut p = vec![(-60.0, -63.0, false); 12];
        p[4] = (-60.0, -50.0, false);
        let seq = seq_from(&p);
        let cfg = HandoverConfig::default();
        assert_eq!(run_strategy(StrategyKind::Immediate, &seq, &cfg).unwrap().serving[5], BsId::Bs2);
        assert!(run_strategy(StrategyKind::Persistence, &seq, &cfg).unwrap().decisions.is_empty());
    }

    #[test]
    fn switch_loss_discourages_oracle_flapping() {
        // One tick of +1 dB is worth less than two 3 dB switch losses.
        let mut p = vec![(-60.0, -61.0, false); 8];
        p[3] = (-60.0, -59.0, false);
        let seq = seq_from(&p);
        let o = run_strategy(StrategyKind::Oracle, &seq, &HandoverConfig::default()).unwrap();
        assert!(o.decisions.is_empty());
        let free = HandoverConfig { switch_loss_db: 0.0, ..HandoverConfig::default() };
        let o = run_strategy(StrategyKind::Oracle, &seq, &free).unwrap();
        assert_eq!(o.switch_ticks(), vec![3, 4]);
    }

    #[test]
    fn rejects_empty_and_unordered() {
        let cfg = HandoverConfig::default();
        assert!(run_strategy(StrategyKind::None, &[], &cfg).is_err());
        let mut seq = seq_from(&[(-60.0, -70.0, false); 3]);
        seq[2].tick = 0;
        assert!(run_strategy(StrategyKind::Persistence, &seq, &cfg).is_err());
    }

    #[test]
    fn labels_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.label().parse::<StrategyKind>().unwrap(), k);
        }
    }

    fn arb_seq(max: usize) -> impl Strategy<Value = Vec<LinkSample>> {
        prop::collection::vec((-90.0f64..-50.0, -90.0f64..-50.0, any::<bool>()), 1..=max)
            .prop_map(|v| seq_from(&v))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn oracle_matches_exhaustive_search(seq in arb_seq(12), loss in 0.0f64..6.0) {
            let cfg = HandoverConfig { switch_loss_db: loss, ..HandoverConfig::default() };
            let dp = oracle_schedule(&seq, &cfg);
            let (bf, bv) = brute_force_schedule(&seq, &cfg).unwrap();
            prop_assert_eq!(schedule_value(&seq, &dp, &cfg), bv);
            prop_assert_eq!(dp, bf);
        }

        #[test]
        fn oracle_dominates(seq in arb_seq(40)) {
            let cfg = HandoverConfig::default();
            let o = schedule_value(&seq, &oracle_schedule(&seq, &cfg), &cfg);
            for k in StrategyKind::ALL {
                let tr = run_strategy(k, &seq, &cfg).unwrap();
                prop_assert!(schedule_value(&seq, &tr.serving, &cfg) <= o * (1.0 + 1e-12));
            }
        }

        #[test]
        fn switches_follow_a_full_run(seq in arb_seq(40)) {
            // Replay audit: each executed switch is preceded by `persistence`
            // consecutive trigger ticks ending `delay` ticks earlier.
            let cfg = HandoverConfig::default();
            let tr = run_strategy(StrategyKind::Persistence, &seq, &cfg).unwrap();
            let mut serving = BsId::Unit1;
            for (t, &b) in tr.serving.iter().enumerate() {
                if b != serving {
                    let end = t - cfg.delay as usize;
                    prop_assert!(end + 1 >= cfg.persistence as usize);
                    let start = end + 1 - cfg.persistence as usize;
                    let all = |f: &dyn Fn(&LinkSample) -> bool| seq[start..=end].iter().all(f);
                    let a = all(&|s| s.power(serving.other()) - s.power(serving) >= cfg.delta_power_db);
                    let bb = all(&|s| serving == BsId::Unit1 && s.blocked && s.p2 > s.p1);
                    prop_assert!(a || bb, "switch at {t} without a full run");
                }
                serving = b;
            }
        }

        #[test]
        fn persistence_switches_no_more_than_immediate(seq in arb_seq(60)) {
            let cfg = HandoverConfig::default();
            let p = run_strategy(StrategyKind::Persistence, &seq, &cfg).unwrap().switch_ticks().len();
            let i = run_strategy(StrategyKind::Immediate, &seq, &cfg).unwrap().switch_ticks().len();
            prop_assert!(p <= i, "{} > {}", p, i);
        }

        #[test]
        fn replay_is_deterministic(seq in arb_seq(30)) {
            let cfg = HandoverConfig::default();
            prop_assert_eq!(
                run_strategy(StrategyKind::Persistence, &seq, &cfg).unwrap(),
                run_strategy(StrategyKind::Persistence, &seq, &cfg).unwrap()
            );
        }
    }
}
