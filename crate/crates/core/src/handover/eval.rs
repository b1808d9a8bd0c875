//! Strategy comparison over an ensemble of sequences.
//!
//! Metrics per strategy:
//! - `apl_at_k_db`: delivered power `horizon` ticks after the event onset
//!   minus Unit 1 power on the tick before onset, averaged over sequences
//!   that contain an event. The onset is the first tick of the first run of
//!   at least `persistence` ticks on which a trigger condition holds with
//!   Unit 1 serving.
//! - `power_gain_pct`: cumulative delivered power in mW relative to the
//!   no-handover strategy, averaged over sequences.
//! - `premature_rate_pct`: share of switches after which the previous BS is
//!   stronger again on some tick within `horizon`.
//! - `avg_handovers`: switches per sequence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fsm::{trigger_conditions, BsId, HandoverConfig, LinkSample};
use super::strategy::{dbm_to_mw, run_strategy, served_power_dbm, StrategyKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyMetrics {
    pub strategy: StrategyKind,
    pub apl_at_k_db: f64,
    pub power_gain_pct: f64,
    pub premature_rate_pct: f64,
    pub avg_handovers: f64,
    pub switches: usize,
    pub premature: usize,
}

/// First tick of the first run of `persistence` trigger ticks, Unit 1 serving.
pub fn event_onset(seq: &[LinkSample], cfg: &HandoverConfig) -> Option<usize> {
    let mut run = 0;
    for (t, s) in seq.iter().enumerate() {
        let (a, b) = trigger_conditions(BsId::Unit1, s, cfg);
        run = if a || b { run + 1 } else { 0 };
        if run >= cfg.persistence as usize {
            return Some(t + 1 - run);
        }
    }
    None
}

#[derive(Default, Clone, Copy)]
struct SeqStats {
    apl: Option<f64>,
    gain_pct: f64,
    switches: usize,
    premature: usize,
}

fn sequence_stats(
    kind: StrategyKind,
    seq: &[LinkSample],
    cfg: &HandoverConfig,
    horizon: usize,
) -> Result<SeqStats> {
    let trace = run_strategy(kind, seq, cfg)?;
    let served = served_power_dbm(seq, &trace.serving, cfg);
    let total: f64 = served.iter().map(|p| dbm_to_mw(*p)).sum();
    let baseline: f64 = seq.iter().map(|s| dbm_to_mw(s.p1)).sum();
    let switch_ticks = trace.switch_ticks();
    let premature = switch_ticks
        .iter()
        .filter(|&&t| {
            let new = trace.serving[t];
            seq[t + 1..(t + 1 + horizon).min(seq.len())]
                .iter()
                .any(|s| s.power(new.other()) > s.power(new))
        })
        .count();
    let apl = event_onset(seq, cfg).map(|t0| {
        let at = (t0 + horizon).min(seq.len() - 1);
        served[at] - seq[t0.saturating_sub(1)].p1
    });
    Ok(SeqStats {
        apl,
        gain_pct: 100.0 * (total / baseline - 1.0),
        switches: switch_ticks.len(),
        premature,
    })
}

pub fn evaluate_strategies(
    ensemble: &[Vec<LinkSample>],
    cfg: &HandoverConfig,
    horizon: usize,
) -> Result<Vec<StrategyMetrics>> {
    if ensemble.is_empty() {
        return Err(Error::Data("empty ensemble".into()));
    }
    StrategyKind::ALL
        .iter()
        .map(|&kind| {
            // Collected before reducing so float sums are order-independent.
            let per: Vec<SeqStats> = ensemble
                .par_iter()
                .map(|seq| sequence_stats(kind, seq, cfg, horizon))
                .collect::<Result<_>>()?;
            let n = per.len() as f64;
            let apls: Vec<f64> = per.iter().filter_map(|s| s.apl).collect();
            let switches: usize = per.iter().map(|s| s.switches).sum();
            let premature: usize = per.iter().map(|s| s.premature).sum();
            Ok(StrategyMetrics {
                strategy: kind,
                apl_at_k_db: if apls.is_empty() { 0.0 } else { apls.iter().sum::<f64>() / apls.len() as f64 },
                power_gain_pct: per.iter().map(|s| s.gain_pct).sum::<f64>() / n,
                premature_rate_pct: if switches == 0 { 0.0 } else { 100.0 * premature as f64 / switches as f64 },
                avg_handovers: switches as f64 / n,
                switches,
                premature,
            })
        })
        .collect()
}

/// Metrics as rows, strategies as columns.
pub fn handover_metrics_to_csv(rows: &[StrategyMetrics]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["metric".to_string()];
    header.extend(rows.iter().map(|r| r.strategy.label().to_string()));
    w.write_record(&header)?;
    let lines: [(&str, fn(&StrategyMetrics) -> String); 4] = [
        ("apl_at_t_plus_k_db", |r| format!("{:+.2}", r.apl_at_k_db)),
        ("avg_power_gain_pct", |r| format!("{:+.1}", r.power_gain_pct)),
        ("premature_switch_rate_pct", |r| format!("{:.1}", r.premature_rate_pct)),
        ("avg_handover_frequency", |r| format!("{:.2}", r.avg_handovers)),
    ];
    for (name, f) in lines {
        let mut rec = vec![name.to_string()];
        rec.extend(rows.iter().map(f));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handover::ensemble::{generate_ensemble, EnsembleConfig};

    #[test]
    fn none_never_switches() {
        let e = generate_ensemble(&EnsembleConfig { sequences: 30, ..EnsembleConfig::default() }, 3).unwrap();
        let m = evaluate_strategies(&e, &HandoverConfig::default(), 5).unwrap();
        let none = &m[0];
        assert_eq!(none.strategy, StrategyKind::None);
        assert_eq!((none.switches, none.premature), (0, 0));
        assert_eq!(none.power_gain_pct, 0.0);
    }

    #[test]
    fn onset_requires_a_full_run() {
        let mk = |t: u64, p2: f64| LinkSample { tick: t, p1: -60.0, p2, blocked: false, block_prob: None };
        let mut seq: Vec<_> = (0..20).map(|t| mk(t, -70.0)).collect();
        for s in &mut seq[3..6] {
            s.p2 = -50.0;
        }
        let cfg = HandoverConfig::default();
        assert_eq!(event_onset(&seq, &cfg), None);
        for s in &mut seq[10..15] {
            s.p2 = -50.0;
        }
        assert_eq!(event_onset(&seq, &cfg), Some(10));
    }

    #[test]
    fn csv_layout() {
        let e = generate_ensemble(&EnsembleConfig { sequences: 5, ..EnsembleConfig::default() }, 3).unwrap();
        let csv = handover_metrics_to_csv(&evaluate_strategies(&e, &HandoverConfig::default(), 5).unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "metric,no_handover,immediate,oracle,persistence");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn empty_ensemble_rejected() {
        assert!(evaluate_strategies(&[], &HandoverConfig::default(), 5).is_err());
    }
}
