//! Synthetic ensemble of potential-handover sequences.
//!
//! Each sequence mixes a slow trend in the BS2 minus Unit 1 power gap
//! (mobility), an optional long blockage of the Unit 1 link, short transient
//! blockages, short BS2 power spikes, and per-tick fading on both links.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fsm::LinkSample;
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub sequences: usize,
    pub ticks: usize,
    /// Unit 1 power at the start of a sequence, dBm.
    pub base_dbm: f64,
    /// BS2 minus Unit 1 gap at the first tick, drawn uniformly.
    pub gap_start_db: [f64; 2],
    /// Gap at the last tick, drawn uniformly; linear in between.
    pub gap_end_db: [f64; 2],
    pub fading_sd_db: f64,
    pub long_blockage_prob: f64,
    pub long_blockage_ticks: [usize; 2],
    pub blockage_loss_db: f64,
    /// Per-tick probability of a one-tick line-of-sight opening inside the
    /// long blockage.
    pub opening_prob: f64,
    /// Mean number of short blockages per sequence.
    pub transient_blockages: f64,
    pub transient_ticks: [usize; 2],
    /// Mean number of BS2 spikes per sequence.
    pub spikes: f64,
    pub spike_ticks: [usize; 2],
    pub spike_db: [f64; 2],
    /// Probability the fused blockage verdict is wrong on a tick.
    pub verdict_error: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            sequences: 500,
            ticks: 100,
            base_dbm: -60.0,
            gap_start_db: [-6.0, -3.0],
            gap_end_db: [-6.0, -3.0],
            fading_sd_db: 1.0,
            long_blockage_prob: 0.9,
            long_blockage_ticks: [40, 150],
            blockage_loss_db: 15.0,
            opening_prob: 0.0,
            transient_blockages: 5.0,
            transient_ticks: [1, 1],
            spikes: 5.0,
            spike_ticks: [1, 1],
            spike_db: [4.0, 10.0],
            verdict_error: 0.02,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.sequences == 0 || self.ticks == 0 {
            return bad("sequences and ticks must be > 0");
        }
        let ranges = [self.long_blockage_ticks, self.transient_ticks, self.spike_ticks];
        if ranges.iter().any(|r| r[0] == 0 || r[0] > r[1]) {
            return bad("tick ranges must satisfy 1 <= lo <= hi");
        }
        let franges = [self.gap_start_db, self.gap_end_db, self.spike_db];
        if franges.iter().any(|r| !(r[0] <= r[1] && r[0].is_finite() && r[1].is_finite())) {
            return bad("dB ranges must satisfy lo <= hi");
        }
        let probs = [self.long_blockage_prob, self.verdict_error, self.opening_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0,1]");
        }
        if !(self.fading_sd_db >= 0.0 && self.blockage_loss_db >= 0.0) {
            return bad("fading and blockage loss must be >= 0");
        }
        if !(self.transient_blockages >= 0.0 && self.spikes >= 0.0) {
            return bad("event rates must be >= 0");
        }
        Ok(())
    }
}

fn uniform_f<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn uniform_u<R: Rng>(rng: &mut R, r: [usize; 2]) -> usize {
    rng.random_range(r[0]..=r[1])
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    }
}

/// Marks `len` ticks starting at a uniform onset, clipped to the sequence.
fn place<R: Rng>(rng: &mut R, mask: &mut [bool], len: usize) {
    let n = mask.len();
    let start = rng.random_range(0..n);
    mask[start..(start + len).min(n)].iter_mut().for_each(|m| *m = true);
}

pub fn generate_sequence(cfg: &EnsembleConfig, seed: u64, index: u64) -> Vec<LinkSample> {
    let mut rng = rng_for(seed, stream::HANDOVER_SEQ, index);
    let n = cfg.ticks;
    let g0 = uniform_f(&mut rng, cfg.gap_start_db);
    let g1 = uniform_f(&mut rng, cfg.gap_end_db);
    let mut blocked = vec![false; n];
    if rng.random_bool(cfg.long_blockage_prob) {
        let len = uniform_u(&mut rng, cfg.long_blockage_ticks);
        place(&mut rng, &mut blocked, len);
        for b in blocked.iter_mut().filter(|b| **b) {
            *b = !rng.random_bool(cfg.opening_prob);
        }
    }
    for _ in 0..poisson(&mut rng, cfg.transient_blockages) {
        let len = uniform_u(&mut rng, cfg.transient_ticks);
        place(&mut rng, &mut blocked, len);
    }
    let mut spike = vec![0.0; n];
    for _ in 0..poisson(&mut rng, cfg.spikes) {
        let len = uniform_u(&mut rng, cfg.spike_ticks);
        let h = uniform_f(&mut rng, cfg.spike_db);
        let start = rng.random_range(0..n);
        spike[start..(start + len).min(n)].iter_mut().for_each(|s| *s = h);
    }
    let fading = Normal::new(0.0, cfg.fading_sd_db).expect("sd >= 0");
    (0..n)
        .map(|t| {
            let frac = if n > 1 { t as f64 / (n - 1) as f64 } else { 0.0 };
            let gap = g0 + (g1 - g0) * frac;
            let loss = if blocked[t] { cfg.blockage_loss_db } else { 0.0 };
            let p1 = cfg.base_dbm - loss + fading.sample(&mut rng);
            let p2 = cfg.base_dbm + gap + spike[t] + fading.sample(&mut rng);
            let verdict = blocked[t] ^ rng.random_bool(cfg.verdict_error);
            let u: f64 = rng.random();
            let block_prob = if verdict { 0.5 + 0.5 * u } else { 0.5 * u };
            LinkSample {
                tick: t as u64,
                p1,
                p2,
                blocked: verdict,
                block_prob: Some(block_prob),
            }
        })
        .collect()
}

pub fn generate_ensemble(cfg: &EnsembleConfig, seed: u64) -> Result<Vec<Vec<LinkSample>>> {
    cfg.validate()?;
    Ok((0..cfg.sequences as u64)
        .into_par_iter()
        .map(|i| generate_sequence(cfg, seed, i))
        .collect())
}

#[derive(Serialize, Deserialize)]
struct Row {
    #[serde(default)]
    seq: usize,
    #[serde(flatten)]
    sample: LinkSample,
}

/// One sample per line, tagged with its sequence index.
pub fn write_ensemble_jsonl<W: Write>(ensemble: &[Vec<LinkSample>], mut w: W) -> Result<()> {
    for (seq, samples) in ensemble.iter().enumerate() {
        for s in samples {
            serde_json::to_writer(&mut w, &Row { seq, sample: *s })?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Inverse of [`write_ensemble_jsonl`]. Lines without `seq` belong to
/// sequence 0; sequence indices must be non-decreasing.
pub fn read_ensemble_jsonl<R: BufRead>(r: R) -> Result<Vec<Vec<LinkSample>>> {
    let mut out: Vec<Vec<LinkSample>> = Vec::new();
    let mut current = None;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| Error::Data(format!("line {}: {e}", i + 1)))?;
        row.sample.validate()?;
        match current {
            Some(c) if row.seq < c => {
                return Err(Error::Data(format!("line {}: sequence {} after {c}", i + 1, row.seq)));
            }
            Some(c) if row.seq == c => out.last_mut().expect("open sequence").push(row.sample),
            _ => {
                out.push(vec![row.sample]);
                current = Some(row.seq);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Data("empty ensemble".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EnsembleConfig {
        EnsembleConfig {
            sequences: 20,
            ..EnsembleConfig::default()
        }
    }

    #[test]
    fn deterministic_and_sized() {
        let a = generate_ensemble(&small(), 4).unwrap();
        assert_eq!(a, generate_ensemble(&small(), 4).unwrap());
        assert_eq!(a.len(), 20);
        assert!(a.iter().all(|s| s.len() == 100));
        assert_ne!(a, generate_ensemble(&small(), 5).unwrap());
    }

    #[test]
    fn quiet_config_has_no_events() {
        let cfg = EnsembleConfig {
            long_blockage_prob: 0.0,
            opening_prob: 0.0,
            transient_blockages: 0.0,
            spikes: 0.0,
            verdict_error: 0.0,
            fading_sd_db: 0.0,
            gap_start_db: [-5.0, -5.0],
            gap_end_db: [-5.0, -5.0],
            ..small()
        };
        for seq in generate_ensemble(&cfg, 1).unwrap() {
            for s in seq {
                assert!(!s.blocked);
                assert_eq!((s.p1, s.p2), (-60.0, -65.0));
            }
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let a = generate_ensemble(&small(), 2).unwrap();
        let mut buf = Vec::new();
        write_ensemble_jsonl(&a, &mut buf).unwrap();
        assert_eq!(read_ensemble_jsonl(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn jsonl_minimal_schema() {
        let text = "{\"tick\":0,\"p1\":-60.0,\"p2\":-70.0,\"blocked\":false}\n\
                    {\"tick\":1,\"p1\":-75.0,\"p2\":-70.0,\"blocked\":true}\n";
        let e = read_ensemble_jsonl(text.as_bytes()).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0][1].block_prob, None);
        assert!(read_ensemble_jsonl("{\"tick\":0}\n".as_bytes()).is_err());
        assert!(read_ensemble_jsonl("".as_bytes()).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(EnsembleConfig { ticks: 0, ..small() }.validate().is_err());
        assert!(EnsembleConfig { transient_ticks: [3, 1], ..small() }.validate().is_err());
        assert!(EnsembleConfig { verdict_error: 2.0, ..small() }.validate().is_err());
    }
}
