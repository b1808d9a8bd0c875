//! Statistical stand-ins for the beam and blockage predictors, calibrated to
//! the performance table.

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::combo::ModalityCombo;
use super::table::{PerfTable, HORIZONS};
use crate::error::{Error, Result};
use crate::linkmodel::{apl_db, optimal_beam, BeamPowerProfile};
use crate::seed::SimRng;

pub const TOP_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPrediction {
    /// Distinct codeword indices, rank order.
    pub indices: [usize; TOP_K],
    /// Linear power of each predicted codeword, read from the truth profile.
    pub powers: [f64; TOP_K],
}

impl BeamPrediction {
    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    /// Strongest member of the set, lowest rank on ties.
    pub fn best(&self) -> (usize, f64) {
        let mut k = 0;
        for i in 1..TOP_K {
            if self.powers[i] > self.powers[k] {
                k = i;
            }
        }
        (self.indices[k], self.powers[k])
    }

    /// Power loss of the best predicted codeword against the true optimum.
    pub fn apl_db(&self, truth: &BeamPowerProfile) -> Result<f64> {
        let star = truth.powers[optimal_beam(truth)?];
        apl_db(self.best().1, star)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockagePrediction {
    /// Probability of blockage at t+1 .. t+5.
    pub probs: [f64; HORIZONS],
}

impl BlockagePrediction {
    pub fn new(probs: [f64; HORIZONS]) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("blockage probabilities must lie in [0,1]".into()));
        }
        Ok(Self { probs })
    }

    /// Verdict for the next tick.
    pub fn blocked_next(&self) -> bool {
        self.probs[0] > 0.5
    }
}

/// Offset >= 1, geometric with success probability 1/2.
fn geometric_offset<R: Rng>(rng: &mut R) -> usize {
    let mut k = 1;
    while rng.random_bool(0.5) {
        k += 1;
    }
    k
}

fn near_miss<R: Rng>(rng: &mut R, truth: usize, q: usize) -> usize {
    let off = geometric_offset(rng) as i64;
    let signed = if rng.random_bool(0.5) { off } else { -off };
    (truth as i64 + signed).clamp(0, q as i64 - 1) as usize
}

/// Fills `out` with distinct near-miss indices not already taken. Clamping can
/// repeat an index, so after a bounded number of draws the closest free
/// codewords are used.
fn fill_near_misses<R: Rng>(rng: &mut R, truth: usize, q: usize, taken: &mut Vec<usize>) {
    let mut tries = 0;
    while taken.len() < TOP_K && tries < 64 {
        let i = near_miss(rng, truth, q);
        if !taken.contains(&i) && i != truth {
            taken.push(i);
        }
        tries += 1;
    }
    let mut d = 1;
    while taken.len() < TOP_K {
        for cand in [truth as i64 - d, truth as i64 + d] {
            if taken.len() < TOP_K && (0..q as i64).contains(&cand) && !taken.contains(&(cand as usize)) {
                taken.push(cand as usize);
            }
        }
        d += 1;
    }
}

pub fn mock_beam_predict_with<R: Rng>(
    rng: &mut R,
    combo: ModalityCombo,
    truth: &BeamPowerProfile,
    horizon: usize,
    table: &PerfTable,
) -> Result<BeamPrediction> {
    let q = truth.len();
    if q <= TOP_K {
        return Err(Error::Domain(format!("codebook of {q} beams is too small for top-{TOP_K}")));
    }
    let acc = table.lookup(combo, horizon)?.beam_top3_acc;
    let star = optimal_beam(truth)?;
    let mut set = Vec::with_capacity(TOP_K);
    if rng.random_bool(acc) {
        set.push(star);
    }
    fill_near_misses(rng, star, q, &mut set);
    let indices = [set[0], set[1], set[2]];
    Ok(BeamPrediction {
        indices,
        powers: indices.map(|i| truth.powers[i]),
    })
}

pub fn mock_beam_predict(
    combo: ModalityCombo,
    truth: &BeamPowerProfile,
    horizon: usize,
    table: &PerfTable,
    seed: u64,
) -> Result<BeamPrediction> {
    mock_beam_predict_with(&mut SimRng::seed_from_u64(seed), combo, truth, horizon, table)
}

/// False-positive rate implied by precision = recall = F1 at base rate `pi`.
pub fn implied_fpr(f1: f64, pi: f64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::Domain(format!("base rate {pi} outside (0,1)")));
    }
    Ok((pi * (1.0 - f1) / (1.0 - pi)).min(1.0))
}

/// Blocked-sample share of the reference dataset, 3617 of 18667.
pub const BLOCKAGE_BASE_RATE: f64 = 3617.0 / 18667.0;

pub fn mock_blockage_predict_with<R: Rng>(
    rng: &mut R,
    combo: ModalityCombo,
    truth_blocked: &[bool; HORIZONS],
    pi: f64,
    table: &PerfTable,
) -> Result<BlockagePrediction> {
    let mut probs = [0.0; HORIZONS];
    for (h, (p, blocked)) in probs.iter_mut().zip(truth_blocked).enumerate() {
        let f1 = table.lookup(combo, h + 1)?.block_f1;
        let fpr = implied_fpr(f1, pi)?;
        let positive = if *blocked {
            rng.random_bool(f1)
        } else {
            rng.random_bool(fpr)
        };
        let u: f64 = rng.random();
        // u in [0,1): positive maps to (0.5,1], negative to [0,0.5).
        *p = if positive { 1.0 - 0.5 * u } else { 0.5 * u };
    }
    Ok(BlockagePrediction { probs })
}

pub fn mock_blockage_predict(
    combo: ModalityCombo,
    truth_blocked: &[bool; HORIZONS],
    pi: f64,
    table: &PerfTable,
    seed: u64,
) -> Result<BlockagePrediction> {
    mock_blockage_predict_with(&mut SimRng::seed_from_u64(seed), combo, truth_blocked, pi, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkmodel::BeamCodebook;

    fn table() -> PerfTable {
        PerfTable::bundled().unwrap()
    }

    fn c(s: &str) -> ModalityCombo {
        s.parse().unwrap()
    }

    #[test]
    fn perfect_accuracy_always_contains_truth() {
        let t = table().map_records(|r| super::super::table::PerfRecord { beam_top3_acc: 1.0, ..*r });
        let cb = BeamCodebook::default();
        for seed in 0..200 {
            let prof = cb.profile(seed as f64 * 0.7 - 70.0, 1.0, -20.0);
            let star = optimal_beam(&prof).unwrap();
            let p = mock_beam_predict(c("gps_only"), &prof, 1, &t, seed).unwrap();
            assert_eq!(p.indices[0], star);
            assert_eq!(p.apl_db(&prof).unwrap(), 0.0);
        }
    }

    #[test]
    fn indices_distinct_even_at_edges() {
        let t = table();
        let cb = BeamCodebook::default();
        for seed in 0..500 {
            let rel = if seed % 2 == 0 { -90.0 } else { 90.0 };
            let prof = cb.profile(rel, 1.0, -20.0);
            let p = mock_beam_predict(c("gps_only"), &prof, 1, &t, seed).unwrap();
            let i = p.indices;
            assert!(i[0] != i[1] && i[1] != i[2] && i[0] != i[2], "{i:?}");
            assert!(i.iter().all(|x| *x < cb.q));
            assert!(p.apl_db(&prof).unwrap() <= 0.0);
        }
    }

    #[test]
    fn beam_mock_deterministic() {
        let t = table();
        let prof = BeamCodebook::default().profile(12.0, 1.0, -20.0);
        let a = mock_beam_predict(c("camera_gps"), &prof, 2, &t, 9).unwrap();
        let b = mock_beam_predict(c("camera_gps"), &prof, 2, &t, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perfect_f1_separates_exactly() {
        let t = table().map_records(|r| super::super::table::PerfRecord { block_f1: 1.0, ..*r });
        let truth = [true, false, true, true, false];
        for seed in 0..100 {
            let p = mock_blockage_predict(c("radar_only"), &truth, BLOCKAGE_BASE_RATE, &t, seed).unwrap();
            for (pr, b) in p.probs.iter().zip(truth) {
                assert_eq!(*pr > 0.5, b);
                assert!((0.0..=1.0).contains(pr));
            }
        }
    }

    #[test]
    fn base_rate_domain_checked() {
        let t = table();
        let truth = [false; HORIZONS];
        assert!(mock_blockage_predict(c("radar_only"), &truth, 0.0, &t, 1).is_err());
        assert!(mock_blockage_predict(c("radar_only"), &truth, 1.0, &t, 1).is_err());
    }

    #[test]
    fn fpr_keeps_precision_equal_to_recall() {
        // precision = TP / (TP + FP) with TP = pi*f1, FP = (1-pi)*fpr.
        let pi = BLOCKAGE_BASE_RATE;
        for f1 in [0.617, 0.9, 0.984] {
            let fpr = implied_fpr(f1, pi).unwrap();
            let precision = pi * f1 / (pi * f1 + (1.0 - pi) * fpr);
            assert!((precision - f1).abs() < 1e-12);
        }
    }
}
