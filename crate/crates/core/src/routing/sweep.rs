//! Reward as a function of the persistence threshold, through the full
//! features -> classifier -> smoothing -> policy pipeline.
//!
//! Each episode gives every modality a latent impairment level `s`: the
//! per-tick probability that a frame is impaired. A modality is truly
//! degraded, and penalized by the reward, when `s > harmful_level`. The
//! policy only sees modalities the smoothing stage marks persistent.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::RoutingPolicy;
use super::reward::RewardModel;
use super::state::DegradationState;
use crate::agents::Modality;
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream, SimRng};
use crate::sensing::{
    random_impairment, smooth_update, synth_features_with, Classifier, DegradationFlags, DegradationSpec,
    SmoothedStatus,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub taus: Vec<f64>,
    pub episodes: usize,
    pub ticks: usize,
    /// Leading ticks of each episode that prime the smoothing window and the
    /// persistence counter without being scored.
    pub burn_in: usize,
    /// Probability that a modality is drawn as impaired for an episode.
    pub p_impaired: f64,
    /// Beta shape of the impaired level; mode `(a - 1) / (a + b - 2)`.
    pub beta_a: f64,
    pub beta_b: f64,
    /// Level of a modality that is not impaired: its rate of transient
    /// frame glitches.
    pub clean_level: f64,
    pub severity_min: f64,
    pub severity_max: f64,
    /// Levels above this make the modality truly degraded.
    pub harmful_level: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            taus: (1..=10).map(|i| i as f64 / 10.0).collect(),
            episodes: 400,
            ticks: 40,
            burn_in: 10,
            p_impaired: 0.5,
            beta_a: 4.5,
            beta_b: 7.5,
            clean_level: 0.3,
            severity_min: 0.6,
            severity_max: 1.0,
            harmful_level: 0.3,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taus.is_empty() || self.taus.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::InvalidConfig("thresholds must lie in (0,1]".into()));
        }
        if self.episodes == 0 || self.ticks <= self.burn_in {
            return Err(Error::InvalidConfig("episodes must be > 0 and ticks must exceed burn_in".into()));
        }
        if !(self.beta_a > 0.0 && self.beta_b > 0.0) {
            return Err(Error::InvalidConfig("beta shapes must be > 0".into()));
        }
        let unit = [self.p_impaired, self.clean_level, self.severity_min, self.severity_max, self.harmful_level];
        if unit.iter().any(|v| !(0.0..=1.0).contains(v)) || self.severity_min > self.severity_max {
            return Err(Error::InvalidConfig("sweep probabilities and severities must lie in [0,1]".into()));
        }
        Ok(())
    }

    /// Mode of the impaired-level distribution.
    pub fn level_mode(&self) -> f64 {
        (self.beta_a - 1.0) / (self.beta_a + self.beta_b - 2.0)
    }
}

/// Per-tick mean reward components at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub cumulative: f64,
    pub performance: f64,
    pub latency: f64,
}

struct Episode {
    truth: DegradationState,
    flags: Vec<DegradationFlags>,
}

fn simulate_episode(cfg: &SweepConfig, classifier: &Classifier, index: u64) -> Result<Episode> {
    let mut rng = rng_for(cfg.seed, stream::SWEEP_EPISODE, index);
    let beta = Beta::new(cfg.beta_a, cfg.beta_b).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut level = [0.0; 4];
    for l in &mut level {
        *l = if rng.random_bool(cfg.p_impaired) {
            beta.sample(&mut rng)
        } else {
            cfg.clean_level
        };
    }
    let truth_mask = Modality::ALL
        .iter()
        .filter(|m| level[m.index()] > cfg.harmful_level)
        .fold(0u8, |acc, m| acc | m.bit());
    let mut flags = Vec::with_capacity(cfg.ticks);
    for _ in 0..cfg.ticks {
        let mut spec = DegradationSpec::clean();
        for m in Modality::ALL {
            if rng.random_bool(level[m.index()]) {
                *spec.get_mut(m) = random_impairment(&mut rng, m, cfg.severity_min, cfg.severity_max);
            }
        }
        flags.push(classifier.classify(&synth_features_with(&mut rng, &spec)));
    }
    Ok(Episode {
        truth: DegradationState::from_mask(truth_mask)?,
        flags,
    })
}

pub fn threshold_sweep(
    cfg: &SweepConfig,
    classifier: &Classifier,
    policy: &dyn RoutingPolicy,
    model: &RewardModel,
) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let episodes: Vec<Episode> = (0..cfg.episodes as u64)
        .into_par_iter()
        .map(|i| simulate_episode(cfg, classifier, i))
        .collect::<Result<_>>()?;
    let mut dummy: SimRng = rng_for(cfg.seed, stream::POLICY, 0);
    let mut out = Vec::with_capacity(cfg.taus.len());
    for &tau in &cfg.taus {
        let (mut perf, mut lat, mut tot) = (0.0, 0.0, 0.0);
        for ep in &episodes {
            let mut status = SmoothedStatus::new();
            for (t, f) in ep.flags.iter().enumerate() {
                status = smooth_update(&status, *f, tau)?;
                if t < cfg.burn_in {
                    continue;
                }
                let perceived = DegradationState::from_mask(status.persistent_mask())?;
                let a = policy.act(perceived, &mut dummy);
                let p = model.parts(ep.truth, a);
                perf += p.perf;
                lat += p.latency;
                tot += p.total;
            }
        }
        let n = (cfg.episodes * (cfg.ticks - cfg.burn_in)) as f64;
        out.push(SweepPoint {
            tau,
            cumulative: tot / n,
            performance: perf / n,
            latency: lat / n,
        });
    }
    Ok(out)
}

/// Threshold with the highest cumulative reward; exact ties go to the larger
/// threshold, which excludes fewer sensors.
pub fn best_tau(points: &[SweepPoint]) -> Option<f64> {
    points
        .iter()
        .fold(None::<&SweepPoint>, |best, p| match best {
            Some(b) if b.cumulative > p.cumulative => Some(b),
            Some(b) if b.cumulative == p.cumulative && b.tau > p.tau => Some(b),
            _ => Some(p),
        })
        .map(|p| p.tau)
}

pub fn sweep_to_csv(points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tau", "cumulative_reward", "performance_reward", "latency_reward"])?;
    for p in points {
        w.write_record([
            format!("{:.1}", p.tau),
            format!("{:.6}", p.cumulative),
            format!("{:.6}", p.performance),
            format!("{:.6}", p.latency),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}
