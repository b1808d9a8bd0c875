use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::{RoutingPolicy, TabularPolicy};
use super::reward::RewardModel;
use super::state::DegradationState;
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream, SimRng};

/// Episode state distribution: clean with `clean_fraction`, otherwise each
/// modality degraded independently with `p_modality`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalMix {
    pub clean_fraction: f64,
    pub p_modality: f64,
}

impl Default for EvalMix {
    fn default() -> Self {
        Self {
            clean_fraction: 0.5,
            p_modality: 0.35,
        }
    }
}

impl EvalMix {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DegradationState {
        if rng.random_bool(self.clean_fraction) {
            return DegradationState::CLEAN;
        }
        let mask = (0..4).fold(0u8, |m, b| if rng.random_bool(self.p_modality) { m | 1 << b } else { m });
        DegradationState::from_mask(mask).expect("4-bit mask")
    }

    /// Exact probability of each of the 16 states.
    pub fn state_probabilities(&self) -> [f64; 16] {
        std::array::from_fn(|mask| {
            let k = (mask as u32).count_ones() as i32;
            let p_deg = self.p_modality.powi(k) * (1.0 - self.p_modality).powi(4 - k);
            let clean = if mask == 0 { self.clean_fraction } else { 0.0 };
            clean + (1.0 - self.clean_fraction) * p_deg
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub method: String,
    pub avg_reward: f64,
    /// Percent of episodes whose action attains the oracle reward.
    pub pct_optimal: f64,
    /// Percent of episodes where either combo uses a degraded modality.
    pub pct_degraded_used: f64,
}

/// Scores each policy on the same `episodes` states. Episode `i` draws its
/// state and any policy randomness from streams keyed by `(seed, i)`, so the
/// result does not depend on scheduling.
pub fn evaluate_policies(
    policies: &[&dyn RoutingPolicy],
    model: &RewardModel,
    oracle: &TabularPolicy,
    episodes: usize,
    mix: &EvalMix,
    seed: u64,
) -> Result<Vec<PolicyMetrics>> {
    if episodes == 0 {
        return Err(Error::InvalidConfig("episodes must be > 0".into()));
    }
    let states: Vec<DegradationState> = (0..episodes)
        .map(|i| mix.sample(&mut rng_for(seed, stream::EVAL_EPISODE, i as u64)))
        .collect();
    Ok(policies
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            // Collected before summing so the float total is order-independent.
            let per: Vec<(f64, usize, usize)> = states
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut rng: SimRng = rng_for(seed ^ ((pi as u64) << 32), stream::POLICY, i as u64);
                    let a = p.act(*s, &mut rng);
                    let r = model.reward(*s, a);
                    let best = model.reward(*s, oracle.get(*s));
                    (r, (r >= best - 1e-12) as usize, a.uses_degraded(*s) as usize)
                })
                .collect();
            let (sum, opt, deg) = per
                .iter()
                .fold((0.0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
            let n = episodes as f64;
            PolicyMetrics {
                method: p.name().to_string(),
                avg_reward: sum / n,
                pct_optimal: 100.0 * opt as f64 / n,
                pct_degraded_used: 100.0 * deg as f64 / n,
            }
        })
        .collect())
}

pub fn metrics_to_csv(rows: &[PolicyMetrics]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "avg_reward", "pct_optimal_actions", "pct_degraded_sensors_used"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            format!("{:.4}", r.avg_reward),
            format!("{:.1}", r.pct_optimal),
            format!("{:.1}", r.pct_degraded_used),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}
