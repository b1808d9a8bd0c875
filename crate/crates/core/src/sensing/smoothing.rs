use serde::{Deserialize, Serialize};

use super::degradation::DegradationFlags;
use crate::error::{Error, Result};

/// Trailing window length, ticks.
pub const WINDOW: usize = 5;
/// Consecutive above-threshold ticks required before a modality is excluded.
pub const PERSISTENCE: u32 = 5;

/// Trailing impairment fraction and persistence state per modality.
///
/// The fraction is the mean of the binary flags over the last `WINDOW` ticks,
/// or over every tick seen so far while fewer than `WINDOW` have arrived.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SmoothedStatus {
    history: Vec<DegradationFlags>,
    pub fraction: [f64; 4],
    /// Consecutive ticks with `fraction > tau`.
    pub above_run: [u32; 4],
    pub persistent: [bool; 4],
}

impl SmoothedStatus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Modalities currently excluded by the persistence gate.
    pub fn persistent_mask(&self) -> u8 {
        DegradationFlags(self.persistent).mask()
    }

    pub fn ticks_seen(&self) -> usize {
        self.history.len()
    }
}

pub fn smooth_update(status: &SmoothedStatus, flags: DegradationFlags, tau: f64) -> Result<SmoothedStatus> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Domain(format!("threshold {tau} outside (0,1]")));
    }
    let mut next = status.clone();
    next.history.push(flags);
    if next.history.len() > WINDOW {
        next.history.remove(0);
    }
    let n = next.history.len() as f64;
    for k in 0..4 {
        let count = next.history.iter().filter(|f| f.0[k]).count();
        next.fraction[k] = count as f64 / n;
        if next.fraction[k] > tau {
            next.above_run[k] = next.above_run[k].saturating_add(1);
            if next.above_run[k] >= PERSISTENCE {
                next.persistent[k] = true;
            }
        } else {
            next.above_run[k] = 0;
            next.persistent[k] = false;
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(stream: &[bool], tau: f64) -> SmoothedStatus {
        let mut s = SmoothedStatus::new();
        for b in stream {
            s = smooth_update(&s, DegradationFlags([*b, false, false, false]), tau).unwrap();
        }
        s
    }

    #[test]
    fn five_degraded_is_persistent() {
        let s = run(&[true; 5], 0.3);
        assert_eq!(s.fraction[0], 1.0);
        assert!(s.persistent[0]);
        assert_eq!(s.persistent_mask(), 1);
    }

    #[test]
    fn single_blip_decays() {
        let s = run(&[true, false, false, false, false], 0.3);
        assert_eq!(s.fraction[0], 0.2);
        assert!(!s.persistent[0]);
    }

    #[test]
    fn all_clean() {
        let s = run(&[false; 12], 0.3);
        assert_eq!(s.fraction, [0.0; 4]);
        assert_eq!(s.persistent, [false; 4]);
    }

    #[test]
    fn clears_when_fraction_drops() {
        let mut v = vec![true; 8];
        v.extend([false; 4]);
        // Trailing window now holds one degraded flag: 0.2 <= 0.3.
        let s = run(&v, 0.3);
        assert!(!s.persistent[0]);
        assert_eq!(s.above_run[0], 0);
    }

    #[test]
    fn tau_domain() {
        let s = SmoothedStatus::new();
        assert!(smooth_update(&s, DegradationFlags::default(), 0.0).is_err());
        assert!(smooth_update(&s, DegradationFlags::default(), 1.01).is_err());
        assert!(smooth_update(&s, DegradationFlags::default(), 1.0).is_ok());
    }

    /// Recomputes fraction and persistence from the full stream.
    fn scan(stream: &[bool], tau: f64) -> (f64, bool) {
        let frac = |t: usize| {
            let lo = (t + 1).saturating_sub(WINDOW);
            let w = &stream[lo..=t];
            w.iter().filter(|b| **b).count() as f64 / w.len() as f64
        };
        let t = stream.len() - 1;
        let run = (0..=t).rev().take_while(|i| frac(*i) > tau).count();
        (frac(t), run >= PERSISTENCE as usize)
    }

    proptest! {
        #[test]
        fn matches_brute_force_scanner(
            stream in prop::collection::vec(any::<bool>(), 1..60),
            tau_tenths in 1u32..=10,
        ) {
            let tau = tau_tenths as f64 / 10.0;
            let s = run(&stream, tau);
            let (f, p) = scan(&stream, tau);
            prop_assert_eq!(s.fraction[0], f);
            prop_assert_eq!(s.persistent[0], p);
            if stream.len() >= WINDOW {
                let c = stream[stream.len() - WINDOW..].iter().filter(|b| **b).count();
                prop_assert_eq!(s.fraction[0], c as f64 / WINDOW as f64);
            }
        }

        #[test]
        fn short_runs_never_persist(stream in prop::collection::vec(any::<bool>(), 1..60)) {
            let mut s = SmoothedStatus::new();
            let mut above = 0u32;
            for b in stream {
                s = smooth_update(&s, DegradationFlags([b, false, false, false]), 0.3).unwrap();
                above = if s.fraction[0] > 0.3 { above + 1 } else { 0 };
                prop_assert_eq!(s.persistent[0], above >= PERSISTENCE);
            }
        }
    }
}
