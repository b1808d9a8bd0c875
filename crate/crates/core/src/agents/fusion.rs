use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fused {
    /// Softmax of the reliability scores; sums to 1.
    pub weights: Vec<f64>,
    pub prob: f64,
}

/// Softmax-of-F1 weighted average of per-modality blockage probabilities.
pub fn late_fuse(scores: &[f64], probs: &[f64]) -> Result<Fused> {
    if scores.is_empty() || scores.len() != probs.len() {
        return Err(Error::Domain(format!(
            "late fusion needs matching non-empty inputs, got {} scores and {} probabilities",
            scores.len(),
            probs.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain("late fusion inputs out of range".into()));
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let weights: Vec<f64> = exps.iter().map(|e| e / z).collect();
    let prob = weights.iter().zip(probs).map(|(w, p)| w * p).sum::<f64>();
    // Rounding can push the average a hair outside the hull of the inputs.
    let lo = probs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(Fused {
        weights,
        prob: prob.clamp(lo, hi),
    })
}

/// Positive-class loss weight `alpha * n_neg / n_pos`.
pub fn pos_class_weight(n_nonblocked: u64, n_blocked: u64, alpha: f64) -> Result<f64> {
    if n_blocked == 0 {
        return Err(Error::Domain("no blocked samples".into()));
    }
    Ok(alpha * n_nonblocked as f64 / n_blocked as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_scores_average() {
        let f = late_fuse(&[0.7; 4], &[0.2, 0.4, 0.6, 0.8]).unwrap();
        for w in &f.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert!((f.prob - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_modality_passthrough() {
        let f = late_fuse(&[0.3], &[0.83]).unwrap();
        assert_eq!(f.weights, vec![1.0]);
        assert_eq!(f.prob, 0.83);
    }

    #[test]
    fn two_modality_hand_softmax() {
        let f = late_fuse(&[0.9, 0.6], &[1.0, 0.0]).unwrap();
        let oracle = 0.9f64.exp() / (0.9f64.exp() + 0.6f64.exp());
        assert!((f.prob - oracle).abs() < 1e-12);
        assert!((f.prob - 0.5744).abs() < 1e-4);
    }

    #[test]
    fn empty_rejected() {
        assert!(late_fuse(&[], &[]).is_err());
        assert!(late_fuse(&[0.5], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn class_weight_examples() {
        assert!((pos_class_weight(15050, 3617, 1.1).unwrap() - 4.577).abs() < 1e-3);
        assert_eq!(pos_class_weight(10, 10, 1.0).unwrap(), 1.0);
        assert_eq!(pos_class_weight(10, 3, 0.0).unwrap(), 0.0);
        assert!(pos_class_weight(10, 0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn weights_simplex_and_hull(pairs in prop::collection::vec((-5.0f64..5.0, 0.0f64..=1.0), 1..8)) {
            let (s, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let f = late_fuse(&s, &p).unwrap();
            prop_assert!((f.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(f.weights.iter().all(|w| *w >= 0.0));
            let lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(f.prob >= lo && f.prob <= hi);
        }
    }
}
