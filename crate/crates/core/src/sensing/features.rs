//! Synthetic handcrafted features. Every feature is standardized: a clean
//! modality draws N(0, 1); an impaired one shifts the mean by
//! `severity * SHIFT[kind]` standard deviations.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::degradation::{DegradationFlags, DegradationKind, DegradationSpec, Impairment};
use crate::agents::Modality;
use crate::seed::{rng_for, stream, SimRng};

pub const N_FEATURES: usize = 9;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "blur_entropy",
    "brightness_mean",
    "brightness_std",
    "positional_variance",
    "displacement_consistency",
    "point_dispersion",
    "density",
    "spectral_entropy",
    "snr",
];

/// Feature slots owned by each modality, canonical modality order.
pub const FEATURE_SLOTS: [std::ops::Range<usize>; 4] = [0..3, 3..5, 5..7, 7..9];

/// Mean shift in standard deviations at severity 1, over the owning modality's
/// slots. The largest magnitude per kind is at least 10, so severity 0.6 still
/// sits 6 sigma from the clean mean.
fn shift(kind: DegradationKind) -> &'static [f64] {
    match kind {
        DegradationKind::Blur => &[-10.0, 0.0, -6.0],
        DegradationKind::Oversaturate => &[-4.0, 10.0, -6.0],
        DegradationKind::Darken => &[-3.0, -10.0, -6.0],
        DegradationKind::Jitter => &[10.0, -8.0],
        DegradationKind::Sparsify => &[8.0, -10.0],
        DegradationKind::GaussianNoise => &[8.0, -10.0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub blur_entropy: f64,
    pub brightness_mean: f64,
    pub brightness_std: f64,
    pub positional_variance: f64,
    pub displacement_consistency: f64,
    pub point_dispersion: f64,
    pub density: f64,
    pub spectral_entropy: f64,
    pub snr: f64,
}

impl FeatureVector {
    pub fn from_array(a: [f64; N_FEATURES]) -> Self {
        Self {
            blur_entropy: a[0],
            brightness_mean: a[1],
            brightness_std: a[2],
            positional_variance: a[3],
            displacement_consistency: a[4],
            point_dispersion: a[5],
            density: a[6],
            spectral_entropy: a[7],
            snr: a[8],
        }
    }

    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.blur_entropy,
            self.brightness_mean,
            self.brightness_std,
            self.positional_variance,
            self.displacement_consistency,
            self.point_dispersion,
            self.density,
            self.spectral_entropy,
            self.snr,
        ]
    }

    /// Mean of the feature distribution under `spec`.
    pub fn expected(spec: &DegradationSpec) -> Self {
        let mut a = [0.0; N_FEATURES];
        for m in Modality::ALL {
            let imp = spec.get(m);
            for (slot, s) in FEATURE_SLOTS[m.index()].clone().zip(shift(imp.kind)) {
                a[slot] = s * imp.severity;
            }
        }
        Self::from_array(a)
    }
}

pub fn synth_features_with<R: Rng>(rng: &mut R, spec: &DegradationSpec) -> FeatureVector {
    let mean = FeatureVector::expected(spec).to_array();
    let mut a = [0.0; N_FEATURES];
    for (x, mu) in a.iter_mut().zip(mean) {
        let z: f64 = StandardNormal.sample(rng);
        *x = mu + z;
    }
    FeatureVector::from_array(a)
}

pub fn synth_features(spec: &DegradationSpec, seed: u64) -> FeatureVector {
    synth_features_with(&mut SimRng::seed_from_u64(seed), spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub flags: DegradationFlags,
}

/// How the training corpus impairs each sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    /// Independent per-modality impairment probability.
    pub p_degraded: f64,
    pub severity_min: f64,
    pub severity_max: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            p_degraded: 0.5,
            severity_min: 0.6,
            severity_max: 1.0,
        }
    }
}

/// Random impairment of one modality: uniform kind, uniform severity.
pub fn random_impairment<R: Rng>(rng: &mut R, m: Modality, lo: f64, hi: f64) -> Impairment {
    let kinds = DegradationKind::for_modality(m);
    let kind = kinds[rng.random_range(0..kinds.len())];
    let severity = if hi > lo {
        Uniform::new_inclusive(lo, hi).expect("valid range").sample(rng)
    } else {
        lo
    };
    Impairment { kind, severity }
}

/// `n` labeled samples; sample `i` depends only on `(seed, i)`.
pub fn generate_corpus(n: usize, cfg: &CorpusConfig, seed: u64) -> Vec<LabeledSample> {
    (0..n)
        .map(|i| {
            let mut rng = rng_for(seed, stream::CORPUS, i as u64);
            let mut spec = DegradationSpec::clean();
            for m in Modality::ALL {
                if rng.random_bool(cfg.p_degraded) {
                    *spec.get_mut(m) = random_impairment(&mut rng, m, cfg.severity_min, cfg.severity_max);
                }
            }
            LabeledSample {
                features: synth_features_with(&mut rng, &spec),
                flags: DegradationFlags::from_mask(spec.degraded_mask()),
            }
        })
        .collect()
}
