//! Degradation injection, feature synthesis, the status classifier and
//! temporal smoothing of its flags.

mod degradation;
mod features;
mod forest;
mod smoothing;

pub use degradation::{DegradationFlags, DegradationKind, DegradationSpec, Impairment};
pub use features::{
    generate_corpus, random_impairment, synth_features, synth_features_with, CorpusConfig,
    FeatureVector, LabeledSample, FEATURE_NAMES, N_FEATURES,
};
pub use forest::{
    classify, per_head_f1, train_classifier, Classifier, ForestConfig, FOREST_FORMAT_VERSION,
};
pub use smoothing::{smooth_update, SmoothedStatus, PERSISTENCE, WINDOW};
