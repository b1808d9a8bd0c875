//! Performance table, mock predictors and late fusion.

mod combo;
mod fusion;
mod mock;
mod table;

pub use combo::{Modality, ModalityCombo};
pub use fusion::{late_fuse, pos_class_weight, Fused};
pub use mock::{
    implied_fpr, mock_beam_predict, mock_beam_predict_with, mock_blockage_predict,
    mock_blockage_predict_with, BeamPrediction, BlockagePrediction, BLOCKAGE_BASE_RATE, TOP_K,
};
pub use table::{
    sha256_hex, PerfRecord, PerfTable, CSV_HEADER, HORIZONS, PERF_TABLE_CSV, PERF_TABLE_FILE,
    PERF_TABLE_SHA256,
};
