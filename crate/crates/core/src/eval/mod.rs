//! Validation protocols, their statistics, dataset manifests and image I/O.

mod distort;
mod image_io;
mod protocols;
mod records;
mod stats;
pub mod synthetic;

pub use distort::{gaussian_blur, gaussian_taps, synth_distortions, white_noise, DistortionKind};
pub use image_io::{decode_image, decode_netpbm, encode_netpbm, write_image};
pub use protocols::{
    afc_credit, afc_score, best_threshold_accuracy, jnd_score, mean_afc_credit, qa_test,
    AfcResult, JndResult, QaResult,
};
pub use records::{
    load_manifest, write_manifest, AfcRecord, JndRecord, JndScore, Manifest, Protocol, QaRecord,
};
pub use stats::{
    average_ranks, fit_logistic, lcc, qa_statistics, rmse, srocc, Logistic4, QaStatistics,
    FIT_MAX_ITERATIONS, FIT_TOLERANCE,
};
pub use synthetic::{texture, write_blur_datasets, SyntheticDatasets, TextureKind};
