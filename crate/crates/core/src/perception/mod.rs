//! Channel scoring against human contrast sensitivity and orientation
//! selectivity, and PE-ranked channel subsets.

mod csf;
mod probe;
mod scores;
mod subset;

pub use csf::{ContrastSensitivity, CsfModel};
pub use probe::{
    frequency_response, orientation_response, probe_layer, read_scores_csv, score_curves,
    write_curves_csv, write_scores_csv, ChannelScore, LayerScores, ResponseCurves,
};
pub use scores::{finite_difference, mu1, mu2, perceptual_efficacy};
pub use subset::{pe_ranks, select_subset, subset_size, ChannelSubset, SelectMode, SubsetKind};
