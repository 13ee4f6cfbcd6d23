//! The downstream statistical procedures built on rs-RSVD.

pub mod cluster;
pub mod completion;
pub mod pca;

pub use cluster::{cluster_rows, match_labels, rsvd_spectral_cluster, ClusteringResult, Clusterer, LabelMatch};
pub use completion::{
    entry_ci, estimate_p, exact_complete, rsvd_complete, rsvd_complete_path, CompletionMode, CompletionResult, EntryCI, SamplingRate,
};
pub use pca::{exact_missing_pca, missing_pca_gram, rsvd_missing_pca, rsvd_missing_pca_path};
