// `!(x > 0.0)` style guards reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod apps;
pub mod decomp;
pub mod eig;
pub mod harness;
pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod norms;
pub mod oracles;
pub mod rng;
pub mod sketch;
pub mod stats;

pub use decomp::{qr_thin, svd_thin};
pub use eig::{sym_eig, sym_eig_top};
pub use error::{LabError, Result};
pub use matrix::{DenseMatrix, OrthonormalBasis, SpectrumPair};
pub use norms::{norms, spectral_norm, two_to_inf_norm, MatrixNorms};
pub use rng::{gaussian_matrix, RngStream};
pub use metrics::{d2, d2_inf, procrustes_align, sin_theta_norm, AlignmentResult};
pub use sketch::{power_sketch, rs_rsvd_asym, rs_rsvd_sym, rs_rsvd_sym_path, LowRankMode, RsvdOutput, SketchConfig};
