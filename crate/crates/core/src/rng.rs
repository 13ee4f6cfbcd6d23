//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from an [`RngStream`], a
//! `(master_seed, stream_id)` pair backed by ChaCha8. Normal variates use the
//! ziggurat sampler of `rand_distr`; this is fixed for a given build, so the
//! same pair always reproduces the same values regardless of threading.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrix::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A child stream identified by `tag`; children of distinct tags are
    /// distinct streams under the same master seed.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(self.master_seed, mix(self.stream_id ^ mix(tag.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    /// A child stream keyed by a label and a list of integers.
    pub fn derive_labeled(&self, label: &str, keys: &[u64]) -> Self {
        self.derive(hash_key(label, keys))
    }
}

/// splitmix64 finalizer.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable (build-independent) hash of a label and integer keys.
pub fn hash_key(label: &str, keys: &[u64]) -> u64 {
    // FNV-1a over the label, then splitmix over the keys
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    for &k in keys {
        h = mix(h ^ k);
    }
    h
}

/// `rows × cols` matrix of iid standard normals, filled column by column.
pub fn gaussian_matrix(rows: usize, cols: usize, stream: RngStream) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(LabError::invalid(format!(
            "gaussian matrix needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let mut rng = stream.rng();
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Ok(DenseMatrix::from_raw(rows, cols, data))
}
