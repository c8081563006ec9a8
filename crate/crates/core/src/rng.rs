//! Hierarchical seed derivation.
//!
//! Every random stream in a run is derived from the run seed and a purpose
//! label, so switching one feature on or off (e.g. warm-up) never shifts
//! the draws seen by unrelated components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stable child seed: first eight bytes of `SHA-256(parent_le || label)`.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn stream(parent: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, label))
}

/// Purpose labels for the streams a training run uses.
pub mod purpose {
    pub const PARTITION: &str = "partition";
    pub const BATCHING: &str = "batching";
    pub const NOISE: &str = "noise";
    pub const G_INIT: &str = "g-init";
    pub const D1_INIT: &str = "d1-init";
    pub const D2_INIT: &str = "d2-init";
}
