//! Reproducible seed derivation for replicates and grid cells.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for the `index`-th independent work unit under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ splitmix64(index)
}

/// Seed for replicate `replicate` of grid cell `cell`.
pub fn derive_seed2(master: u64, cell: u64, replicate: u64) -> u64 {
    derive_seed(derive_seed(master, cell), replicate.wrapping_add(0x5851_F42D_4C95_7F2D))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
