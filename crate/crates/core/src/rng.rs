//! Counter-based random substreams.
//!
//! Every random draw in the crate comes from a generator keyed by a root seed
//! and a path of integers (stage tag, replicate index, ...). A replicate's
//! draws therefore never depend on the order in which replicates run or on how
//! many threads run them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used for all substreams.
pub type StreamRng = ChaCha8Rng;

/// Stage tags for substream paths.
pub mod tag {
    pub const RESIDUAL_BOOTSTRAP: u64 = 1;
    pub const DOUBLE_INNER: u64 = 3;
    pub const SMOOTHED_BOOTSTRAP: u64 = 5;
    pub const STUDY_DATA: u64 = 6;
    pub const STUDY_BOOT: u64 = 7;
    pub const TYPICAL_DATA: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut s = splitmix64(seed);
    for &p in path {
        s = splitmix64(s ^ splitmix64(p.wrapping_add(0x2545_F491_4F6C_DD1D)));
    }
    s
}

/// Generator for the substream at `path` below `seed`.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, path))
}
