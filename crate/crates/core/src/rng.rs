//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a [`StreamRng`] obtained
//! from a root seed and an index, so that draw `r` of a Monte Carlo loop
//! depends only on `(root, r)` and never on the scheduling of other draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent stream number `index` under `root`.
pub fn stream(root: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng
}

/// Derives a child root seed, for nesting (e.g. replication, then draw).
pub fn child_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
