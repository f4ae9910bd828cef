//! Seeded random streams.
//!
//! Every random quantity in a run flows from one root seed. Independent
//! consumers get their own substream, derived by mixing the root with a
//! path of integer labels, so that parallel scheduling never changes which
//! numbers a consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a root seed with a path of labels into a new seed.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

pub fn substream(root: u64, path: &[u64]) -> StreamRng {
    stream(derive_seed(root, path))
}
