//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha`), whose output is fixed
//! by its seed on every platform. Stage seeds are derived from a master seed
//! and a stage name: the name is hashed with 64-bit FNV-1a
//! (offset `0xcbf29ce484222325`, prime `0x100000001b3`) and combined with the
//! master seed through the SplitMix64 finalizer.
//!
//! Per-item streams use ChaCha's 64-bit stream selector, so item `i` always
//! sees the same numbers no matter how many other items are drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Seed for a named pipeline stage.
pub fn derive_seed(master: u64, stage: &str) -> u64 {
    mix64(master ^ mix64(fnv1a(stage.as_bytes())))
}

/// Seed for the `index`-th item below a parent seed.
pub fn derive_index(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stage_stream(master: u64, stage: &str) -> Stream {
    stream(derive_seed(master, stage))
}

/// Independent stream for item `index`; drawing from it never shifts any
/// other item's stream.
pub fn item_stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
