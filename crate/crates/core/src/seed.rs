//! Reproducible RNG streams.
//!
//! Every random decision in the crate draws from a ChaCha8 generator whose
//! key is derived from a user seed plus a purpose tag, and whose stream is an
//! index (tree number, fold number, ...). Independent streams never overlap,
//! so parallel and serial execution produce identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags used to separate the key space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Forest = 0x5f6f_7265_7374,
    GridInit = 0x6772_6964,
    Shuffle = 0x7368_7566,
    Folds = 0x666f_6c64,
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for `(seed, purpose)` on stream `index`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(purpose as u64)));
    rng.set_stream(index);
    rng
}
