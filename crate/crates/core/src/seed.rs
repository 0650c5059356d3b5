//! Seed derivation.
//!
//! Run seeds come from a master seed by a counter scheme: seed `index` of
//! stream `stream` is the 64-bit word at position `index` of the ChaCha8
//! keystream keyed by `master` on that stream. Adding runs never changes the
//! seeds of existing ones.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut rng = stream_rng(master, stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

/// Generator for one independent stream of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
