//! Counter-based randomness.
//!
//! Every random quantity is addressed by `(seed, stream, position)`: the
//! seed keys a ChaCha8 instance, the stream id separates purposes (walk
//! directions, start draw, Bernoulli flag, comparators) and the word
//! position makes block `k` of a stream directly addressable. Results are
//! therefore independent of how work is scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STREAM_START: u64 = 0;
pub const STREAM_FWD: u64 = 1;
pub const STREAM_BWD: u64 = 2;
pub const STREAM_BERNOULLI: u64 = 3;
/// First stream id available to comparators and samplers; use `STREAM_AUX + k`.
pub const STREAM_AUX: u64 = 16;

/// A generator positioned at the beginning of `stream` for `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fills `out` with 64-bit blocks `first, first + 1, ...` of a stream.
pub fn fill_blocks(seed: u64, stream: u64, first: u64, out: &mut [u64]) {
    let mut rng = stream_rng(seed, stream);
    // Word position counts 32-bit words.
    rng.set_word_pos(u128::from(first) * 2);
    for w in out.iter_mut() {
        *w = rng.next_u64();
    }
}

/// splitmix64 finalizer: decorrelates nearby integers.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index` in an ensemble rooted at `base`.
pub fn replica_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Uniform draw from `0..n` on the given stream (first draw of the stream).
pub fn uniform_below(seed: u64, stream: u64, n: u64) -> u64 {
    stream_rng(seed, stream).random_range(0..n)
}
