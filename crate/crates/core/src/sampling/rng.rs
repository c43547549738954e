//! Keyed random streams.
//!
//! Every stream is a ChaCha8 instance whose 256-bit key is derived from
//! `(seed, purpose, index)`; a second index selects the ChaCha stream id.
//! Streams never depend on the order in which work items are processed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) const BRANCH: u64 = 1;
pub(crate) const MEASURE: u64 = 2;
pub(crate) const SUBSYSTEM: u64 = 3;

/// Words reserved per time step in a branch stream.
const WORDS_PER_STEP: u128 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key(seed: u64, purpose: u64, index: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut h = splitmix64(seed ^ splitmix64(purpose.wrapping_mul(0x2545_f491_4f6c_dd1d)));
    h = splitmix64(h ^ index);
    for chunk in out.chunks_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    out
}

/// Independent stream for `(seed, purpose, index, sub)`.
pub fn stream(seed: u64, purpose: u64, index: u64, sub: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(seed, purpose, index));
    rng.set_stream(sub);
    rng
}

/// Derived seed, e.g. for the `k`-th subsystem of a multiplexed reservoir.
pub fn derive_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ purpose.rotate_left(32)) ^ index)
}

/// Uniform draws addressed by time step: the draws for step `k` are the same
/// whatever steps were requested before.
pub struct StepStream {
    rng: ChaCha8Rng,
}

impl StepStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        Self {
            rng: stream(seed, BRANCH, trajectory, 0),
        }
    }

    /// Two uniforms in `[0, 1)` for step `k`.
    pub fn at(&mut self, k: usize) -> (f64, f64) {
        self.rng.set_word_pos(k as u128 * WORDS_PER_STEP);
        (self.rng.random(), self.rng.random())
    }
}
