//! Deterministic randomness used by reproducible artifacts.
//!
//! Everything seedable in this crate draws from ChaCha12 so that the same
//! seed yields the same bytes on every platform and in every build. Persisted
//! artifacts (projection banks, synthetic datasets) regenerate from their
//! stored seed, so this stream layout is part of the file-format contract:
//! draws are whole `u64` words, and bit-valued draws consume one word LSB
//! first, 64 values per word.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

pub(crate) fn seeded(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Uniform double in [0, 1) from the top 53 bits of one word.
pub(crate) fn next_unit_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws single bits out of buffered 64-bit words, LSB first.
pub(crate) struct BitDrawer<R: RngCore> {
    rng: R,
    word: u64,
    remaining: u32,
}

impl<R: RngCore> BitDrawer<R> {
    pub(crate) fn new(rng: R) -> Self {
        Self {
            rng,
            word: 0,
            remaining: 0,
        }
    }

    pub(crate) fn next_bit(&mut self) -> bool {
        if self.remaining == 0 {
            self.word = self.rng.next_u64();
            self.remaining = 64;
        }
        let bit = self.word & 1 == 1;
        self.word >>= 1;
        self.remaining -= 1;
        bit
    }
}

/// Row-major `rows x cols` matrix with entries drawn from {-1, +1} with equal
/// probability, one bit per entry from the seeded stream.
pub(crate) fn rademacher_matrix(rows: usize, cols: usize, seed: u64) -> Vec<i8> {
    let mut bits = BitDrawer::new(seeded(seed));
    (0..rows * cols)
        .map(|_| if bits.next_bit() { 1 } else { -1 })
        .collect()
}
