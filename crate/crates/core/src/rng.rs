//! Portable random streams.
//!
//! ChaCha8 keyed by `seed` (expanded with `rand_core`'s `seed_from_u64`), one 64-bit
//! stream id per purpose so that source points, target points, and synthetic fields
//! never share a keystream. Floats take the top 53 bits of each output word.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Source = 1,
    Target = 2,
    Synth = 3,
    Pairs = 4,
}

#[derive(Clone, Debug)]
pub struct PortableRng(ChaCha8Rng);

impl PortableRng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream as u64);
        Self(r)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` (multiply-shift; bias below 2^-40 for the sizes used here).
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}
