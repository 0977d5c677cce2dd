//! Portable seeded uniform generator.
//!
//! SplitMix64 (Steele, Lea & Flood) with the standard increment
//! `0x9E3779B97F4A7C15`; a draw maps the top 53 bits of the output to
//! `[0, 1)` as `(x >> 11) · 2⁻⁵³` and scales to the requested interval.
//! Both steps are plain integer and IEEE-754 arithmetic, so sequences are
//! bit-identical across platforms and languages.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone)]
pub struct UniformStream {
    inner: SplitMix64,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn next_raw(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Next value in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_raw() >> 11) as f64 * INV_2_53
    }

    /// Next value in `[0, hi)`.
    pub fn next_below(&mut self, hi: f64) -> f64 {
        self.next_unit() * hi
    }
}
