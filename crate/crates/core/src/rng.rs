//! Seeded randomness with a fixed, documented generator.
//!
//! All random draws go through SplitMix64 (Steele, Lea and Flood, 2014) seeded
//! directly with the user's 64-bit seed. A draw `u` in `(0, 1]` is
//! `((next_u64 >> 11) + 1) * 2^-53`. Any implementation that reproduces those
//! two rules reproduces every random initialization in this crate.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

pub struct SeededRng(SplitMix64);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform draw in `(0, 1]`.
    pub fn unit_open_closed(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `(-1, 1]`.
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.unit_open_closed() - 1.0
    }
}
