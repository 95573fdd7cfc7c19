//! Seeded random streams.
//!
//! Streams are xoshiro256++ generators whose 256-bit state is filled from the
//! 64-bit seed by SplitMix64. A uniform double is `(next_u64 >> 11) · 2⁻⁵³`,
//! which lies in `[0, 1)`; interval samples `lo + (hi − lo)·u` are clamped to
//! `[lo, hi]`. Independent consumers of one user seed use distinct stream tags,
//! mixed into the seed as `seed ^ tag·0x9E3779B97F4A7C15`.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Stream tags for the consumers of the user seed.
pub mod tag {
    pub const COSTS: u64 = 1;
    pub const MONTE_CARLO_DEMAND: u64 = 2;
    pub const MONTE_CARLO_COST: u64 = 3;
    pub const STABILITY: u64 = 4;
    pub const GENERATOR: u64 = 5;
    pub const PERTURBATION: u64 = 6;
    pub const HULL_POINTS: u64 = 7;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct Stream(Xoshiro256PlusPlus);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn tagged(seed: u64, tag: u64) -> Self {
        Self::new(seed ^ tag.wrapping_mul(GOLDEN))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform double in `[0, 1)` from the top 53 bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform sample of the closed interval `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.unit();
        (lo + (hi - lo) * u).clamp(lo.min(hi), hi.max(lo))
    }

    /// Uniform integer in `lo..=hi` (rejection-free modulo; bias is below 2⁻⁴⁰
    /// for the small ranges used here).
    pub fn int_range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.next_u64() % (hi - lo + 1)
    }
}
