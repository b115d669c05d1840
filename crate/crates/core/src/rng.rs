//! Portable seeded randomness.
//!
//! Every random decision in the pipeline draws from [`SeededRng`], a ChaCha8
//! stream keyed by a 64-bit seed. Derived quantities use fixed formulas so
//! that another implementation of the same algorithm reproduces the stream:
//!
//! * `below(n)`: `(next_u64() as u128 * n as u128) >> 64` (multiply-shift).
//! * `unit()`: `(next_u64() >> 11) * 2^-53`, uniform on `[0, 1)`.
//! * `derive_seed(seed, tag)`: SplitMix64 finalizer applied to
//!   `seed ^ splitmix(tag)`; used to key independent sub-streams.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream keyed by `seed` and a sequence of tags.
    pub fn derived(seed: u64, tags: &[u64]) -> Self {
        Self::new(derive_seed_path(seed, tags))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`. `n` must be non-zero.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// True with probability `p`; `p <= 0` never fires and `p >= 1` always does.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Standard normal draw (Box-Muller on two `unit()` draws).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates from the back.
    pub fn shuffle<E>(&mut self, items: &mut [E]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

pub fn derive_seed_path(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(seed, |s, &t| derive_seed(s, t))
}
