//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`) seeded via
//! `seed_from_u64`. ChaCha output is defined independently of the host, so a
//! given seed yields the same draws on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        self.inner.random_range(lo..hi)
    }

    /// `true` with probability `p` (clamped to `[0, 1]`). `p = 0` never
    /// consumes a success and `p = 1` always succeeds.
    pub fn chance(&mut self, p: f64) -> bool {
        let u: f64 = self.inner.random();
        u < p.clamp(0.0, 1.0)
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Draw from `N(0, sigma^2)`.
    pub fn gaussian(&mut self, sigma: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.inner);
        z * sigma
    }

    /// Derive an independent child stream, e.g. for audits that must not
    /// disturb the parent's sequence.
    pub fn fork(&mut self) -> RngStream {
        RngStream::new(self.inner.random())
    }
}
