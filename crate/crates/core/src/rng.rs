//! Seeded, splittable random streams and the samplers built on them.
//!
//! Every sample gets its own stream keyed by `(root_seed, sample_index)`, so
//! output never depends on which worker handles a sample or in what order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric Beta shape parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    alpha: f64,
}

impl BetaParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::Param(format!("beta alpha must be > 0, got {alpha}")))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Closed-form variance of `Beta(alpha, alpha)`.
    pub fn variance(&self) -> f64 {
        1.0 / (4.0 * (2.0 * self.alpha + 1.0))
    }
}

/// A deterministic generator owned by one sample.
#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
    root_seed: u64,
    sample_index: u64,
}

impl RngStream {
    /// Derives the stream for `sample_index` under `root_seed`. The index
    /// selects a ChaCha stream id, so sibling streams never overlap and no
    /// draws are consumed to reach them.
    pub fn split(root_seed: u64, sample_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(root_seed);
        inner.set_stream(sample_index);
        Self {
            inner,
            root_seed,
            sample_index,
        }
    }

    pub fn lineage(&self) -> (u64, u64) {
        (self.root_seed, self.sample_index)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; `lo` when the interval is degenerate.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Param(format!("invalid uniform range [{lo}, {hi})")));
        }
        if lo == hi {
            return Ok(lo);
        }
        let v = lo + (hi - lo) * self.next_f64();
        // lo + span * u can round up to hi
        Ok(if v >= hi { hi.next_down() } else { v })
    }

    /// Uniform integer in `0..n` (rejection sampling, no modulo bias).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        // 2^64 mod n; [threshold, 2^64) holds a whole number of residue cycles
        let threshold = n.wrapping_neg() % n;
        loop {
            let v = self.inner.next_u64();
            if v >= threshold {
                return (v % n) as usize;
            }
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        lo + self.below(hi - lo + 1)
    }

    /// Fisher-Yates; a slice of length 0 or 1 consumes no draws.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// A uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }

    /// `λ ~ Beta(α, α)` as `G₁ / (G₁ + G₂)` with independent `Gamma(α, 1)`
    /// draws. The ratio is formed from log-gammas, which stays accurate when
    /// both variates underflow at very small shapes.
    pub fn beta(&mut self, params: BetaParams) -> f64 {
        let a = self.ln_gamma_variate(params.alpha);
        let b = self.ln_gamma_variate(params.alpha);
        let lambda = 1.0 / (1.0 + (b - a).exp());
        lambda.clamp(0.0, 1.0)
    }

    /// Log of a `Gamma(shape, 1)` variate.
    ///
    /// Marsaglia-Tsang squeeze/rejection for `shape >= 1`; smaller shapes use
    /// `G(a) = G(a + 1) * U^(1/a)`.
    fn ln_gamma_variate(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let u = 1.0 - self.next_f64(); // (0, 1]
            return self.ln_gamma_variate(shape + 1.0) + u.ln() / shape;
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x: f64 = StandardNormal.sample(&mut self.inner);
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.next_f64();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return (d * v).ln();
            }
            if u > 0.0 && u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return (d * v).ln();
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
