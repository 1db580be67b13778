//! Seedable, splittable random streams.
//!
//! A stream is identified by `(seed, stream_id)`. Work is cut into shards
//! whose generators are ChaCha12 instances keyed by `(seed, shard index)` and
//! running on ChaCha stream `stream_id`, so the draws for a given shard never
//! depend on how shards are scheduled across threads.

use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::numeric::TWO_PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Generator for shard `index` of this stream.
    pub fn shard(&self, index: u64) -> SampleRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&index.to_le_bytes());
        let mut inner = ChaCha12Rng::from_seed(key);
        inner.set_stream(self.stream_id);
        SampleRng { inner }
    }

    pub fn generator(&self) -> SampleRng {
        self.shard(0)
    }
}

#[derive(Debug, Clone)]
pub struct SampleRng {
    inner: ChaCha12Rng,
}

impl SampleRng {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on (0, 1] with 53 bits.
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-and-reject).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Standard complex Gaussian, `Re` and `Im` iid N(0, 1/2), by Box–Muller:
    /// `sqrt(-ln u₁) · e^{2πi u₂}`.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let r = (-self.uniform_open0().ln()).sqrt();
        let phi = TWO_PI * self.uniform_open0();
        Complex64::from_polar(r, phi)
    }
}
