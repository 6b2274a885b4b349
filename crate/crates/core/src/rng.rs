//! Deterministic, splittable random streams.
//!
//! A stream is identified by `(seed, stream)`; ChaCha's 64-bit stream
//! selector makes distinct stream ids independent while keeping every draw a
//! pure function of the pair.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::normal;

/// Identifies one random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Start drawing from this stream.
    pub fn start(&self) -> SimRng {
        let mut inner = ChaCha20Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream);
        SimRng { inner }
    }

    /// A child stream, derived by mixing `tag` into the stream id.
    pub fn child(&self, tag: u64) -> Self {
        let mixed = self
            .stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(17)
            ^ tag.wrapping_add(0xD1B5_4A32_D192_ED03);
        Self {
            seed: self.seed,
            stream: mixed,
        }
    }
}

/// A running random stream.
#[derive(Clone, Debug)]
pub struct SimRng {
    inner: ChaCha20Rng,
}

impl SimRng {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inverse CDF, exactly one uniform per draw.
    pub fn normal(&mut self) -> f64 {
        normal::inv_cdf(self.uniform())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_state_same_draws() {
        let s = RngState::new(42, 7);
        let a: Vec<u64> = {
            let mut r = s.start();
            (0..100).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = s.start();
            (0..100).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn streams_differ() {
        let mut a = RngState::new(42, 0).start();
        let mut b = RngState::new(42, 1).start();
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniform_stays_open() {
        let mut r = RngState::new(1, 1).start();
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = RngState::new(9, 3).start();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }
}
