//! Deterministic Gaussian noise streams.
//!
//! Every draw comes from a ChaCha8 stream keyed by the run seed and a
//! `(purpose, index)` pair, so the refresh noise of stage `i` does not depend
//! on how many values earlier stages consumed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::latent::LatentGrid;

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoisePurpose {
    Initial = 1,
    Refresh = 2,
    Dataset = 3,
    Diagnostic = 4,
}

/// Run-level seed from which all streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, purpose: NoisePurpose, index: u32) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((purpose as u64) << 32) | index as u64);
        NoiseStream { rng }
    }
}

/// A positioned stream of standard-normal draws.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn next_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn next_uniform(&mut self) -> f64 {
        use rand_chacha::rand_core::RngCore;
        // 53 random mantissa bits in [0, 1)
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn gaussian(&mut self, channels: usize, height: usize, width: usize) -> LatentGrid {
        LatentGrid::from_fn(channels, height, width, |_, _, _| self.next_normal())
    }
}

/// I.i.d. standard-normal grid drawn from `rng`.
pub fn gaussian_noise(
    channels: usize,
    height: usize,
    width: usize,
    rng: &mut NoiseStream,
) -> LatentGrid {
    rng.gaussian(channels, height, width)
}
