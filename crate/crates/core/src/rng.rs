//! Seeded random streams.
//!
//! Every random draw in the crate goes through a [`Stream`], a ChaCha8
//! generator addressed by `(seed, stream id)`. Distinct stream ids under the
//! same seed are disjoint keystreams, which is how a trial keeps its gradient
//! batch, ridge batch, test batch and noise draws independent of each other
//! and of how many workers execute the trials.

use ndarray::{Array1, Array2};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Name of the generator family, recorded in configs and reports.
pub const GENERATOR: &str = "chacha8";

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trial `index` under `base_seed`: `base_seed ^ splitmix64(index)`,
/// passed once more through the mixer so that neighbouring base seeds do not
/// produce related trial seeds.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index))
}

/// A deterministic random stream.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self::with_id(seed, 0)
    }

    /// Stream `id` of `seed`.
    pub fn with_id(seed: u64, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        Stream { rng }
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on the open interval (lo, hi).
    pub fn uniform_open(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return lo + (hi - lo) * u;
            }
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn normal_vec(&mut self, len: usize) -> Array1<f64> {
        Array1::from_shape_fn(len, |_| self.normal())
    }

    /// Row-major fill of an i.i.d. standard normal matrix.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| self.normal())
    }

    /// Index drawn from the categorical distribution with the given
    /// (normalized) weights.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        weights.len() - 1
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.rng.random_range(0..=i);
            items.swap(i, j);
        }
    }
}
