//! Counter-based random streams keyed by `(master_seed, path_index)`.
//!
//! Each path owns a ChaCha8 stream: the master seed fixes the key, the path
//! index selects the stream, and the draw index is the stream's word
//! position. Paths never share state, so batches are bit-identical under any
//! schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

#[derive(Debug, Clone)]
pub struct PathRng(ChaCha8Rng);

impl PathRng {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        Self(rng)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.0)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    /// Number of 32-bit words consumed so far.
    pub fn draw_index(&self) -> u128 {
        self.0.get_word_pos()
    }
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a grid cell or sub-experiment.
pub fn derive_seed(master_seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master_seed), |acc, p| splitmix64(acc ^ splitmix64(*p)))
}
