//! Counter-based random streams.
//!
//! Every Monte Carlo sample draws from its own ChaCha stream addressed by
//! `(seed, frame, eye, pixel, sample)`, so results never depend on how
//! pixels are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Key identifying one independent sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub frame: u64,
    pub eye: u8,
    pub pixel: u64,
    pub sample: u32,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn rng(&self) -> SampleRng {
        let key = splitmix(self.seed ^ splitmix(self.frame ^ ((self.eye as u64) << 56)));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream((self.pixel << 24) ^ self.sample as u64);
        SampleRng(rng)
    }
}

/// Uniform sampler handed to estimators.
pub struct SampleRng(ChaCha8Rng);

impl SampleRng {
    pub fn from_seed(seed: u64) -> Self {
        SampleRng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    #[inline]
    pub fn uniform2(&mut self) -> [f64; 2] {
        [self.uniform(), self.uniform()]
    }
}
