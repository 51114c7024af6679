//! Seed handling. Every stochastic operation takes an explicit `u64` seed; sub-experiments derive
//! their own seeds from a parent seed and a stream index so they can be reproduced in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of sub-stream `stream` from `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Counter-based seed splitter.
#[derive(Debug, Clone)]
pub struct SeedSplitter {
    root: u64,
    counter: u64,
}

impl SeedSplitter {
    pub fn new(root: u64) -> Self {
        Self { root, counter: 0 }
    }

    pub fn next_seed(&mut self) -> u64 {
        let s = derive_seed(self.root, self.counter);
        self.counter += 1;
        s
    }

    /// Seed for a named stream; independent of how many `next_seed` calls were made.
    pub fn named(&self, name: &str) -> u64 {
        let h = name
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
        derive_seed(self.root, h)
    }
}
