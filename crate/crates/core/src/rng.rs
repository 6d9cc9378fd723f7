//! Seeded randomness and stable seed derivation.
//!
//! Every stochastic operation in the crate takes an explicit `u64` seed and
//! builds its generator through [`seeded`]. Sub-streams (restarts, trials,
//! cells) are derived with [`SeedHasher`], a SplitMix64-based hash whose
//! output is fixed across platforms and compiler versions, unlike
//! `std::collections::hash_map::DefaultHasher`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive 64-bit hash over a sequence of typed fields.
#[derive(Debug, Clone)]
pub struct SeedHasher {
    state: u64,
}

impl SeedHasher {
    pub fn new(base: u64) -> Self {
        Self {
            state: splitmix64(base ^ 0x5EED_0F_C0FFEE),
        }
    }

    pub fn u64(mut self, x: u64) -> Self {
        self.state = splitmix64(self.state ^ splitmix64(x));
        self
    }

    /// Floats hash by bit pattern, with `-0.0` folded onto `0.0`.
    pub fn f64(self, x: f64) -> Self {
        let x = if x == 0.0 { 0.0 } else { x };
        self.u64(x.to_bits())
    }

    pub fn str(mut self, s: &str) -> Self {
        for chunk in s.as_bytes().chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            self = self.u64(u64::from_le_bytes(buf));
        }
        self.u64(s.len() as u64)
    }

    pub fn finish(self) -> u64 {
        splitmix64(self.state)
    }
}

/// Seed for sub-stream `stream` of a parent seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    SeedHasher::new(seed).u64(stream).finish()
}
