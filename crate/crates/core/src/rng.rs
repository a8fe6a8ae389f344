//! Seeded randomness. Every random draw in the crate comes from a
//! ChaCha8 stream keyed by a 64-bit seed (`rand_chacha::ChaCha8Rng::seed_from_u64`),
//! so identical seeds reproduce identical generators and weight signs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
}

impl RngSpec {
    pub const ALGORITHM: &'static str = "ChaCha8";

    pub fn new(seed: u64) -> Self {
        RngSpec { seed }
    }

    pub fn stream(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Independent stream for a labelled sub-task.
    pub fn derive(&self, label: u64) -> RngSpec {
        RngSpec {
            seed: self.seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17),
        }
    }
}
