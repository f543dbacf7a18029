//! Seeded generators. Every stochastic stage takes a base seed and a stream
//! index, so parallel work stays reproducible regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

pub fn seeded(seed: u64, stream: u64) -> StageRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a label into a base seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stochastic stages of the analysis; each gets its own derived seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Values = 1,
    Bootstrap = 2,
    Simulation = 3,
}

pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    derive_seed(seed, stage as u64)
}
