//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha8 generator keyed by the run seed
//! plus a stream id, so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids separating the pipeline stages that share one run seed.
pub mod stream {
    pub const GROUND_TRUTH: u64 = 1;
    pub const SMOTE: u64 = 2;
    pub const FREQUENCY: u64 = 3;
    pub const SEVERITY: u64 = 4;
    pub const TUNING: u64 = 5;
    pub const SAMPLING: u64 = 6;
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed by mixing a label into the parent (splitmix64).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
