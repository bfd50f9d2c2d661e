//! Deterministic seed derivation for independent parallel tasks.
//!
//! Every restart, tree and fold gets its own generator seeded from
//! `derive_seed(base, stream)`, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TaskRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `seed_i = splitmix64(splitmix64(base) ^ (i + 1) * gamma)`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

pub fn task_rng(seed: u64) -> TaskRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Well-known sub-stream tags so unrelated consumers of one base seed never
/// collide.
pub mod stream {
    pub const PROTOTYPES: u64 = 0x5052_4f54;
    pub const ZONES: u64 = 0x5a4f_4e45;
    pub const FOLDS: u64 = 0x464f_4c44;
}
