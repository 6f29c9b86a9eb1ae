//! Seed derivation for reproducible, order-independent Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used by every sampler in the crate.
pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a stream index into a sub-seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Generator for one Monte Carlo trial. Depends only on `(master, trial)`.
pub fn trial_rng(master: u64, trial: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, trial))
}

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
