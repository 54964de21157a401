//! Per-trial random streams derived from a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for trial `trial` of grid cell `cell`. Streams depend only on the
/// triple, never on execution order, so parallel runs stay reproducible.
pub fn trial_rng(master_seed: u64, cell: u64, trial: u64) -> TrialRng {
    let key = splitmix64(splitmix64(splitmix64(master_seed) ^ cell) ^ trial.rotate_left(32));
    ChaCha8Rng::seed_from_u64(key)
}
