//! Named random streams derived from a single user seed.
//!
//! Every stochastic sub-procedure asks for its own stream by name, so adding
//! a draw in one place never perturbs the numbers another place sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Generator for the stream `name` under `seed`.
pub fn stream(seed: u64, name: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name));
    rng
}

/// Child seed for an indexed sub-run (restart, realization, ...).
pub fn derive_seed(seed: u64, name: &str, index: u64) -> u64 {
    let mut h = seed ^ fnv1a(name);
    h = h.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}
