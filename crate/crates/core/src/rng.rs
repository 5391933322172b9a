//! Counter-based seed splitting. Every random draw in the crate comes from a
//! generator seeded by `(root seed, stream, index)`, so results do not
//! depend on call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named purposes for derived streams.
pub mod stream {
    pub const SENSOR: u64 = 1;
    pub const EPISODE: u64 = 2;
    pub const INIT_WEIGHTS: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const MIXTURE: u64 = 5;
    pub const SPECS: u64 = 6;
    pub const GRADCHECK: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn split_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}

pub fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(seed, stream, index))
}
