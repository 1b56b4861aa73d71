use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one (document, dupe) task: chained splitmix64 over the three inputs.
pub fn derive_seed(seed: u64, document: u64, dupe: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ document) ^ dupe)
}

pub fn instance_rng(seed: u64, document: usize, dupe: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, document as u64, dupe as u64))
}
