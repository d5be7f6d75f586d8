//! Project-wide random number generation.
//!
//! Every stochastic component draws from ChaCha8 seeded with a `u64`, so
//! any instance, sample, or solve is reproducible across platforms from
//! its seed alone. Parallel replicas get decorrelated streams by XOR-ing
//! the base seed with a splitmix64 hash of the replica index.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The deterministic generator used throughout the crate.
pub type ProjectRng = ChaCha8Rng;

/// Creates the project generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> ProjectRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 finalizer, used to hash replica/instance indices into seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for the independent stream owned by one replica of a batched solve.
pub fn replica_stream_seed(seed: u64, replica: usize) -> u64 {
    seed ^ splitmix64(replica as u64)
}

/// Seed for the i-th instance of a sweep.
pub fn instance_seed(seed: u64, instance: usize) -> u64 {
    seed ^ splitmix64(0x5eed ^ instance as u64)
}
