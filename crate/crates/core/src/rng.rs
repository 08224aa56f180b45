//! Seeded random streams.
//!
//! Every consumer of randomness owns a [`StreamRng`] derived from one
//! top-level seed and a stream name, so that adding or removing a consumer
//! never perturbs the draws seen by another.
//!
//! The generator is SplitMix64: state advances by `0x9E3779B97F4A7C15` and
//! each output is the standard SplitMix64 finalizer of the new state.
//! Uniforms on the open interval `(0, 1)` are built from the top 53 bits of
//! one output as `((x >> 11) + 0.5) * 2^-53`.

use rand::RngCore;
use rand::SeedableRng;
pub use rand_xoshiro::SplitMix64 as StreamRng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the named sub-stream of `seed`.
pub fn substream_seed(seed: u64, name: &str) -> u64 {
    mix(seed ^ mix(fnv1a(name.as_bytes())))
}

pub fn substream(seed: u64, name: &str) -> StreamRng {
    StreamRng::seed_from_u64(substream_seed(seed, name))
}

/// One uniform draw on `(0, 1)`; never returns 0 or 1.
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
