// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed, and Gaussian
//! draws use the ziggurat sampler of `rand_distr::StandardNormal`. Seeds for
//! replicates are derived from a master seed with the SplitMix64 finalizer,
//! so a replicate's stream depends only on `(master, parts...)` and never on
//! which worker ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `master`, one SplitMix64 round per part.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}
