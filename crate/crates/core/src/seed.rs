//! Deterministic seed derivation.
//!
//! Every random stream in a run (per-flow controller draws, arrival jitter,
//! replication seeds) is a pure function of a master seed and a small tuple of
//! identifiers, so adding a flow or a sweep cell never perturbs other streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// One round of the splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed`, order-sensitively.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Stream tags keep the per-purpose streams of one flow disjoint.
pub mod stream {
    pub const CONTROLLER: u64 = 1;
    pub const ARRIVALS: u64 = 2;
    pub const REPLICATION: u64 = 3;
}

pub fn flow_rng(seed: u64, flow_id: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, &[stream::CONTROLLER, flow_id as u64]))
}
