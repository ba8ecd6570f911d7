//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the global seed, with the
//! stream id taken from a stable FNV-1a hash of a label. Two labels never
//! share a stream unless their hashes collide.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a. Stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Stream for one task: same `(seed, task_id)` always replays the same draws.
pub fn task_rng(global_seed: u64, task_id: &str) -> RandomStream {
    stream(global_seed, stable_hash(task_id.as_bytes()))
}

/// Stream for a named purpose and index, e.g. one bootstrap realization.
/// Purposes are hashed into a domain separate from task ids.
pub fn derived_rng(global_seed: u64, purpose: &str, index: u64) -> RandomStream {
    let domain = stable_hash(purpose.as_bytes()) ^ 0x9e37_79b9_7f4a_7c15;
    stream(global_seed, domain.rotate_left(17) ^ splitmix(index))
}

fn stream(seed: u64, id: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
