//! Reproducible random streams.
//!
//! Every unit of parallel work draws from its own ChaCha stream whose key is
//! derived from a master seed and a path of task ids (replication, candidate,
//! ...). Results therefore do not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stream for `seed` addressed by the task path `ids`.
pub fn stream(seed: u64, ids: &[u64]) -> Rng {
    let mut key = splitmix64(seed);
    for &id in ids {
        key = splitmix64(key ^ splitmix64(id.wrapping_add(0x5851_f42d_4c95_7f2d)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(ids.len() as u64);
    rng
}
