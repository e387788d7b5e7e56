//! Seeded, splittable random streams.
//!
//! Every independent task (a time point, a repetition, a fit for one bath
//! outcome) draws from its own ChaCha8 stream, selected from the base seed
//! and a list of integer tags. Results therefore do not depend on the order
//! in which tasks run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream identifier for a tag path.
pub fn stream_id(tags: &[u64]) -> u64 {
    tags.iter().fold(0x5851_f42d_4c95_7f2d, |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Independent generator for `(seed, tags…)`.
pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tags));
    rng
}
