//! Named random streams fanned out from one master seed.
//!
//! Each subsystem draws from its own stream so that switching one component
//! on or off leaves the randomness seen by the others untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEMAND: &str = "demand";
pub const GOODS: &str = "goods";
pub const FLEET_INIT: &str = "fleet-init";
pub const EXPLORATION: &str = "exploration";
pub const PROFILES: &str = "profiles";
pub const NETWORK_INIT: &str = "network-init";
pub const REPLAY: &str = "replay";
pub const GRAPH: &str = "graph";

pub type StreamRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of the stream `name` from `master`.
pub fn stream_seed(master: u64, name: &str) -> u64 {
    // FNV-1a over the name, then mixed with the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(master ^ splitmix(h))
}

pub fn stream(master: u64, name: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, name))
}
