//! Seeded random streams. Every draw in a run comes from one seed, split
//! into independent ChaCha streams by purpose and node id.

use crate::formation::Vec2;
use crate::raft::NodeId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NET_STREAM: u64 = 1;
const FRAME_STREAM: u64 = 1 << 32;
const SPAWN_STREAM: u64 = 2 << 32;
const STRESS_STREAM: u64 = 3 << 32;
// frame draws occupy 1 << 32 .. 2 << 32

/// Half-width of the square initial positions are drawn from.
pub const SPAWN_HALF_WIDTH: f64 = 2.0;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn net_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, NET_STREAM)
}

/// One uniform draw from `0..span` tied to `frame`; every caller asking
/// about the same frame gets the same value.
pub fn frame_draw(seed: u64, frame: u64, span: u64) -> u64 {
    stream(seed, FRAME_STREAM + frame).gen_range(0..span.max(1))
}

pub fn stress_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, STRESS_STREAM)
}

/// Initial (or join-time) position of an agent: uniform on `[-2, 2]^2`.
pub fn spawn_position(seed: u64, agent: NodeId) -> Vec2 {
    let mut rng = stream(seed, SPAWN_STREAM + agent.0);
    let x = rng.gen_range(-SPAWN_HALF_WIDTH..=SPAWN_HALF_WIDTH);
    let y = rng.gen_range(-SPAWN_HALF_WIDTH..=SPAWN_HALF_WIDTH);
    Vec2::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spawn_positions_are_stable_and_in_range() {
        for id in 0..20 {
            let p = spawn_position(7, NodeId(id));
            assert_eq!(p, spawn_position(7, NodeId(id)));
            assert!(p.x.abs() <= 2.0 && p.y.abs() <= 2.0);
        }
        assert_ne!(spawn_position(7, NodeId(0)), spawn_position(8, NodeId(0)));
        assert_ne!(spawn_position(7, NodeId(0)), spawn_position(7, NodeId(1)));
    }
}
