//! Per-path random streams.
//!
//! ChaCha is a counter-based generator: the keystream is a pure function of
//! (key, stream id, block counter). Keying by the run seed and using the path
//! index as the stream id gives every path its own stream regardless of which
//! worker simulates it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent streams owned by one simulated path.
pub struct PathStreams {
    /// Brownian increments.
    pub increments: ChaCha8Rng,
    /// Auxiliary uniforms (bridge crossing tests). Kept apart from the
    /// increments so that paths driven by the same seed share increments
    /// regardless of how many auxiliary draws each run consumes.
    pub auxiliary: ChaCha8Rng,
}

pub fn path_streams(seed: u64, path_index: u64) -> PathStreams {
    PathStreams {
        increments: stream(seed, 2 * path_index),
        auxiliary: stream(seed, 2 * path_index + 1),
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
