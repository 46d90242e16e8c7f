//! Seed splitting.
//!
//! Every randomized procedure takes one master seed. Independent sub-streams
//! are ChaCha8 generators keyed by the master seed, each on its own stream
//! number, so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for sub-stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
