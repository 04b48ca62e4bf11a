//! Seeded random streams.
//!
//! A run is driven by one master seed. Independent work units (pulse
//! batches) each get their own ChaCha stream, so results do not depend on
//! how batches are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// The `stream_id`-th independent stream derived from `master_seed`.
pub fn stream(master_seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}
