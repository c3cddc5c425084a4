//! Per-shot random substreams.
//!
//! Every shot draws from its own ChaCha stream selected by the shot index, so
//! ensemble results do not depend on how shots are batched or scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Factory for independent per-shot generators derived from one master seed.
#[derive(Clone, Debug)]
pub struct ShotStreams {
    base: ChaCha8Rng,
}

impl ShotStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Generator for shot `index`, positioned at the start of its stream.
    pub fn shot(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);
        rng
    }
}
