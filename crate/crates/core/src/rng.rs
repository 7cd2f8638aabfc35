//! Named random streams derived from one root seed.
//!
//! Every exogenous source of randomness (arrivals, EPR completions, batch
//! shuffles, each qubit's syndrome rounds) gets its own ChaCha stream, so two
//! runs that differ only in policy consume identical random numbers for
//! identical purposes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Arrivals,
    Epr,
    Shuffle,
    Qubit(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Arrivals => 1,
            Stream::Epr => 2,
            Stream::Shuffle => 3,
            Stream::Qubit(id) => (1 << 32) + id,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamFactory {
    root: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self {
            root: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn stream(&self, which: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.root.get_seed());
        rng.set_stream(which.id());
        rng.set_word_pos(0);
        rng
    }
}
