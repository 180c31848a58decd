//! Seeded random streams.
//!
//! One master seed feeds independent ChaCha streams for model dynamics,
//! label observations and learner exploration, so changing how often one
//! consumer draws never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Env = 1,
    Labels = 2,
    Learner = 3,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// The three named streams derived from one seed.
#[derive(Debug, Clone)]
pub struct Streams {
    pub env: ChaCha8Rng,
    pub labels: ChaCha8Rng,
    pub learner: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Streams {
        Streams {
            env: stream(seed, Stream::Env),
            labels: stream(seed, Stream::Labels),
            learner: stream(seed, Stream::Learner),
        }
    }
}

/// Inverse-CDF draw over `(item, p)` entries in listed order.
pub(crate) fn pick<T: Copy>(entries: &[(T, f64)], u: f64) -> T {
    let mut acc = 0.0;
    for &(item, p) in entries {
        acc += p;
        if u < acc {
            return item;
        }
    }
    entries
        .iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .or(entries.last())
        .expect("empty distribution")
        .0
}
