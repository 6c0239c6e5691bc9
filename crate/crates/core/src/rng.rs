//! Seeded pseudo-random streams.

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator used everywhere randomness is consumed.
pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of `seed`: the seeded generator advanced by
/// `stream` jumps of 2^128 steps.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = seeded(seed);
    for _ in 0..stream {
        rng.jump();
    }
    rng
}

/// Well-known stream ids so that graph generation, sampling, initialization,
/// and shuffling never share draws.
pub mod streams {
    pub const GRAPH: u64 = 1;
    pub const SAMPLES: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const SPLIT: u64 = 5;
}
