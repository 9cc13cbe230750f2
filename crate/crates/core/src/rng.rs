//! Seeded counter-based random streams.
//!
//! Every consumer derives its own ChaCha stream from `(seed, stream id)`, so draws for
//! network initialization, interior points and boundary points never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod streams {
    pub const INIT: u64 = 1;
    pub const INTERIOR: u64 = 2;
    pub const BOUNDARY: u64 = 3;
    pub const CHECK: u64 = 4;
    pub const SELFTEST: u64 = 5;
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
