//! Reproducible random streams.
//!
//! A stream is a ChaCha8 generator keyed by a 64-bit seed, with the 64-bit
//! stream id selecting an independent keystream. Monte Carlo chunks use the
//! chunk index as stream id.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { inner }
    }

    /// A fresh stream derived from `(seed, stream_id)` with a salt, so
    /// different estimator stages never reuse a keystream.
    pub fn derived(seed: u64, salt: u64, stream_id: u64) -> Self {
        Self::new(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15), stream_id)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
