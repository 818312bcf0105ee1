//! Counter-based random streams.
//!
//! A [`RandomStream`] is a `(key, stream-id)` pair that names an independent
//! ChaCha8 keystream; the word counter inside the generator supplies the third
//! coordinate. Child streams are derived deterministically with
//! [`RandomStream::substream`], so the variates consumed by a unit of work
//! depend only on its index and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    key: u64,
    stream: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream { key: seed, stream: 0 }
    }

    /// The `index`-th child of this stream.
    pub fn substream(&self, index: u64) -> Self {
        let key = mix64(self.key ^ mix64(self.stream.wrapping_add(GOLDEN_GAMMA)));
        RandomStream { key, stream: index }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// A generator positioned at counter 0 of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(self.stream);
        rng
    }
}
