//! Deterministic random streams keyed by a hash of their coordinates.
//!
//! Every stochastic routine derives its generator from `(domain, seed, ...)`
//! so results do not depend on evaluation order or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Builder for a stream seed; parts are length-prefixed so that
/// `("ab", "c")` and `("a", "bc")` hash differently.
#[derive(Clone)]
pub struct StreamKey {
    hasher: Sha256,
}

impl StreamKey {
    pub fn new(domain: &str) -> Self {
        let mut key = StreamKey {
            hasher: Sha256::new(),
        };
        key = key.bytes(domain.as_bytes());
        key
    }

    pub fn bytes(mut self, part: &[u8]) -> Self {
        self.hasher.update((part.len() as u64).to_le_bytes());
        self.hasher.update(part);
        self
    }

    pub fn u64(self, part: u64) -> Self {
        self.bytes(&part.to_le_bytes())
    }

    pub fn str(self, part: &str) -> Self {
        self.bytes(part.as_bytes())
    }

    pub fn digest(self) -> [u8; 32] {
        self.hasher.finalize().into()
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.digest())
    }

    /// First eight digest bytes, for handing a derived seed to another routine.
    pub fn seed(self) -> u64 {
        let d = self.digest();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }
}
