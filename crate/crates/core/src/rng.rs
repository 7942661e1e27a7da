//! Seeded random streams and stable seed derivation.
//!
//! Every random draw in the pipeline comes from a [`SeededRng`] constructed
//! from an explicit `u64`. Child seeds are derived by hashing the parent seed
//! together with labelled components, so adding a new consumer never shifts
//! the streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Builder for a derived seed: `SeedPath::new(base).push("dataset").push(3).finish()`.
#[derive(Debug, Clone)]
pub struct SeedPath {
    hasher: Sha256,
}

impl SeedPath {
    pub fn new(base: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(base.to_le_bytes());
        Self { hasher }
    }

    pub fn push(mut self, component: impl SeedComponent) -> Self {
        component.feed(&mut self.hasher);
        self
    }

    pub fn finish(self) -> u64 {
        let digest = self.hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }
}

pub trait SeedComponent {
    fn feed(&self, hasher: &mut Sha256);
}

// Each component is tagged and length-prefixed so ("ab", "c") and ("a", "bc")
// hash differently.
impl SeedComponent for &str {
    fn feed(&self, hasher: &mut Sha256) {
        hasher.update([b's']);
        hasher.update((self.len() as u64).to_le_bytes());
        hasher.update(self.as_bytes());
    }
}

impl SeedComponent for u64 {
    fn feed(&self, hasher: &mut Sha256) {
        hasher.update([b'u']);
        hasher.update(self.to_le_bytes());
    }
}

impl SeedComponent for usize {
    fn feed(&self, hasher: &mut Sha256) {
        (*self as u64).feed(hasher)
    }
}

impl SeedComponent for f64 {
    fn feed(&self, hasher: &mut Sha256) {
        hasher.update([b'f']);
        hasher.update(self.to_bits().to_le_bytes());
    }
}
