//! Keyed random streams.
//!
//! A stream is identified by a master seed plus a domain tag (scenario,
//! replicate, purpose, and an optional path of sub-stream indices). The tag
//! is hashed with SHA-256 into a ChaCha8 key; ChaCha is itself a
//! counter-mode generator, so every stream is an independent, addressable
//! sequence. Nothing depends on which thread asks for it or in what order.

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Identifies one logical consumer of randomness.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainTag {
    pub scenario: u64,
    pub replicate: u64,
    pub purpose: String,
    /// Nested sub-stream indices (e.g. bootstrap replicate, arm).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub tag: DomainTag,
}

impl RngStream {
    pub fn new(master_seed: u64, scenario: u64, replicate: u64, purpose: &str) -> Self {
        Self {
            master_seed,
            tag: DomainTag {
                scenario,
                replicate,
                purpose: purpose.to_string(),
                path: Vec::new(),
            },
        }
    }

    /// Stream for a one-off purpose outside any study grid.
    pub fn from_seed(master_seed: u64, purpose: &str) -> Self {
        Self::new(master_seed, 0, 0, purpose)
    }

    /// Independent child stream addressed by `index`.
    pub fn substream(&self, index: u64) -> Self {
        let mut tag = self.tag.clone();
        tag.path.push(index);
        Self {
            master_seed: self.master_seed,
            tag,
        }
    }

    /// Same coordinates, different purpose.
    pub fn with_purpose(&self, purpose: &str) -> Self {
        let mut tag = self.tag.clone();
        tag.purpose = purpose.to_string();
        Self {
            master_seed: self.master_seed,
            tag,
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"causal-medians/rng/v1");
        h.update(self.master_seed.to_le_bytes());
        h.update(self.tag.scenario.to_le_bytes());
        h.update(self.tag.replicate.to_le_bytes());
        h.update((self.tag.purpose.len() as u64).to_le_bytes());
        h.update(self.tag.purpose.as_bytes());
        h.update((self.tag.path.len() as u64).to_le_bytes());
        for p in &self.tag.path {
            h.update(p.to_le_bytes());
        }
        h.finalize().into()
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key())
    }
}
