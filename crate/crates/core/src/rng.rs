//! Seed streams.
//!
//! Every stochastic decision in a run draws from a [`SeedStream`], a 64-bit key
//! that can be split into child streams by index or by name. A stream turns
//! into a generator with [`SeedStream::rng`], which is ChaCha8 keyed from the
//! stream key. ChaCha is counter based, so a generator depends only on its key
//! and not on how many draws happened elsewhere in the run.
//!
//! Derivation is a pure function of `(parent key, label)`: the stream for
//! rollout 2 of probe step 7 is the same no matter how many other streams were
//! derived before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator handed out by [`SeedStream::rng`].
pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// A splittable, reproducible source of randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    key: u64,
}

impl SeedStream {
    /// Root stream for a run seed.
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix(seed ^ GOLDEN),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Child stream keyed by an integer index.
    pub fn derive(&self, index: u64) -> Self {
        let salt = mix(index.wrapping_add(1).wrapping_mul(GOLDEN));
        Self {
            key: mix(self.key.rotate_left(17) ^ salt),
        }
    }

    /// Child stream keyed by a name.
    pub fn derive_named(&self, label: &str) -> Self {
        let salt = mix(label_hash(label) ^ 0xA5A5_A5A5_A5A5_A5A5);
        Self {
            key: mix(self.key.rotate_left(29) ^ salt),
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(self.key)
    }
}
