//! Seeded, splittable random streams.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] keyed by a
//! 64-bit [`Seed`]. Independent substreams (one per trial, per DAG, per
//! amplification repetition, ...) are obtained with [`Seed::child`], which
//! mixes the parent seed and the key through splitmix64. ChaCha is a
//! counter-based generator, so two different keys give statistically
//! independent streams and a run is reproducible from `(seed, key path)` alone,
//! regardless of how the work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A 64-bit seed that can be split into keyed substreams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    /// Derive the substream seed for `key`.
    pub fn child(self, key: u64) -> Seed {
        Seed(splitmix64(splitmix64(self.0) ^ key.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
    }

    /// Derive a substream from a static label (used to separate the roles of
    /// a single run, e.g. support identification vs. CPT estimation).
    pub fn named(self, label: &str) -> Seed {
        // FNV-1a of the label; stable across platforms and releases.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.child(h)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
