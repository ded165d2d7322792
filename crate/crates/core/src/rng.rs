//! Deterministic, splittable random streams.
//!
//! A [`StreamFactory`] is a node in a tree of named streams. Children are
//! derived by mixing a label or an index into the parent key, so the
//! stream handed to replication `i` of a given experiment depends only on
//! `(seed, labels, i)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Stream = ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamFactory {
    key: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325_u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix64(seed),
        }
    }

    /// Child factory identified by a name.
    pub fn split(&self, label: &str) -> Self {
        Self {
            key: splitmix64(self.key ^ fnv1a(label.as_bytes())),
        }
    }

    /// Child factory identified by an index.
    pub fn child(&self, index: u64) -> Self {
        Self {
            key: splitmix64(self.key.rotate_left(17) ^ splitmix64(index)),
        }
    }

    /// The generator for replication `index` of this node.
    pub fn stream(&self, index: u64) -> Stream {
        let mut seed = [0u8; 32];
        let mut state = self.child(index).key;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Stream::from_seed(seed)
    }
}
