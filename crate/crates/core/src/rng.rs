//! Deterministic random substreams.
//!
//! Every random draw in the simulator comes from a ChaCha8 stream keyed by an
//! [`RngSeed`]. Seeds are never advanced; child seeds are derived from a parent
//! seed and a label (run kind, frame index, port name), so the numbers a frame
//! sees do not depend on which worker processed it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn new(master: u64) -> Self {
        RngSeed(master)
    }

    /// Child seed identified by a textual label.
    pub fn derive(self, label: &str) -> Self {
        self.derive_index(fnv1a64(label.as_bytes()))
    }

    /// Child seed identified by an integer (frame index, draw index, ...).
    pub fn derive_index(self, index: u64) -> Self {
        let a = mix64(self.0 ^ 0x94D0_49BB_1331_11EB);
        RngSeed(mix64(a.wrapping_add(mix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
