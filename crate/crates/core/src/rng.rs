//! Named, reproducible random substreams.
//!
//! A single 64-bit seed is expanded into independent streams keyed by a
//! module label and a sample index, so adding samples to one check never
//! shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for sample `index` of the stream named `label`.
    pub fn rng(&self, label: &str, index: u64) -> ChaCha8Rng {
        let a = splitmix64(self.seed ^ splitmix64(fnv1a(label)));
        let key = splitmix64(a ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)));
        let mut bytes = [0u8; 32];
        let mut state = key;
        for chunk in bytes.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }

    /// Child stream with a derived label prefix.
    pub fn child(&self, label: &str) -> SeedStream {
        SeedStream {
            seed: splitmix64(self.seed ^ fnv1a(label)),
        }
    }
}
