//! Deterministic random streams.
//!
//! Every stochastic routine takes an [`RngSpec`]. Parallel work derives one
//! child stream per task with [`RngSpec::derive`], so results never depend on
//! scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub const fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub const fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Child stream keyed by `label`. Same parent and label, same child.
    pub fn derive(&self, label: u64) -> RngSpec {
        RngSpec {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(label.wrapping_add(0x632b_e59b_d9b4_e019))),
        }
    }

    /// Child stream keyed by a pair of labels, e.g. (trial, permutation).
    pub fn derive2(&self, a: u64, b: u64) -> RngSpec {
        self.derive(a).derive(b)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `count` uniform draws from [0, 1).
pub fn rng_uniform(spec: RngSpec, count: usize) -> Vec<f64> {
    let mut rng = spec.rng();
    (0..count).map(|_| rng.random::<f64>()).collect()
}
