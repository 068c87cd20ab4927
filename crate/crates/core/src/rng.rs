//! Reproducible random streams.
//!
//! All sampling goes through ChaCha20, a counter-based generator. A
//! [`RngStream`] is a `(seed, stream)` pair; child streams are derived by
//! mixing a label into the stream id, so a trial's draws depend only on
//! `(base_seed, trial, …)` and never on scheduling order.
//!
//! Standard normals are produced by inverting the normal CDF on open-interval
//! uniforms rather than by rejection, so the number of draws per variate is
//! fixed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream identified by `label`.
    pub fn derive(&self, label: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(label.wrapping_add(1))),
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Uniform draw on the open interval (0, 1) with 52 random bits.
pub fn open_uniform(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Standard normal variate via the inverse CDF.
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    thread_local! {
        static STANDARD: Normal = Normal::standard();
    }
    let u = open_uniform(rng);
    STANDARD.with(|n| n.inverse_cdf(u))
}
