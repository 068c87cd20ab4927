//! Seeded inputs shared by the benchmarks.

use covdist::rng::standard_normal;
use covdist::{FeatureFactor, RngStream, SymMatrix};
use nalgebra::DMatrix;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = RngStream::new(seed).rng();
    DMatrix::from_fn(rows, cols, |_, _| standard_normal(&mut rng))
}

/// `G Gᵀ / r` for a standard normal `n×r` matrix `G`.
pub fn random_psd(n: usize, r: usize, seed: u64) -> SymMatrix {
    let g = gaussian(n, r, seed);
    SymMatrix::new(&g * g.transpose() / r as f64).expect("finite square input")
}

pub fn random_factor(n: usize, p: usize, seed: u64) -> FeatureFactor {
    FeatureFactor::new(gaussian(n, p, seed) / (p as f64).sqrt()).expect("finite input")
}
