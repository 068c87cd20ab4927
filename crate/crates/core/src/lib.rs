pub mod distances;
pub mod error;
pub mod experiments;
pub mod identity;
pub mod io;
pub mod kernels;
#[cfg(feature = "lapack")]
mod lapack;
pub mod linalg;
pub mod rkhs;
pub mod rng;

pub use distances::{GaussianMoments, Metric, PsdMatrix, RegularizedOperator};
pub use error::{CovError, Result};
pub use experiments::{ClassificationConfig, ConvergenceConfig, OracleConfig, Reference, ResultRow};
pub use kernels::{DomainSpec, KernelSpec, PathMatrix, PointSet};
pub use linalg::{MatrixFunction, SpectralDecomposition, SymMatrix};
pub use rkhs::{FeatureFactor, GramBlocks, OperatorMetric};
pub use rng::RngStream;
