//! Distances and divergences between covariance matrices and regularized
//! covariance operators `A + γI`.
//!
//! Operators are wrapped in [`PsdMatrix`] / [`RegularizedOperator`], which
//! validate positivity once and cache the eigensystem. Pairwise work (nearest
//! neighbour search, convergence sweeps) then reuses the cached spectra instead
//! of decomposing the same matrix for every pair.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, CovError, Result};
use crate::linalg::{
    clip_spectrum, logdet_i_plus_spectrum, spd_func, sym_eig, sym_eigenvalues, MatrixFunction, SpectralDecomposition,
    SymMatrix, DEFAULT_CLIP_TOL,
};

/// Below this `|α|`, power-type distances switch to their log-Euclidean limit.
pub const ALPHA_LIMIT: f64 = 1e-8;

/// Distances used by the estimation and classification pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Hilbert-Schmidt (Frobenius).
    Hs,
    /// Square-root distance.
    Sqrt,
    /// Bures-Wasserstein.
    Bw,
    /// Sinkhorn divergence between centered Gaussians.
    Sinkhorn,
    /// Log-Hilbert-Schmidt.
    Loghs,
    /// Affine-invariant Riemannian.
    Aihs,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Hs,
        Metric::Sqrt,
        Metric::Bw,
        Metric::Sinkhorn,
        Metric::Loghs,
        Metric::Aihs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Hs => "hs",
            Metric::Sqrt => "sqrt",
            Metric::Bw => "bw",
            Metric::Sinkhorn => "sinkhorn",
            Metric::Loghs => "loghs",
            Metric::Aihs => "aihs",
        }
    }

    /// Whether the metric consumes the regularization `γ`.
    pub fn is_regularized(self) -> bool {
        matches!(self, Metric::Loghs | Metric::Aihs)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = CovError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CovError::InvalidParameter(format!("unknown metric '{s}'")))
    }
}

/// A symmetric PSD matrix together with its (clipped) eigensystem.
#[derive(Debug)]
pub struct PsdMatrix {
    matrix: SymMatrix,
    spectrum: SpectralDecomposition,
    sqrt: OnceLock<SymMatrix>,
}

impl PsdMatrix {
    pub fn new(matrix: SymMatrix) -> Result<Self> {
        let mut spectrum = sym_eig(&matrix)?;
        spectrum.eigenvalues = clip_spectrum(&spectrum.eigenvalues, DEFAULT_CLIP_TOL)?;
        Ok(Self {
            matrix,
            spectrum,
            sqrt: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Clipped eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum.eigenvalues
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn sqrt(&self) -> &SymMatrix {
        self.sqrt.get_or_init(|| {
            let values: Vec<f64> = self.spectrum.eigenvalues.iter().map(|l| l.sqrt()).collect();
            self.spectrum.with_spectrum(&values)
        })
    }

    pub fn trace(&self) -> f64 {
        self.spectrum.eigenvalues.iter().sum()
    }

    /// Singular values of `self^{1/2} other^{1/2}`.
    ///
    /// Their squares are the eigenvalues of `self^{1/2} other self^{1/2}`, but
    /// small ones come out with absolute rather than square-root accuracy, and
    /// the result is symmetric in the two arguments.
    fn cross_singular_values(&self, other: &PsdMatrix) -> Result<Vec<f64>> {
        same_dim(self.dim(), other.dim())?;
        let product = self.sqrt().as_matrix() * other.sqrt().as_matrix();
        let values: Vec<f64> = product.singular_values().iter().copied().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CovError::NonFinite("singular values"));
        }
        Ok(values)
    }
}

/// `A + γI` with `A` symmetric PSD (round-off negatives clipped) and `γ > 0`.
#[derive(Debug)]
pub struct RegularizedOperator {
    base: PsdMatrix,
    gamma: f64,
    log_unit: OnceLock<SymMatrix>,
    inv_sqrt_unit: OnceLock<SymMatrix>,
}

impl RegularizedOperator {
    pub fn new(a: SymMatrix, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(CovError::InvalidParameter(format!(
                "regularization gamma must be > 0, got {gamma}"
            )));
        }
        Ok(Self {
            base: PsdMatrix::new(a)?,
            gamma,
            log_unit: OnceLock::new(),
            inv_sqrt_unit: OnceLock::new(),
        })
    }

    pub fn from_psd(base: PsdMatrix, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(CovError::InvalidParameter(format!(
                "regularization gamma must be > 0, got {gamma}"
            )));
        }
        Ok(Self {
            base,
            gamma,
            log_unit: OnceLock::new(),
            inv_sqrt_unit: OnceLock::new(),
        })
    }

    pub fn a(&self) -> &SymMatrix {
        self.base.matrix()
    }

    pub fn psd(&self) -> &PsdMatrix {
        &self.base
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.base.eigenvalues()
    }

    /// `log(A/γ + I)`.
    pub fn log_unit(&self) -> &SymMatrix {
        self.log_unit.get_or_init(|| {
            let values: Vec<f64> = self.eigenvalues().iter().map(|l| (l / self.gamma).ln_1p()).collect();
            self.base.spectrum().with_spectrum(&values)
        })
    }

    /// `(A/γ + I)^{-1/2}`.
    pub fn inv_sqrt_unit(&self) -> &SymMatrix {
        self.inv_sqrt_unit.get_or_init(|| {
            let values: Vec<f64> = self
                .eigenvalues()
                .iter()
                .map(|l| 1.0 / (1.0 + l / self.gamma).sqrt())
                .collect();
            self.base.spectrum().with_spectrum(&values)
        })
    }

    /// `A/γ + I` assembled from the clipped spectrum.
    pub fn unit(&self) -> SymMatrix {
        let values: Vec<f64> = self.eigenvalues().iter().map(|l| 1.0 + l / self.gamma).collect();
        self.base.spectrum().with_spectrum(&values)
    }
}

/// Mean and covariance of a Gaussian measure.
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
}

impl GaussianMoments {
    pub fn new(mean: DVector<f64>, cov: SymMatrix) -> Result<Self> {
        check_dim("gaussian mean length", cov.dim(), mean.len())?;
        Ok(Self { mean, cov })
    }

    pub fn centered(cov: SymMatrix) -> Self {
        Self {
            mean: DVector::zeros(cov.dim()),
            cov,
        }
    }
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    check_dim("operands must have equal dimension", a, b)
}

/// Hilbert-Schmidt (Frobenius) distance `‖A − B‖_F`.
pub fn dist_hs(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    Ok((a.as_matrix() - b.as_matrix()).norm())
}

/// `‖A^{1/2} − B^{1/2}‖_F`.
pub fn dist_sqrt(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    let ra = spd_func(a, MatrixFunction::Sqrt, DEFAULT_CLIP_TOL)?;
    let rb = spd_func(b, MatrixFunction::Sqrt, DEFAULT_CLIP_TOL)?;
    Ok((ra.as_matrix() - rb.as_matrix()).norm())
}

/// Bures-Wasserstein distance `(tr[A + B − 2(B^{1/2} A B^{1/2})^{1/2}])^{1/2}`.
pub fn dist_bw(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    bw_between(&PsdMatrix::new(a.clone())?, &PsdMatrix::new(b.clone())?)
}

/// Bures-Wasserstein distance between prepared PSD matrices.
pub fn bw_between(a: &PsdMatrix, b: &PsdMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    if a.matrix() == b.matrix() {
        return Ok(0.0);
    }
    let cross: f64 = a.cross_singular_values(b)?.iter().sum();
    Ok((a.trace() + b.trace() - 2.0 * cross).max(0.0).sqrt())
}

/// Power-Euclidean distance `‖(A^α − B^α)/α‖_F`, log-Euclidean for `|α| < 1e-8`.
pub fn dist_power_euclid(a: &SymMatrix, b: &SymMatrix, alpha: f64) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    if alpha.abs() < ALPHA_LIMIT {
        return log_euclidean(a, b);
    }
    let pa = spd_func(a, MatrixFunction::Pow(alpha), DEFAULT_CLIP_TOL)?;
    let pb = spd_func(b, MatrixFunction::Pow(alpha), DEFAULT_CLIP_TOL)?;
    Ok((pa.as_matrix() - pb.as_matrix()).norm() / alpha.abs())
}

/// `‖log A − log B‖_F`.
pub fn log_euclidean(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    let la = spd_func(a, MatrixFunction::Log, DEFAULT_CLIP_TOL)?;
    let lb = spd_func(b, MatrixFunction::Log, DEFAULT_CLIP_TOL)?;
    Ok((la.as_matrix() - lb.as_matrix()).norm())
}

/// α-Procrustes distance
/// `(1/|α|)(tr[A^{2α} + B^{2α} − 2(B^α A^{2α} B^α)^{1/2}])^{1/2}`.
pub fn dist_alpha_procrustes(a: &SymMatrix, b: &SymMatrix, alpha: f64) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    if alpha.abs() < ALPHA_LIMIT {
        return log_euclidean(a, b);
    }
    let pa = spd_func(a, MatrixFunction::Pow(alpha), DEFAULT_CLIP_TOL)?;
    let pb = spd_func(b, MatrixFunction::Pow(alpha), DEFAULT_CLIP_TOL)?;
    if a == b {
        return Ok(0.0);
    }
    // tr (B^α A^{2α} B^α)^{1/2} is the nuclear norm of A^α B^α
    let cross: f64 = (pa.as_matrix() * pb.as_matrix()).singular_values().sum();
    let t = pa.as_matrix().norm_squared() + pb.as_matrix().norm_squared() - 2.0 * cross;
    Ok(t.max(0.0).sqrt() / alpha.abs())
}

fn gamma_term(gamma1: f64, gamma2: f64) -> f64 {
    let r = (gamma1 / gamma2).ln();
    r * r
}

/// Log-Hilbert-Schmidt distance between `A + γ₁I` and `B + γ₂I`:
/// `(‖log(A/γ₁ + I) − log(B/γ₂ + I)‖²_F + log²(γ₁/γ₂))^{1/2}`.
pub fn dist_loghs(p: &RegularizedOperator, q: &RegularizedOperator) -> Result<f64> {
    same_dim(p.dim(), q.dim())?;
    let diff = (p.log_unit().as_matrix() - q.log_unit().as_matrix()).norm_squared();
    Ok((diff + gamma_term(p.gamma, q.gamma)).sqrt())
}

/// Affine-invariant distance between `A + γ₁I` and `B + γ₂I`:
/// `(‖log[(A/γ₁+I)^{-1/2}(B/γ₂+I)(A/γ₁+I)^{-1/2}]‖²_F + log²(γ₁/γ₂))^{1/2}`.
pub fn dist_aihs(p: &RegularizedOperator, q: &RegularizedOperator) -> Result<f64> {
    same_dim(p.dim(), q.dim())?;
    if p.gamma == q.gamma && p.a() == q.a() {
        return Ok(0.0);
    }
    let unit_q = q.a().scaled(1.0 / q.gamma).shifted(1.0);
    let inner = unit_q.congruence(p.inv_sqrt_unit().as_matrix())?;
    let sum_sq: f64 = sym_eigenvalues(&inner)?
        .iter()
        .map(|&s| {
            if s > 0.0 {
                let l = s.ln();
                Ok(l * l)
            } else {
                Err(CovError::Singular { eigenvalue: s })
            }
        })
        .sum::<Result<f64>>()?;
    Ok((sum_sq + gamma_term(p.gamma, q.gamma)).sqrt())
}

/// Affine-invariant distance `‖log(B^{-1/2} A B^{-1/2})‖_F` between strictly PD matrices.
pub fn dist_ai_exact(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    let smallest_a = *sym_eigenvalues(a)?.last().expect("n >= 1");
    if smallest_a <= 0.0 {
        return Err(CovError::Singular { eigenvalue: smallest_a });
    }
    if a == b {
        return Ok(0.0);
    }
    let b_inv_sqrt = spd_func(b, MatrixFunction::InvSqrt, DEFAULT_CLIP_TOL)?;
    let inner = a.congruence(b_inv_sqrt.as_matrix())?;
    let mut sum_sq = 0.0;
    for s in sym_eigenvalues(&inner)? {
        if s <= 0.0 {
            return Err(CovError::Singular { eigenvalue: s });
        }
        sum_sq += s.ln() * s.ln();
    }
    Ok(sum_sq.sqrt())
}

/// Eigenvalues of `M^ε = −I + (I + (16/ε²) S)^{1/2}` from those of `S`.
fn sinkhorn_m_spectrum(s: &[f64], eps: f64) -> Vec<f64> {
    let c = 16.0 / (eps * eps);
    // −1 + √(1+x) rewritten as x/(1 + √(1+x)) to avoid cancellation for small x
    s.iter()
        .map(|&v| {
            let x = c * v;
            x / (1.0 + (1.0 + x).sqrt())
        })
        .collect()
}

fn sinkhorn_terms(m: &[f64]) -> Result<(f64, f64)> {
    let trace: f64 = m.iter().sum();
    let half: Vec<f64> = m.iter().map(|v| v / 2.0).collect();
    Ok((trace, logdet_i_plus_spectrum(&half)?))
}

/// Any pipeline metric between two prepared covariances. Only `loghs` and
/// `aihs` use the regularization; `epsilon` is only read by `sinkhorn`, which
/// compares centered Gaussians.
pub fn metric_distance(metric: Metric, p: &RegularizedOperator, q: &RegularizedOperator, epsilon: f64) -> Result<f64> {
    match metric {
        Metric::Hs => dist_hs(p.a(), q.a()),
        Metric::Sqrt => {
            same_dim(p.dim(), q.dim())?;
            Ok((p.psd().sqrt().as_matrix() - q.psd().sqrt().as_matrix()).norm())
        }
        Metric::Bw => bw_between(p.psd(), q.psd()),
        Metric::Sinkhorn => sinkhorn_between(p.psd(), q.psd(), epsilon),
        Metric::Loghs => dist_loghs(p, q),
        Metric::Aihs => dist_aihs(p, q),
    }
}

/// Entropic (Sinkhorn) divergence between two Gaussian measures.
pub fn sinkhorn_gauss(mu0: &GaussianMoments, mu1: &GaussianMoments, eps: f64) -> Result<f64> {
    same_dim(mu0.cov.dim(), mu1.cov.dim())?;
    let c0 = PsdMatrix::new(mu0.cov.clone())?;
    let c1 = PsdMatrix::new(mu1.cov.clone())?;
    let mean_sq = (&mu0.mean - &mu1.mean).norm_squared();
    Ok(mean_sq + sinkhorn_between(&c0, &c1, eps)?)
}

/// Sinkhorn divergence between centered Gaussians with prepared covariances.
pub fn sinkhorn_between(c0: &PsdMatrix, c1: &PsdMatrix, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CovError::InvalidParameter(format!(
            "sinkhorn epsilon must be > 0, got {eps}"
        )));
    }
    same_dim(c0.dim(), c1.dim())?;
    if c0.matrix() == c1.matrix() {
        return Ok(0.0);
    }
    // C^{1/2} C C^{1/2} = C², so the diagonal terms only need the spectra.
    let s00: Vec<f64> = c0.eigenvalues().iter().map(|l| l * l).collect();
    let s11: Vec<f64> = c1.eigenvalues().iter().map(|l| l * l).collect();
    let s01: Vec<f64> = c0.cross_singular_values(c1)?.iter().map(|v| v * v).collect();
    let (t00, ld00) = sinkhorn_terms(&sinkhorn_m_spectrum(&s00, eps))?;
    let (t11, ld11) = sinkhorn_terms(&sinkhorn_m_spectrum(&s11, eps))?;
    let (t01, ld01) = sinkhorn_terms(&sinkhorn_m_spectrum(&s01, eps))?;
    let q = eps / 4.0;
    Ok(q * (t00 - 2.0 * t01 + t11) + q * (2.0 * ld01 - ld00 - ld11))
}
