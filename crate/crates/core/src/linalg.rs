//! Dense symmetric matrices, their eigensystems, and spectral matrix functions.
//!
//! Every distance in this crate reduces to functions of symmetric eigenvalue
//! problems. Eigenvalues are always reported in descending order.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{check_dim, CovError, Result};

/// Relative tolerance below which negative eigenvalues are treated as round-off
/// and clipped to zero.
pub const DEFAULT_CLIP_TOL: f64 = 1e-10;

/// Below this magnitude `h(λ) = log(1+λ)/λ` is evaluated by its Taylor series.
const H_SERIES_CUTOFF: f64 = 1e-4;

/// Relative imaginary-part tolerance for spectra that must be real.
pub const IMAG_TOL: f64 = 1e-8;

/// Jitter levels (relative to the mean diagonal) tried by [`chol_jitter`].
pub const JITTER_SCHEDULE: [f64; 8] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// A dense real symmetric matrix.
///
/// Construction symmetrizes the input as `(M + Mᵀ)/2`, so `m[(i, j)] == m[(j, i)]`
/// holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CovError::DimensionMismatch {
                context: "symmetric matrix must be square",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(CovError::InvalidParameter("matrix dimension must be at least 1".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(CovError::NonFinite("matrix entries"));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without validation. Callers guarantee a square, finite input.
    pub(crate) fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let v = (m[(i, j)] + m[(j, i)]) / 2.0;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, f))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        check_dim("row-major data length", n * n, data.len())?;
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix(&self.0 * c)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `M S Mᵀ` for a square or rectangular `M`.
    pub fn congruence(&self, m: &DMatrix<f64>) -> Result<SymMatrix> {
        check_dim("congruence factor columns", self.dim(), m.ncols())?;
        Ok(SymMatrix::symmetrized(m * &self.0 * m.transpose()))
    }

    /// Leading `k × k` principal submatrix.
    pub fn leading(&self, k: usize) -> Result<SymMatrix> {
        if k == 0 || k > self.dim() {
            return Err(CovError::InvalidParameter(format!(
                "principal submatrix size {k} outside 1..={}",
                self.dim()
            )));
        }
        Ok(SymMatrix(self.0.view((0, 0), (k, k)).into_owned()))
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_dim("matrix sum", self.dim(), other.dim())?;
        Ok(SymMatrix(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_dim("matrix difference", self.dim(), other.dim())?;
        Ok(SymMatrix(&self.0 - &other.0))
    }

    /// `self + c I`.
    pub fn shifted(&self, c: f64) -> SymMatrix {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += c;
        }
        SymMatrix(m)
    }

    fn condition_report(&self) -> CovError {
        CovError::EigenNoConvergence {
            n: self.dim(),
            frobenius_norm: self.frobenius_norm(),
            max_abs: self.0.amax(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Eigensystem `M = U Λ Uᵀ` with eigenvalues sorted in descending order and
/// orthonormal eigenvectors stored as the columns of `U`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.with_spectrum(&self.eigenvalues)
    }

    /// `U diag(values) Uᵀ`.
    pub fn with_spectrum(&self, values: &[f64]) -> SymMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &v) in scaled.column_iter_mut().zip(values) {
            col *= v;
        }
        SymMatrix::symmetrized(scaled * self.eigenvectors.transpose())
    }

    /// Applies `f` to the clipped spectrum.
    pub fn map(&self, f: MatrixFunction, clip_tol: f64) -> Result<SymMatrix> {
        let values = map_spectrum(&self.eigenvalues, f, clip_tol)?;
        Ok(self.with_spectrum(&values))
    }
}

/// Scalar functions that can be lifted to symmetric matrices through the spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFunction {
    Log,
    Pow(f64),
    Sqrt,
    InvSqrt,
    Inv,
    /// `λ ↦ log(1 + λ)`
    Log1p,
    /// `λ ↦ log(1 + λ)/λ`, with `h(0) = 1`
    H,
}

impl MatrixFunction {
    fn requires_positive(self) -> bool {
        match self {
            MatrixFunction::Log | MatrixFunction::Inv | MatrixFunction::InvSqrt => true,
            MatrixFunction::Pow(a) => a < 0.0,
            _ => false,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            MatrixFunction::Log => x.ln(),
            MatrixFunction::Pow(a) => x.powf(a),
            MatrixFunction::Sqrt => x.sqrt(),
            MatrixFunction::InvSqrt => 1.0 / x.sqrt(),
            MatrixFunction::Inv => 1.0 / x,
            MatrixFunction::Log1p => x.ln_1p(),
            MatrixFunction::H => h_scalar(x),
        }
    }
}

/// `log(1+x)/x`, continuous at 0.
pub fn h_scalar(x: f64) -> f64 {
    if x.abs() < H_SERIES_CUTOFF {
        1.0 - x / 2.0 + x * x / 3.0 - x * x * x / 4.0
    } else {
        x.ln_1p() / x
    }
}

/// Clips round-off negatives of a descending spectrum to zero.
///
/// Eigenvalues in `(-clip_tol·λ_max, 0)` become `0`; anything lower is an error.
pub fn clip_spectrum(eigenvalues: &[f64], clip_tol: f64) -> Result<Vec<f64>> {
    let lambda_max = eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let threshold = clip_tol * lambda_max;
    eigenvalues
        .iter()
        .map(|&l| {
            if l >= 0.0 {
                Ok(l)
            } else if -l < threshold {
                Ok(0.0)
            } else {
                Err(CovError::NotPsd {
                    eigenvalue: l,
                    threshold,
                })
            }
        })
        .collect()
}

fn map_spectrum(eigenvalues: &[f64], f: MatrixFunction, clip_tol: f64) -> Result<Vec<f64>> {
    let clipped = clip_spectrum(eigenvalues, clip_tol)?;
    if f.requires_positive() {
        if let Some(&z) = clipped.iter().find(|&&l| l <= 0.0) {
            return Err(CovError::Singular { eigenvalue: z });
        }
    }
    Ok(clipped.into_iter().map(|l| f.eval(l)).collect())
}

fn max_iterations(n: usize) -> usize {
    200 * n.max(10)
}

#[cfg(feature = "lapack")]
fn raw_eig(m: &SymMatrix) -> Result<(Vec<f64>, DMatrix<f64>)> {
    match crate::lapack::syevd(m.0.clone(), true) {
        Some((values, Some(vectors))) => Ok((values, vectors)),
        _ => Err(m.condition_report()),
    }
}

#[cfg(feature = "lapack")]
fn raw_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    crate::lapack::syevd(m.0.clone(), false)
        .map(|(values, _)| values)
        .ok_or_else(|| m.condition_report())
}

#[cfg(not(feature = "lapack"))]
fn raw_eig(m: &SymMatrix) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = nalgebra::SymmetricEigen::try_new(m.0.clone(), f64::EPSILON, max_iterations(m.dim()))
        .ok_or_else(|| m.condition_report())?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

#[cfg(not(feature = "lapack"))]
fn raw_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    Ok(m.0.symmetric_eigenvalues().iter().copied().collect())
}

/// Symmetric eigendecomposition, eigenvalues descending.
pub fn sym_eig(m: &SymMatrix) -> Result<SpectralDecomposition> {
    let n = m.dim();
    let (values, vectors) = raw_eig(m)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(m.condition_report());
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, descending. Considerably cheaper than [`sym_eig`] for large `n`.
pub fn sym_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    let mut values = raw_eigenvalues(m)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(m.condition_report());
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// `U f(Λ) Uᵀ` after clipping round-off negatives of the spectrum.
pub fn spd_func(m: &SymMatrix, f: MatrixFunction, clip_tol: f64) -> Result<SymMatrix> {
    sym_eig(m)?.map(f, clip_tol)
}

/// Lower Cholesky factor of `M + εI` and the jitter `ε` that made it succeed.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub lower: DMatrix<f64>,
    pub jitter: f64,
}

/// Cholesky factorization with a fixed, reported jitter schedule.
///
/// Tries `ε ∈ {0, 1e-12, …, 1e-6}·mean(diag M)` in order and returns the first
/// success.
pub fn chol_jitter(m: &SymMatrix) -> Result<CholeskyFactor> {
    let n = m.dim();
    let mean_diag = m.trace() / n as f64;
    let mut max_jitter = 0.0;
    for level in JITTER_SCHEDULE {
        let jitter = level * mean_diag;
        max_jitter = jitter;
        let shifted = m.shifted(jitter).into_inner();
        if let Some(chol) = shifted.cholesky() {
            let lower = chol.l();
            if lower.iter().all(|v| v.is_finite()) {
                return Ok(CholeskyFactor { lower, jitter });
            }
        }
    }
    Err(CovError::NotFactorizable { max_jitter })
}

/// Real spectrum of a general square matrix that is known to be similar to a
/// symmetric one.
#[derive(Debug, Clone)]
pub struct GeneralSpectrum {
    /// Real parts, descending.
    pub eigenvalues: Vec<f64>,
    /// Largest discarded imaginary magnitude.
    pub max_imag: f64,
}

/// Eigenvalues of a non-symmetric matrix whose spectrum should be real.
///
/// Imaginary parts up to `1e-8·(1 + max|Re λ|)` are treated as round-off and
/// dropped; anything larger is a [`CovError::NonRealSpectrum`].
pub fn eig_general_real(m: &DMatrix<f64>) -> Result<GeneralSpectrum> {
    check_dim("general eigenproblem must be square", m.nrows(), m.ncols())?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CovError::NonFinite("general eigenproblem input"));
    }
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, max_iterations(n)).ok_or(CovError::EigenNoConvergence {
        n,
        frobenius_norm: m.norm(),
        max_abs: m.amax(),
    })?;
    let complex = schur.complex_eigenvalues();
    let scale = 1.0 + complex.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let mut max_imag = 0.0_f64;
    for z in complex.iter() {
        if z.im.abs() > IMAG_TOL * scale {
            return Err(CovError::NonRealSpectrum { re: z.re, im: z.im });
        }
        max_imag = max_imag.max(z.im.abs());
    }
    let mut eigenvalues: Vec<f64> = complex.iter().map(|z| z.re).collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(GeneralSpectrum { eigenvalues, max_imag })
}

/// `log det(I + M) = Σ log(1 + λ_k)`.
pub fn logdet_i_plus(m: &SymMatrix) -> Result<f64> {
    logdet_i_plus_spectrum(&sym_eigenvalues(m)?)
}

pub(crate) fn logdet_i_plus_spectrum(eigenvalues: &[f64]) -> Result<f64> {
    eigenvalues.iter().try_fold(0.0, |acc, &l| {
        if l <= -1.0 {
            Err(CovError::LogDetUndefined { eigenvalue: l })
        } else {
            Ok(acc + l.ln_1p())
        }
    })
}
