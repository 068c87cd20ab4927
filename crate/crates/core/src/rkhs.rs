//! Kernel-trick evaluation of the Log-Hilbert-Schmidt and affine-invariant
//! distances.
//!
//! A covariance `C = A Aᵀ` on an `n`-dimensional (possibly infinite) space is
//! handled through its factor `A` (`n × p`). The identities
//!
//! * `log(I + A Aᵀ) = A h(AᵀA) Aᵀ`, `h(λ) = log(1+λ)/λ`,
//! * `‖log(I+ÃÃᵀ) − log(I+B̃B̃ᵀ)‖² = ‖log(I+ÃᵀÃ)‖² + ‖log(I+B̃ᵀB̃)‖²
//!   − 2 tr[(ÃᵀB̃)ᵀ h(ÃᵀÃ) (ÃᵀB̃) h(B̃ᵀB̃)]`,
//! * the affine-invariant distance equals `(Σ_k log²(1 + μ_k))^{1/2}` for the
//!   eigenvalues `μ_k` of a `(p₁+p₂)`-square block matrix `D`,
//!
//! mean that only the Gram blocks `ÃᵀÃ`, `B̃ᵀB̃`, `ÃᵀB̃` are ever formed. With
//! kernel feature maps these blocks are (centered) kernel Gram matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distances::{dist_aihs, dist_loghs, RegularizedOperator};
use crate::error::{check_dim, CovError, Result};
use crate::linalg::{clip_spectrum, sym_eig, sym_eigenvalues, MatrixFunction, SymMatrix, DEFAULT_CLIP_TOL};

/// The two regularized operator distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorMetric {
    Loghs,
    Aihs,
}

/// Rectangular factor `A` (`n × p`) of a covariance `C = A Aᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFactor(DMatrix<f64>);

impl FeatureFactor {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(CovError::InvalidParameter("feature factor must be non-empty".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(CovError::NonFinite("feature factor"));
        }
        Ok(Self(a))
    }

    pub fn ambient_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `A Aᵀ` in the ambient space.
    pub fn covariance(&self) -> SymMatrix {
        SymMatrix::symmetrized(&self.0 * self.0.transpose())
    }
}

/// Gram blocks `ÃᵀÃ`, `B̃ᵀB̃`, `ÃᵀB̃` of two normalized factors plus the
/// `log(γ₁/γ₂)` scalar.
#[derive(Debug, Clone)]
pub struct GramBlocks {
    pub g11: SymMatrix,
    pub g22: SymMatrix,
    pub g12: DMatrix<f64>,
    pub log_gamma_ratio: f64,
    /// Set when both operators are built from bit-identical data.
    coincident: bool,
}

impl GramBlocks {
    fn new(g11: SymMatrix, g22: SymMatrix, g12: DMatrix<f64>, log_gamma_ratio: f64) -> Result<Self> {
        check_dim("cross block rows", g11.dim(), g12.nrows())?;
        check_dim("cross block columns", g22.dim(), g12.ncols())?;
        Ok(Self {
            g11,
            g22,
            g12,
            log_gamma_ratio,
            coincident: false,
        })
    }

    pub fn from_factors(f1: &FeatureFactor, gamma1: f64, f2: &FeatureFactor, gamma2: f64) -> Result<Self> {
        check_gamma(gamma1)?;
        check_gamma(gamma2)?;
        check_dim(
            "factors must share the ambient dimension",
            f1.ambient_dim(),
            f2.ambient_dim(),
        )?;
        let a = f1.as_matrix();
        let b = f2.as_matrix();
        let g11 = SymMatrix::symmetrized(a.transpose() * a / gamma1);
        let g22 = SymMatrix::symmetrized(b.transpose() * b / gamma2);
        let g12 = a.transpose() * b / (gamma1 * gamma2).sqrt();
        let mut blocks = Self::new(g11, g22, g12, (gamma1 / gamma2).ln())?;
        blocks.coincident = gamma1 == gamma2 && f1 == f2;
        Ok(blocks)
    }

    /// Blocks for the RKHS Gaussian measures `N(0, C_Φ(X¹) + γ₁I)` and
    /// `N(0, C_Φ(X²) + γ₂I)` from raw kernel Gram matrices; the feature maps
    /// are mean-centered with `J = I − 𝟙𝟙ᵀ/m`.
    pub fn from_kernel_grams(
        k11: &SymMatrix,
        k22: &SymMatrix,
        k12: &DMatrix<f64>,
        gamma1: f64,
        gamma2: f64,
    ) -> Result<Self> {
        check_gamma(gamma1)?;
        check_gamma(gamma2)?;
        let (m1, m2) = (k11.dim(), k22.dim());
        check_dim("K12 rows", m1, k12.nrows())?;
        check_dim("K12 columns", m2, k12.ncols())?;
        let j1 = centering(m1);
        let j2 = centering(m2);
        let g11 = SymMatrix::symmetrized(&j1 * k11.as_matrix() * &j1 / (m1 as f64 * gamma1));
        let g22 = SymMatrix::symmetrized(&j2 * k22.as_matrix() * &j2 / (m2 as f64 * gamma2));
        let g12 = &j1 * k12 * &j2 / ((m1 * m2) as f64 * gamma1 * gamma2).sqrt();
        let mut blocks = Self::new(g11, g22, g12, (gamma1 / gamma2).ln())?;
        blocks.coincident = gamma1 == gamma2 && k11 == k22 && k12 == k11.as_matrix();
        Ok(blocks)
    }

    fn gamma_term(&self) -> f64 {
        self.log_gamma_ratio * self.log_gamma_ratio
    }

    /// `[[G₁₁, G₁₂], [G₁₂ᵀ, G₂₂]]`, the Gram matrix of `[Ã, B̃]`.
    pub fn joint(&self) -> SymMatrix {
        let (p1, p2) = (self.g11.dim(), self.g22.dim());
        let mut g = DMatrix::zeros(p1 + p2, p1 + p2);
        g.view_mut((0, 0), (p1, p1)).copy_from(self.g11.as_matrix());
        g.view_mut((0, p1), (p1, p2)).copy_from(&self.g12);
        g.view_mut((p1, 0), (p2, p1)).copy_from(&self.g12.transpose());
        g.view_mut((p1, p1), (p2, p2)).copy_from(self.g22.as_matrix());
        SymMatrix::symmetrized(g)
    }

    /// Log-Hilbert-Schmidt distance.
    ///
    /// With `W = [Ã, B̃]` and `Q = diag(h(G₁₁), −h(G₂₂))` the log difference is
    /// `W Q Wᵀ`, whose Frobenius norm equals that of `G^{1/2} Q G^{1/2}`.
    /// Unlike the expanded three-term sum this does not cancel
    /// catastrophically when the two operators are close.
    pub fn loghs(&self) -> Result<f64> {
        let p1 = self.g11.dim();
        let h1 = sym_eig(&self.g11)?.map(MatrixFunction::H, DEFAULT_CLIP_TOL)?;
        let h2 = sym_eig(&self.g22)?.map(MatrixFunction::H, DEFAULT_CLIP_TOL)?;
        let root = sym_eig(&self.joint())?.map(MatrixFunction::Sqrt, DEFAULT_CLIP_TOL)?;
        let root = root.as_matrix();
        let mut q_root = root.clone();
        let top = h1.as_matrix() * root.rows(0, p1);
        q_root.rows_mut(0, p1).copy_from(&top);
        let bottom = -(h2.as_matrix() * root.rows(p1, self.g22.dim()));
        q_root.rows_mut(p1, self.g22.dim()).copy_from(&bottom);
        let m = root * q_root;
        Ok((m.norm_squared() + self.gamma_term()).sqrt())
    }

    /// The expanded form `‖log(I+G₁₁)‖² + ‖log(I+G₂₂)‖² − 2 tr[G₁₂ᵀ h(G₁₁) G₁₂ h(G₂₂)]`.
    pub fn loghs_expanded(&self) -> Result<f64> {
        let e1 = sym_eig(&self.g11)?;
        let e2 = sym_eig(&self.g22)?;
        let log_norm_sq = |values: Vec<f64>| -> f64 { values.iter().map(|l| l.ln_1p().powi(2)).sum() };
        let t1 = log_norm_sq(clip_spectrum(&e1.eigenvalues, DEFAULT_CLIP_TOL)?);
        let t2 = log_norm_sq(clip_spectrum(&e2.eigenvalues, DEFAULT_CLIP_TOL)?);
        let h1 = e1.map(MatrixFunction::H, DEFAULT_CLIP_TOL)?;
        let h2 = e2.map(MatrixFunction::H, DEFAULT_CLIP_TOL)?;
        // tr[Xᵀ h₁ X h₂] = Σ_ij (h₁X)_ij (X h₂)_ij
        let left = h1.as_matrix() * &self.g12;
        let right = &self.g12 * h2.as_matrix();
        let d2 = t1 + t2 - 2.0 * left.dot(&right) + self.gamma_term();
        Ok(d2.max(0.0).sqrt())
    }

    /// `T = Wᵀ (I + ÃÃᵀ)^{-1} W` for `W = [Ã, B̃]`, written with
    /// `P = (I + G₁₁)^{-1}`.
    fn inverse_weighted_gram(&self) -> Result<SymMatrix> {
        let (p1, p2) = (self.g11.dim(), self.g22.dim());
        let e1 = sym_eig(&self.g11)?;
        let lambda = clip_spectrum(&e1.eigenvalues, DEFAULT_CLIP_TOL)?;
        let inv: Vec<f64> = lambda.iter().map(|l| 1.0 / (1.0 + l)).collect();
        let ratio: Vec<f64> = lambda.iter().map(|l| l / (1.0 + l)).collect();
        let pg12 = e1.with_spectrum(&inv).as_matrix() * &self.g12;
        let mut t = DMatrix::zeros(p1 + p2, p1 + p2);
        t.view_mut((0, 0), (p1, p1))
            .copy_from(e1.with_spectrum(&ratio).as_matrix());
        t.view_mut((0, p1), (p1, p2)).copy_from(&pg12);
        t.view_mut((p1, 0), (p2, p1)).copy_from(&pg12.transpose());
        t.view_mut((p1, p1), (p2, p2))
            .copy_from(&(self.g22.as_matrix() - self.g12.transpose() * &pg12));
        Ok(SymMatrix::symmetrized(t))
    }

    /// The block matrix
    /// `D = [[P − I, P G₁₂], [−G₁₂ᵀ P, G₂₂ − G₁₂ᵀ P G₁₂]]`; its eigenvalues
    /// `μ_k` give the affine-invariant distance `(Σ log²(1+μ_k) + log²(γ₁/γ₂))^{1/2}`.
    pub fn block_operator(&self) -> Result<DMatrix<f64>> {
        let p1 = self.g11.dim();
        let mut d = self.inverse_weighted_gram()?.into_inner();
        d.columns_mut(0, p1).neg_mut();
        Ok(d)
    }

    /// Affine-invariant distance.
    ///
    /// `D = T S` with `T` positive semi-definite and `S = diag(−I, I)`, so the
    /// spectrum of `D` is that of the symmetric `T^{1/2} S T^{1/2}`. The
    /// symmetric form stays real when `D` is close to nilpotent, which is the
    /// case for nearly equal operators.
    pub fn aihs(&self) -> Result<f64> {
        let p1 = self.g11.dim();
        let t = sym_eig(&self.inverse_weighted_gram()?)?;
        // the G₂₂ − G₁₂ᵀPG₁₂ block cancels at the scale of G₂₂, not of T
        let scale = t.lambda_max().max(self.g22.frobenius_norm());
        let mut roots = Vec::with_capacity(t.dim());
        for &l in &t.eigenvalues {
            if l < -DEFAULT_CLIP_TOL * scale {
                return Err(CovError::NotPsd {
                    eigenvalue: l,
                    threshold: DEFAULT_CLIP_TOL * scale,
                });
            }
            roots.push(l.max(0.0).sqrt());
        }
        let root = t.with_spectrum(&roots).into_inner();
        let mut signed = root.clone();
        signed.rows_mut(0, p1).neg_mut();
        let mu = sym_eigenvalues(&SymMatrix::symmetrized(&root * signed))?;
        let mut sum = self.gamma_term();
        for m in mu {
            if m <= -1.0 {
                return Err(CovError::Singular { eigenvalue: 1.0 + m });
            }
            sum += m.ln_1p().powi(2);
        }
        Ok(sum.sqrt())
    }

    /// Exactly coincident inputs give 0 without any decomposition: from Gram
    /// data alone, the distance between nearly equal operators is only
    /// resolved to about `√ε` relative to their scale.
    pub fn distance(&self, metric: OperatorMetric) -> Result<f64> {
        if self.coincident {
            return Ok(0.0);
        }
        match metric {
            OperatorMetric::Loghs => self.loghs(),
            OperatorMetric::Aihs => self.aihs(),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(CovError::InvalidParameter(format!("gamma must be > 0, got {gamma}")))
    }
}

/// `J = I − 𝟙𝟙ᵀ/m`.
pub fn centering(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - 1.0 / m as f64)
}

/// `A h(AᵀA) Aᵀ`, which equals `log(I + A Aᵀ)`; only a `p × p`
/// eigendecomposition is performed.
pub fn log_from_factor(f: &FeatureFactor) -> Result<SymMatrix> {
    let a = f.as_matrix();
    let g = SymMatrix::symmetrized(a.transpose() * a);
    let h = sym_eig(&g)?.map(MatrixFunction::H, DEFAULT_CLIP_TOL)?;
    Ok(SymMatrix::symmetrized(a * h.as_matrix() * a.transpose()))
}

/// Log-Hilbert-Schmidt distance between `F₁F₁ᵀ + γ₁I` and `F₂F₂ᵀ + γ₂I`.
pub fn loghs_from_factors(f1: &FeatureFactor, gamma1: f64, f2: &FeatureFactor, gamma2: f64) -> Result<f64> {
    GramBlocks::from_factors(f1, gamma1, f2, gamma2)?.distance(OperatorMetric::Loghs)
}

/// Affine-invariant distance between `F₁F₁ᵀ + γ₁I` and `F₂F₂ᵀ + γ₂I`.
pub fn aihs_from_factors(f1: &FeatureFactor, gamma1: f64, f2: &FeatureFactor, gamma2: f64) -> Result<f64> {
    GramBlocks::from_factors(f1, gamma1, f2, gamma2)?.distance(OperatorMetric::Aihs)
}

/// Distance between the RKHS Gaussian measures induced by two samples through
/// one kernel, from the Gram matrices `K[X¹]`, `K[X²]`, `K[X¹, X²]`.
pub fn rkhs_measure_distance(
    k11: &SymMatrix,
    k22: &SymMatrix,
    k12: &DMatrix<f64>,
    gamma1: f64,
    gamma2: f64,
    metric: OperatorMetric,
) -> Result<f64> {
    GramBlocks::from_kernel_grams(k11, k22, k12, gamma1, gamma2)?.distance(metric)
}

/// Distance between the compressions `P_N A P_N + γI` and `P_N B P_N + γI`
/// onto the first `N` coordinates.
pub fn truncated_distance(a: &SymMatrix, b: &SymMatrix, gamma: f64, n: usize, metric: OperatorMetric) -> Result<f64> {
    check_dim("truncation operands must have equal dimension", a.dim(), b.dim())?;
    if n == 0 || n > a.dim() {
        return Err(CovError::InvalidParameter(format!(
            "truncation level N = {n} outside 1..={}",
            a.dim()
        )));
    }
    let p = RegularizedOperator::new(a.leading(n)?, gamma)?;
    let q = RegularizedOperator::new(b.leading(n)?, gamma)?;
    match metric {
        OperatorMetric::Loghs => dist_loghs(&p, &q),
        OperatorMetric::Aihs => dist_aihs(&p, &q),
    }
}
