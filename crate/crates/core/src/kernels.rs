//! Kernels on `T = [0,1]^d`, Gram matrices, Gaussian-process path sampling
//! and the closed-form spectra used as ground truth.
//!
//! The sampling domain is always the unit hypercube with the uniform
//! probability measure.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, CovError, Result};
use crate::linalg::{chol_jitter, SymMatrix};
use crate::rng::{standard_normal, RngStream};

/// Covariance kernel of a centered Gaussian process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `exp(−a‖x − y‖)`
    Laplacian { a: f64 },
    /// `exp(−‖x − y‖²/σ²)`
    SquaredExponential { sigma: f64 },
    /// `s²·min(x, y)` on `[0, 1]`; `variance` is `s²`.
    Brownian { variance: f64 },
}

impl KernelSpec {
    pub fn validate(&self, domain: DomainSpec) -> Result<()> {
        let (name, value) = match *self {
            KernelSpec::Laplacian { a } => ("laplacian rate a", a),
            KernelSpec::SquaredExponential { sigma } => ("squared_exponential sigma", sigma),
            KernelSpec::Brownian { variance } => ("brownian variance", variance),
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(CovError::InvalidParameter(format!("{name} must be > 0, got {value}")));
        }
        if matches!(self, KernelSpec::Brownian { .. }) && domain.d != 1 {
            return Err(CovError::InvalidParameter(format!(
                "brownian kernel requires d = 1, got d = {}",
                domain.d
            )));
        }
        Ok(())
    }

    /// `sup_x K(x, x)` over the domain (κ² in concentration bounds).
    pub fn sup_diagonal(&self) -> f64 {
        match *self {
            KernelSpec::Laplacian { .. } | KernelSpec::SquaredExponential { .. } => 1.0,
            KernelSpec::Brownian { variance } => variance,
        }
    }

    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Laplacian { a } => (-a * sq_dist(x, y).sqrt()).exp(),
            KernelSpec::SquaredExponential { sigma } => (-sq_dist(x, y) / (sigma * sigma)).exp(),
            KernelSpec::Brownian { variance } => variance * x[0].min(y[0]),
        }
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// The sampling domain `[0,1]^d` with uniform measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub d: usize,
}

impl DomainSpec {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(CovError::InvalidParameter("domain dimension d must be >= 1".into()));
        }
        Ok(Self { d })
    }
}

/// `m` points in `[0,1]^d`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: DMatrix<f64>,
}

impl PointSet {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(CovError::InvalidParameter("point set must be non-empty".into()));
        }
        if let Some(v) = points.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CovError::InvalidParameter(format!(
                "point coordinate {v} outside [0, 1]"
            )));
        }
        Ok(Self { points })
    }

    /// Regular grid `x_j = j/m`, `j = 1..=m`, on `[0, 1]`.
    pub fn grid(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(CovError::InvalidParameter("grid size must be >= 1".into()));
        }
        Self::new(DMatrix::from_fn(m, 1, |j, _| (j + 1) as f64 / m as f64))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, j: usize) -> Vec<f64> {
        self.points.row(j).iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.points
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|j| self.point(j)).collect()
    }
}

/// `m × N` matrix whose columns are sampled paths evaluated on a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    values: DMatrix<f64>,
    /// Diagonal jitter that the Cholesky factorization of the Gram matrix needed.
    pub jitter: f64,
}

impl PathMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(CovError::InvalidParameter("path matrix must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CovError::NonFinite("path values"));
        }
        Ok(Self { values, jitter: 0.0 })
    }

    pub fn points(&self) -> usize {
        self.values.nrows()
    }

    pub fn paths(&self) -> usize {
        self.values.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim("kernel arguments", x.len(), y.len())?;
    if matches!(spec, KernelSpec::Brownian { .. }) {
        check_dim("brownian kernel point dimension", 1, x.len())?;
    }
    Ok(spec.eval_unchecked(x, y))
}

/// Gram matrix `K[X]_{jk} = K(x_j, x_k)`.
pub fn gram(spec: &KernelSpec, x: &PointSet) -> Result<SymMatrix> {
    if matches!(spec, KernelSpec::Brownian { .. }) {
        check_dim("brownian kernel point dimension", 1, x.dim())?;
    }
    let rows = x.rows();
    let m = rows.len();
    let mut k = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in j..m {
            let v = spec.eval_unchecked(&rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    SymMatrix::new(k)
}

/// Cross Gram matrix `K(x¹_j, x²_k)`.
pub fn gram_cross(spec: &KernelSpec, x1: &PointSet, x2: &PointSet) -> Result<DMatrix<f64>> {
    check_dim("cross gram point dimension", x1.dim(), x2.dim())?;
    if matches!(spec, KernelSpec::Brownian { .. }) {
        check_dim("brownian kernel point dimension", 1, x1.dim())?;
    }
    let r1 = x1.rows();
    let r2 = x2.rows();
    Ok(DMatrix::from_fn(r1.len(), r2.len(), |j, k| {
        spec.eval_unchecked(&r1[j], &r2[k])
    }))
}

/// `m` i.i.d. uniform points on `[0,1]^d`.
pub fn sample_points(domain: DomainSpec, m: usize, stream: RngStream) -> Result<PointSet> {
    if m == 0 {
        return Err(CovError::InvalidParameter("number of points m must be >= 1".into()));
    }
    DomainSpec::new(domain.d)?;
    let mut rng = stream.rng();
    // row-major fill so that a point's coordinates are consecutive draws
    let mut data = Vec::with_capacity(m * domain.d);
    for _ in 0..m * domain.d {
        data.push(rng.random::<f64>());
    }
    PointSet::new(DMatrix::from_row_slice(m, domain.d, &data))
}

/// Draws paths of `GP(0, K)` on a fixed point set, reusing one Cholesky factor.
#[derive(Debug, Clone)]
pub struct PathSampler {
    /// `None` for the zero kernel, whose paths vanish identically.
    lower: Option<DMatrix<f64>>,
    jitter: f64,
    m: usize,
}

impl PathSampler {
    pub fn new(k: &SymMatrix) -> Result<Self> {
        let m = k.dim();
        if k.as_matrix().iter().all(|&v| v == 0.0) {
            return Ok(Self {
                lower: None,
                jitter: 0.0,
                m,
            });
        }
        let chol = chol_jitter(k)?;
        Ok(Self {
            lower: Some(chol.lower),
            jitter: chol.jitter,
            m,
        })
    }

    /// `Z = L G` with `L Lᵀ = K + εI` and `G` an `m × N` matrix of standard normals.
    pub fn sample(&self, n_paths: usize, stream: RngStream) -> Result<PathMatrix> {
        if n_paths == 0 {
            return Err(CovError::InvalidParameter("number of paths N must be >= 1".into()));
        }
        let Some(lower) = &self.lower else {
            return PathMatrix::new(DMatrix::zeros(self.m, n_paths));
        };
        let mut rng = stream.rng();
        let mut g = DMatrix::zeros(self.m, n_paths);
        // column-major: path j consumes draws j·m .. (j+1)·m
        for v in g.iter_mut() {
            *v = standard_normal(&mut rng);
        }
        let mut paths = PathMatrix::new(lower * g)?;
        paths.jitter = self.jitter;
        Ok(paths)
    }
}

/// One-shot form of [`PathSampler`].
pub fn sample_paths(k: &SymMatrix, n_paths: usize, stream: RngStream) -> Result<PathMatrix> {
    PathSampler::new(k)?.sample(n_paths, stream)
}

/// `K̂ = (1/N) Z Zᵀ`.
pub fn empirical_gram(z: &PathMatrix) -> SymMatrix {
    let zm = z.as_matrix();
    SymMatrix::symmetrized(zm * zm.transpose() / z.paths() as f64)
}

/// Exact LogHS / affine-invariant distance between regularized operators that
/// share eigenvectors, from their spectra:
/// `(Σ_k log²((γ + λ¹_k)/(γ + λ²_k)))^{1/2}`.
pub fn commuting_oracle(spectrum1: &[f64], spectrum2: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CovError::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    check_dim("oracle spectra length", spectrum1.len(), spectrum2.len())?;
    if let Some(v) = spectrum1.iter().chain(spectrum2).find(|v| v.is_nan() || **v < 0.0) {
        return Err(CovError::InvalidParameter(format!(
            "oracle spectra must be non-negative, got {v}"
        )));
    }
    let sum: f64 = spectrum1
        .iter()
        .zip(spectrum2)
        .map(|(a, b)| ((gamma + a) / (gamma + b)).ln().powi(2))
        .sum();
    Ok(sum.sqrt())
}

/// Leading `k_max` Mercer eigenvalues of `s²·min(x, y)` on `[0,1]`:
/// `λ_k = s²/((k − ½)²π²)`.
pub fn brownian_spectrum(variance: f64, k_max: usize) -> Vec<f64> {
    (1..=k_max)
        .map(|k| {
            let w = (k as f64 - 0.5) * PI;
            variance / (w * w)
        })
        .collect()
}

/// Upper bound on `Σ_{k > k_max} λ_k` for [`brownian_spectrum`].
pub fn brownian_tail_bound(variance: f64, k_max: usize) -> f64 {
    variance / (PI * PI * k_max as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_eigenvalues, DEFAULT_CLIP_TOL};
    use std::f64::consts::E;

    const LAP: KernelSpec = KernelSpec::Laplacian { a: 1.0 };

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_eval(&LAP, &[0.4], &[0.4]).unwrap(), 1.0);
        assert!((kernel_eval(&LAP, &[0.0], &[1.0]).unwrap() - 1.0 / E).abs() < 1e-16);
        let bm = KernelSpec::Brownian { variance: 1.0 };
        assert_eq!(kernel_eval(&bm, &[0.3], &[0.7]).unwrap(), 0.3);
        assert_eq!(kernel_eval(&bm, &[0.3], &[0.3]).unwrap(), 0.3);
        let se = KernelSpec::SquaredExponential { sigma: 0.1 };
        assert_eq!(kernel_eval(&se, &[0.2, 0.5], &[0.2, 0.5]).unwrap(), 1.0);
        assert!(kernel_eval(&LAP, &[0.0], &[0.0, 1.0]).is_err());
        assert!(kernel_eval(&bm, &[0.0, 0.1], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn kernel_validation() {
        let d1 = DomainSpec::new(1).unwrap();
        let d2 = DomainSpec::new(2).unwrap();
        assert!(LAP.validate(d2).is_ok());
        assert!(KernelSpec::Laplacian { a: 0.0 }.validate(d1).is_err());
        assert!(KernelSpec::SquaredExponential { sigma: -1.0 }.validate(d1).is_err());
        assert!(KernelSpec::Brownian { variance: 1.0 }.validate(d2).is_err());
        assert!(DomainSpec::new(0).is_err());
    }

    #[test]
    fn gram_examples() {
        let one = PointSet::new(DMatrix::from_element(1, 1, 0.3)).unwrap();
        let g = gram(&LAP, &one).unwrap();
        assert_eq!(g.dim(), 1);
        assert_eq!(g[(0, 0)], 1.0);

        let dup = PointSet::new(DMatrix::from_row_slice(3, 1, &[0.1, 0.5, 0.1])).unwrap();
        let g = gram(&LAP, &dup).unwrap();
        for k in 0..3 {
            assert_eq!(g[(0, k)], g[(2, k)]);
        }

        let x = sample_points(DomainSpec { d: 3 }, 12, RngStream::new(9)).unwrap();
        let g = gram(&LAP, &x).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let brute = kernel_eval(&LAP, &x.point(i), &x.point(j)).unwrap();
                assert!((g[(i, j)] - brute).abs() <= 1e-14);
            }
        }
        let y = sample_points(DomainSpec { d: 3 }, 5, RngStream::new(10)).unwrap();
        let c = gram_cross(&LAP, &x, &y).unwrap();
        assert_eq!((c.nrows(), c.ncols()), (12, 5));
        assert_eq!(c[(4, 2)], kernel_eval(&LAP, &x.point(4), &y.point(2)).unwrap());
    }

    #[test]
    fn grams_are_psd() {
        let specs = [
            (LAP, 2),
            (KernelSpec::Laplacian { a: 3.0 }, 5),
            (KernelSpec::SquaredExponential { sigma: 0.1 }, 1),
            (KernelSpec::SquaredExponential { sigma: 0.7 }, 2),
            (KernelSpec::Brownian { variance: 2.0 }, 1),
        ];
        for (i, (spec, d)) in specs.into_iter().enumerate() {
            let x = sample_points(DomainSpec { d }, 60, RngStream::new(i as u64)).unwrap();
            let vals = sym_eigenvalues(&gram(&spec, &x).unwrap()).unwrap();
            assert!(*vals.last().unwrap() >= -DEFAULT_CLIP_TOL * vals[0], "{spec:?}");
        }
    }

    #[test]
    fn point_sampling() {
        let dom = DomainSpec { d: 1 };
        let s = RngStream::new(3);
        assert_eq!(sample_points(dom, 10, s).unwrap(), sample_points(dom, 10, s).unwrap());
        let big = sample_points(dom, 1000, s).unwrap();
        let mean = big.as_matrix().mean();
        assert!((0.45..=0.55).contains(&mean));
        assert!(sample_points(dom, 0, s).is_err());
        assert!(PointSet::new(DMatrix::from_element(1, 1, 1.5)).is_err());
    }

    #[test]
    fn path_sampling() {
        let s = RngStream::new(4);
        let z = sample_paths(&SymMatrix::zeros(3), 5, s).unwrap();
        assert!(z.as_matrix().iter().all(|&v| v == 0.0));

        let x = sample_points(DomainSpec { d: 1 }, 20, s).unwrap();
        let k = gram(&LAP, &x).unwrap();
        let z1 = sample_paths(&k, 7, s).unwrap();
        let z2 = sample_paths(&k, 7, s).unwrap();
        assert_eq!(z1, z2);
        assert!(z1
            .as_matrix()
            .iter()
            .zip(z2.as_matrix().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));

        let m = 10;
        let z = sample_paths(&SymMatrix::identity(m), 10_000, s.derive(1)).unwrap();
        let c = empirical_gram(&z);
        let err = (c.as_matrix() - DMatrix::<f64>::identity(m, m)).norm() / (m as f64).sqrt();
        assert!(err <= 0.1, "{err}");
        assert!(sample_paths(&k, 0, s).is_err());
    }

    #[test]
    fn empirical_gram_examples() {
        let z = PathMatrix::new(DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5])).unwrap();
        let c = empirical_gram(&z);
        assert_eq!(c[(0, 1)], -2.0);
        assert_eq!(c[(1, 1)], 4.0);
        assert_eq!(c[(2, 0)], 0.5);
        let zero = PathMatrix::new(DMatrix::zeros(4, 3)).unwrap();
        assert_eq!(empirical_gram(&zero).frobenius_norm(), 0.0);
    }

    #[test]
    fn oracle_examples() {
        let s = [0.5, 0.2, 0.0];
        assert_eq!(commuting_oracle(&s, &s, 0.1).unwrap(), 0.0);
        assert!((commuting_oracle(&[3.0], &[1.0], 1.0).unwrap() - 2.0_f64.ln()).abs() < 1e-15);
        assert!(commuting_oracle(&[1.0], &[1.0], 0.0).is_err());
        assert!(commuting_oracle(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(commuting_oracle(&[-1.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn brownian_tail_bound_holds() {
        for k_max in [10, 100, 1000] {
            let head: f64 = brownian_spectrum(1.0, k_max).iter().sum();
            // Σ_k 1/((k−½)²π²) = 1/2, the trace of min(x, y) on [0, 1]
            let tail = 0.5 - head;
            assert!(tail <= brownian_tail_bound(1.0, k_max));
            assert!(tail > 0.0);
        }
    }

    #[test]
    fn kernel_spec_serde_shape() {
        let spec: KernelSpec = toml::from_str("family = \"laplacian\"\na = 1.2\n").unwrap();
        assert_eq!(spec, KernelSpec::Laplacian { a: 1.2 });
        let spec: KernelSpec = toml::from_str("family = \"brownian\"\nvariance = 4.0\n").unwrap();
        assert_eq!(spec, KernelSpec::Brownian { variance: 4.0 });
        assert!(toml::from_str::<KernelSpec>("family = \"laplacian\"\nsigma = 1.0\n").is_err());
    }
}
