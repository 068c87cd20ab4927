//! Finite-sample estimation of distances between Gaussian processes:
//! convergence runs over the number of sample paths and nearest-neighbour
//! classification of empirical covariance matrices.
//!
//! Every trial or repeat draws from its own stream `RngStream(base_seed)
//! .derive(trial)`, so results do not depend on the number of worker threads.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distances::{metric_distance, Metric, RegularizedOperator};
use crate::error::{check_dim, CovError, Result};
use crate::kernels::{
    brownian_spectrum, commuting_oracle, empirical_gram, gram, sample_points, DomainSpec, KernelSpec, PathMatrix,
    PathSampler,
};
use crate::linalg::SymMatrix;
use crate::rng::RngStream;

const POINTS_LABEL: u64 = 0;
const PATHS_LABEL: u64 = 1;

/// How the reference value of a convergence row is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// Closed form from the Mercer spectra (Brownian kernels only).
    Oracle,
    /// The same trial's estimate at the largest path count.
    #[default]
    Largest,
}

impl Reference {
    pub fn name(self) -> &'static str {
        match self {
            Reference::Oracle => "oracle",
            Reference::Largest => "largest",
        }
    }
}

fn default_domain() -> DomainSpec {
    DomainSpec { d: 1 }
}

fn default_convergence_id() -> String {
    "convergence".into()
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_convergence_id")]
    pub experiment: String,
    pub kernel1: KernelSpec,
    pub kernel2: KernelSpec,
    #[serde(default = "default_domain")]
    pub domain: DomainSpec,
    pub m: usize,
    pub path_counts: Vec<usize>,
    pub gamma: f64,
    pub metrics: Vec<Metric>,
    #[serde(default = "default_epsilon")]
    pub epsilon_sinkhorn: f64,
    #[serde(default = "default_one")]
    pub trials: usize,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub base_seed: u64,
    /// Fill `wall_time_ms`; off by default so that outputs are reproducible byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn check_metrics(metrics: &[Metric], errors: &mut Vec<String>) {
    if metrics.is_empty() {
        errors.push("metrics: must list at least one metric".into());
    }
    for (i, m) in metrics.iter().enumerate() {
        if metrics[..i].contains(m) {
            errors.push(format!("metrics: {m} listed twice"));
        }
    }
}

fn check_positive(name: &str, value: f64, errors: &mut Vec<String>) {
    if !(value > 0.0 && value.is_finite()) {
        errors.push(format!("{name}: must be > 0, got {value}"));
    }
}

fn check_count(name: &str, value: usize, errors: &mut Vec<String>) {
    if value == 0 {
        errors.push(format!("{name}: must be >= 1"));
    }
}

impl ConvergenceConfig {
    /// All violations, one message per field.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.experiment.is_empty() || self.experiment.contains([',', '"', '\n']) {
            errors.push(format!(
                "experiment: must be a non-empty identifier without commas or quotes, got {:?}",
                self.experiment
            ));
        }
        if self.domain.d == 0 {
            errors.push("domain.d: must be >= 1".into());
        }
        for (name, k) in [("kernel1", &self.kernel1), ("kernel2", &self.kernel2)] {
            if let Err(e) = k.validate(self.domain) {
                errors.push(format!("{name}: {e}"));
            }
        }
        check_count("m", self.m, &mut errors);
        if self.path_counts.is_empty() {
            errors.push("path_counts: must be non-empty".into());
        } else if self.path_counts.contains(&0) {
            errors.push("path_counts: every N must be >= 1".into());
        } else if self.path_counts.windows(2).any(|w| w[0] >= w[1]) {
            errors.push(format!(
                "path_counts: must be strictly ascending, got {:?}",
                self.path_counts
            ));
        }
        check_positive("gamma", self.gamma, &mut errors);
        check_metrics(&self.metrics, &mut errors);
        check_positive("epsilon_sinkhorn", self.epsilon_sinkhorn, &mut errors);
        check_count("trials", self.trials, &mut errors);
        if self.reference == Reference::Oracle {
            let brownian = |k: &KernelSpec| matches!(k, KernelSpec::Brownian { .. });
            if !(brownian(&self.kernel1) && brownian(&self.kernel2)) {
                errors.push("reference: oracle requires brownian kernel1 and kernel2".into());
            }
            if self.metrics.contains(&Metric::Sinkhorn) {
                errors.push("reference: no oracle value for metric sinkhorn".into());
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CovError::Config(errors))
        }
    }
}

fn default_classification_id() -> String {
    "classification".into()
}

fn default_m() -> usize {
    200
}

fn default_paths() -> usize {
    500
}

fn default_train() -> usize {
    5
}

fn default_test() -> usize {
    50
}

fn default_repeats() -> usize {
    5
}

fn default_gamma() -> f64 {
    1e-9
}

fn default_class_metrics() -> Vec<Metric> {
    vec![Metric::Hs, Metric::Bw, Metric::Sinkhorn, Metric::Loghs, Metric::Aihs]
}

/// Two classes of centered processes with Laplacian kernels
/// `exp(−σ_c‖x − y‖)` on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationConfig {
    #[serde(default = "default_classification_id")]
    pub experiment: String,
    pub sigma1: f64,
    pub sigma2: f64,
    #[serde(default = "default_one")]
    pub d: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    /// Sample paths per empirical covariance.
    #[serde(default = "default_paths", rename = "N")]
    pub n_paths: usize,
    #[serde(default = "default_train")]
    pub train_per_class: usize,
    #[serde(default = "default_test")]
    pub test_per_class: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon_sinkhorn: f64,
    #[serde(default = "default_class_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub base_seed: u64,
}

impl ClassificationConfig {
    /// Defaults for everything but the two kernel rates.
    pub fn with_rates(sigma1: f64, sigma2: f64) -> Self {
        Self {
            experiment: default_classification_id(),
            sigma1,
            sigma2,
            d: 1,
            m: default_m(),
            n_paths: default_paths(),
            train_per_class: default_train(),
            test_per_class: default_test(),
            repeats: default_repeats(),
            gamma: default_gamma(),
            epsilon_sinkhorn: default_epsilon(),
            metrics: default_class_metrics(),
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        check_positive("sigma1", self.sigma1, &mut errors);
        check_positive("sigma2", self.sigma2, &mut errors);
        check_count("d", self.d, &mut errors);
        check_count("m", self.m, &mut errors);
        check_count("N", self.n_paths, &mut errors);
        check_count("train_per_class", self.train_per_class, &mut errors);
        check_count("test_per_class", self.test_per_class, &mut errors);
        check_count("repeats", self.repeats, &mut errors);
        check_positive("gamma", self.gamma, &mut errors);
        check_positive("epsilon_sinkhorn", self.epsilon_sinkhorn, &mut errors);
        check_metrics(&self.metrics, &mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CovError::Config(errors))
        }
    }

    fn kernels(&self) -> [KernelSpec; 2] {
        [
            KernelSpec::Laplacian { a: self.sigma1 },
            KernelSpec::Laplacian { a: self.sigma2 },
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub trial: usize,
    pub n: usize,
    pub m: usize,
    pub metric: Metric,
    pub estimate: f64,
    pub reference: Option<f64>,
    pub abs_error: Option<f64>,
    pub wall_time_ms: Option<f64>,
}

/// `(1/m)·K̂` regularized by `γ`, with `K̂ = (1/N) Z Zᵀ`.
pub fn operator_from_paths(z: &PathMatrix, gamma: f64) -> Result<RegularizedOperator> {
    let k_hat = empirical_gram(z);
    RegularizedOperator::new(k_hat.scaled(1.0 / z.points() as f64), gamma)
}

/// Distance between `((1/m)K̂¹, γ)` and `((1/m)K̂², γ)` for paths on a common
/// point set. `epsilon` is only used by the Sinkhorn divergence.
pub fn estimate_distance_from_paths(
    z1: &PathMatrix,
    z2: &PathMatrix,
    gamma: f64,
    metric: Metric,
    epsilon: f64,
) -> Result<f64> {
    check_dim("path matrices must share the point set", z1.points(), z2.points())?;
    metric_distance(
        metric,
        &operator_from_paths(z1, gamma)?,
        &operator_from_paths(z2, gamma)?,
        epsilon,
    )
}

fn brownian_variance(k: &KernelSpec) -> Option<f64> {
    match *k {
        KernelSpec::Brownian { variance } => Some(variance),
        _ => None,
    }
}

/// Upper limit on the number of Mercer terms summed by [`brownian_oracle`].
pub const ORACLE_MAX_TERMS: usize = 10_000_000;

/// Population distance between the covariance operators of `s₁²·min(x,y)`
/// and `s₂²·min(x,y)` on `[0,1]` (`variance1 = s₁²`, `variance2 = s₂²`).
///
/// `hs`, `sqrt` and `bw` have exact sums; `loghs` and `aihs` coincide because
/// the operators commute and are summed over enough terms that the neglected
/// tail, at most `((s₁² − s₂²)/γ)²/(3π⁴K³)`, is below `1e-10` (capped at
/// [`ORACLE_MAX_TERMS`]).
pub fn brownian_oracle(metric: Metric, variance1: f64, variance2: f64, gamma: f64) -> Result<f64> {
    for v in [variance1, variance2] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CovError::InvalidParameter(format!(
                "brownian variance must be > 0, got {v}"
            )));
        }
    }
    match metric {
        // Σ_k 1/((k−½)π)⁴ = 1/6 and Σ_k 1/((k−½)π)² = 1/2
        Metric::Hs => Ok((variance1 - variance2).abs() / 6f64.sqrt()),
        Metric::Sqrt | Metric::Bw => Ok((variance1.sqrt() - variance2.sqrt()).abs() / 2f64.sqrt()),
        Metric::Loghs | Metric::Aihs => {
            let diff = (variance1 - variance2) / gamma;
            let pi4 = std::f64::consts::PI.powi(4);
            let terms = (diff * diff / (3.0 * pi4 * 1e-10)).cbrt().ceil();
            let terms = if terms.is_finite() {
                (terms as usize).clamp(1000, ORACLE_MAX_TERMS)
            } else {
                ORACLE_MAX_TERMS
            };
            commuting_oracle(
                &brownian_spectrum(variance1, terms),
                &brownian_spectrum(variance2, terms),
                gamma,
            )
        }
        Metric::Sinkhorn => Err(CovError::InvalidParameter("no oracle value for metric sinkhorn".into())),
    }
}

fn timed<T>(record: bool, f: impl FnOnce() -> Result<T>) -> Result<(T, Option<f64>)> {
    let start = record.then(Instant::now);
    let value = f()?;
    Ok((value, start.map(|s| s.elapsed().as_secs_f64() * 1e3)))
}

fn convergence_trial(cfg: &ConvergenceConfig, trial: usize, oracle: &[Option<f64>]) -> Result<Vec<ResultRow>> {
    let stream = RngStream::new(cfg.base_seed).derive(trial as u64);
    let x = sample_points(cfg.domain, cfg.m, stream.derive(POINTS_LABEL))?;
    let samplers = [
        PathSampler::new(&gram(&cfg.kernel1, &x)?)?,
        PathSampler::new(&gram(&cfg.kernel2, &x)?)?,
    ];
    let paths = stream.derive(PATHS_LABEL);
    let mut rows = Vec::with_capacity(cfg.path_counts.len() * cfg.metrics.len());
    for &n in &cfg.path_counts {
        let at_n = paths.derive(n as u64);
        let p = operator_from_paths(&samplers[0].sample(n, at_n.derive(0))?, cfg.gamma)?;
        let q = operator_from_paths(&samplers[1].sample(n, at_n.derive(1))?, cfg.gamma)?;
        for (k, &metric) in cfg.metrics.iter().enumerate() {
            let (estimate, wall_time_ms) = timed(cfg.record_wall_time, || {
                metric_distance(metric, &p, &q, cfg.epsilon_sinkhorn)
            })?;
            rows.push(ResultRow {
                experiment: cfg.experiment.clone(),
                trial,
                n,
                m: cfg.m,
                metric,
                estimate,
                reference: oracle[k],
                abs_error: None,
                wall_time_ms,
            });
        }
    }
    if cfg.reference == Reference::Largest {
        let metrics = cfg.metrics.len();
        let last = rows.len() - metrics;
        for k in 0..metrics {
            let reference = rows[last + k].estimate;
            for row in rows.iter_mut().skip(k).step_by(metrics) {
                row.reference = Some(reference);
            }
        }
    }
    for row in &mut rows {
        row.abs_error = row.reference.map(|r| (row.estimate - r).abs());
    }
    Ok(rows)
}

/// For each trial (fresh points) and each `N` (fresh paths), the estimate of
/// every configured metric. Rows are ordered by trial, then `N`, then the
/// configured metric order.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let oracle: Vec<Option<f64>> = match cfg.reference {
        Reference::Oracle => {
            let v1 = brownian_variance(&cfg.kernel1).expect("validated");
            let v2 = brownian_variance(&cfg.kernel2).expect("validated");
            cfg.metrics
                .iter()
                .map(|&metric| brownian_oracle(metric, v1, v2, cfg.gamma).map(Some))
                .collect::<Result<_>>()?
        }
        Reference::Largest => vec![None; cfg.metrics.len()],
    };
    let per_trial: Vec<Vec<ResultRow>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| convergence_trial(cfg, trial, &oracle))
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

/// Per-`N` trial means of one metric's rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryPoint {
    pub n: usize,
    pub trials: usize,
    pub mean_estimate: f64,
    pub mean_abs_error: Option<f64>,
}

/// Rows must belong to one metric; points are returned in ascending `N`.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryPoint> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let at: Vec<&ResultRow> = rows.iter().filter(|r| r.n == n).collect();
            let count = at.len() as f64;
            let errors: Vec<f64> = at.iter().filter_map(|r| r.abs_error).collect();
            SummaryPoint {
                n,
                trials: at.len(),
                mean_estimate: at.iter().map(|r| r.estimate).sum::<f64>() / count,
                mean_abs_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
            }
        })
        .collect()
}

/// Least-squares slope of `log(mean abs_error)` against `log N` over the
/// rows of one metric. Path counts whose mean error is zero (the reference
/// itself) are skipped.
pub fn fit_loglog_slope(rows: &[ResultRow]) -> Result<f64> {
    let points: Vec<(f64, f64)> = summarize(rows)
        .into_iter()
        .filter_map(|p| match p.mean_abs_error {
            Some(e) if e > 0.0 => Some(((p.n as f64).ln(), e.ln())),
            _ => None,
        })
        .collect();
    if points.len() < 3 {
        return Err(CovError::InsufficientData(format!(
            "slope fit needs at least 3 path counts with positive mean error, got {}",
            points.len()
        )));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Counts indexed `[true][predicted]`.
pub type Confusion = Vec<Vec<usize>>;

#[derive(Debug, Clone, PartialEq)]
pub struct NnOutcome {
    pub predicted: Vec<usize>,
    pub confusion: Confusion,
}

impl NnOutcome {
    pub fn error_rate(&self) -> f64 {
        let total: usize = self.confusion.iter().flatten().sum();
        let correct: usize = (0..self.confusion.len()).map(|c| self.confusion[c][c]).sum();
        (total - correct) as f64 / total as f64
    }
}

/// 1-nearest-neighbour labels under an arbitrary dissimilarity; ties go to
/// the lowest training index. Labels are class indices `0..C`.
pub fn nn_classify_by<T: Sync>(
    train: &[(T, usize)],
    test: &[(T, usize)],
    dist: impl Fn(&T, &T) -> Result<f64> + Sync,
) -> Result<NnOutcome> {
    if train.is_empty() {
        return Err(CovError::InsufficientData("training set is empty".into()));
    }
    let predicted: Vec<usize> = test
        .par_iter()
        .map(|(item, _)| {
            let mut best = (f64::INFINITY, train[0].1);
            for (candidate, label) in train {
                let d = dist(item, candidate)?;
                if d.is_nan() {
                    return Err(CovError::NonFinite("nearest-neighbour distance"));
                }
                if d < best.0 {
                    best = (d, *label);
                }
            }
            Ok(best.1)
        })
        .collect::<Result<_>>()?;
    let classes = train.iter().chain(test).map(|(_, l)| l + 1).max().unwrap_or(0);
    let mut confusion = vec![vec![0; classes]; classes];
    for ((_, truth), &p) in test.iter().zip(&predicted) {
        confusion[*truth][p] += 1;
    }
    Ok(NnOutcome { predicted, confusion })
}

/// 1-nearest-neighbour classification of prepared covariances under `metric`.
pub fn nn_classify(
    train: &[(RegularizedOperator, usize)],
    test: &[(RegularizedOperator, usize)],
    metric: Metric,
    epsilon: f64,
) -> Result<NnOutcome> {
    nn_classify_by(train, test, |a, b| metric_distance(metric, a, b, epsilon))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricErrors {
    pub metric: Metric,
    /// Test error of every repeat.
    pub errors: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 for one repeat.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationOutcome {
    pub table: Vec<MetricErrors>,
    /// `confusions[k][r]` for metric `k` of the config and repeat `r`.
    pub confusions: Vec<Vec<Confusion>>,
}

fn classification_repeat(cfg: &ClassificationConfig, repeat: usize) -> Result<Vec<NnOutcome>> {
    let stream = RngStream::new(cfg.base_seed).derive(repeat as u64);
    let x = sample_points(DomainSpec::new(cfg.d)?, cfg.m, stream.derive(POINTS_LABEL))?;
    let paths = stream.derive(PATHS_LABEL);
    let per_class = cfg.train_per_class + cfg.test_per_class;
    let mut train = Vec::with_capacity(2 * cfg.train_per_class);
    let mut test = Vec::with_capacity(2 * cfg.test_per_class);
    for (class, kernel) in cfg.kernels().iter().enumerate() {
        let sampler = PathSampler::new(&gram(kernel, &x)?)?;
        let class_stream = paths.derive(class as u64);
        let items: Vec<RegularizedOperator> = (0..per_class)
            .into_par_iter()
            .map(|j| {
                let z = sampler.sample(cfg.n_paths, class_stream.derive(j as u64))?;
                operator_from_paths(&z, cfg.gamma)
            })
            .collect::<Result<_>>()?;
        for (j, op) in items.into_iter().enumerate() {
            if j < cfg.train_per_class {
                train.push((op, class));
            } else {
                test.push((op, class));
            }
        }
    }
    cfg.metrics
        .iter()
        .map(|&metric| nn_classify(&train, &test, metric, cfg.epsilon_sinkhorn))
        .collect()
}

/// Repeated 1-NN classification between the two Laplacian-kernel classes.
/// Within a repeat all empirical covariances share one point set, each from
/// its own `N` paths.
pub fn run_classification(cfg: &ClassificationConfig) -> Result<ClassificationOutcome> {
    cfg.validate()?;
    let repeats: Vec<Vec<NnOutcome>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| classification_repeat(cfg, r))
        .collect::<Result<_>>()?;
    let mut table = Vec::with_capacity(cfg.metrics.len());
    let mut confusions = Vec::with_capacity(cfg.metrics.len());
    for (k, &metric) in cfg.metrics.iter().enumerate() {
        let errors: Vec<f64> = repeats.iter().map(|r| r[k].error_rate()).collect();
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let std = if errors.len() > 1 {
            (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        table.push(MetricErrors {
            metric,
            errors,
            mean,
            std,
        });
        confusions.push(repeats.iter().map(|r| r[k].confusion.clone()).collect());
    }
    Ok(ClassificationOutcome { table, confusions })
}

/// `(1/m)·K[X]` regularized by `γ`, the finite-covariance estimate of the
/// operator `C_K + γI` from points alone.
pub fn operator_from_gram(k: &SymMatrix, gamma: f64) -> Result<RegularizedOperator> {
    RegularizedOperator::new(k.scaled(1.0 / k.dim() as f64), gamma)
}

fn default_oracle_id() -> String {
    "oracle".into()
}

/// Gram-matrix estimates of distances between two Brownian covariance
/// operators, compared with their closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_oracle_id")]
    pub experiment: String,
    pub variance1: f64,
    pub variance2: f64,
    pub m: usize,
    pub gamma: f64,
    pub metrics: Vec<Metric>,
    #[serde(default = "default_one")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        check_positive("variance1", self.variance1, &mut errors);
        check_positive("variance2", self.variance2, &mut errors);
        check_count("m", self.m, &mut errors);
        check_positive("gamma", self.gamma, &mut errors);
        check_metrics(&self.metrics, &mut errors);
        if self.metrics.contains(&Metric::Sinkhorn) {
            errors.push("metrics: no oracle value for metric sinkhorn".into());
        }
        check_count("trials", self.trials, &mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CovError::Config(errors))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub experiment: String,
    pub trial: usize,
    pub m: usize,
    pub metric: Metric,
    pub estimate: f64,
    pub oracle: f64,
    pub rel_error: f64,
}

/// For each trial, `m` uniform points on `[0,1]` and the distance between
/// `(1/m)·K₁[X]` and `(1/m)·K₂[X]`; rows ordered by trial, then metric.
pub fn run_gram_oracle(cfg: &OracleConfig) -> Result<Vec<OracleRow>> {
    cfg.validate()?;
    let oracle: Vec<f64> = cfg
        .metrics
        .iter()
        .map(|&metric| brownian_oracle(metric, cfg.variance1, cfg.variance2, cfg.gamma))
        .collect::<Result<_>>()?;
    let trials: Vec<Vec<OracleRow>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let stream = RngStream::new(cfg.base_seed).derive(trial as u64);
            let x = sample_points(DomainSpec { d: 1 }, cfg.m, stream.derive(POINTS_LABEL))?;
            let p = operator_from_gram(
                &gram(
                    &KernelSpec::Brownian {
                        variance: cfg.variance1,
                    },
                    &x,
                )?,
                cfg.gamma,
            )?;
            let q = operator_from_gram(
                &gram(
                    &KernelSpec::Brownian {
                        variance: cfg.variance2,
                    },
                    &x,
                )?,
                cfg.gamma,
            )?;
            cfg.metrics
                .iter()
                .zip(&oracle)
                .map(|(&metric, &reference)| {
                    let estimate = metric_distance(metric, &p, &q, 0.0)?;
                    Ok(OracleRow {
                        experiment: cfg.experiment.clone(),
                        trial,
                        m: cfg.m,
                        metric,
                        estimate,
                        oracle: reference,
                        rel_error: (estimate - reference).abs() / reference.abs().max(f64::MIN_POSITIVE),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(trials.into_iter().flatten().collect())
}
