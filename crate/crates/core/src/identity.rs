//! Randomized check of the factor identities against direct computation in
//! the ambient space.

use nalgebra::DMatrix;
use rand::Rng;

use crate::distances::{dist_aihs, dist_loghs, RegularizedOperator};
use crate::error::Result;
use crate::linalg::{spd_func, MatrixFunction, SymMatrix, DEFAULT_CLIP_TOL};
use crate::rkhs::{aihs_from_factors, log_from_factor, loghs_from_factors, FeatureFactor};
use crate::rng::{standard_normal, RngStream};

pub const LOG_FACTOR_TOL: f64 = 1e-10;
pub const LOGHS_FACTOR_TOL: f64 = 1e-8;
pub const AIHS_FACTOR_TOL: f64 = 1e-6;

type LogFn = fn(&FeatureFactor) -> Result<SymMatrix>;
type DistFn = fn(&FeatureFactor, f64, &FeatureFactor, f64) -> Result<f64>;

/// The implementations under test; swapped out to check that the suite
/// catches a broken one.
#[derive(Clone, Copy)]
pub struct FactorIdentities {
    pub log_from_factor: LogFn,
    pub loghs_from_factors: DistFn,
    pub aihs_from_factors: DistFn,
}

impl Default for FactorIdentities {
    fn default() -> Self {
        Self {
            log_from_factor,
            loghs_from_factors,
            aihs_from_factors,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResult {
    pub name: &'static str,
    pub tolerance: f64,
    /// Largest relative deviation seen; infinite if an evaluation failed.
    pub max_deviation: f64,
    pub worst_trial: usize,
}

impl IdentityResult {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub seed: u64,
    pub trials: usize,
    pub results: Vec<IdentityResult>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(IdentityResult::passed)
    }
}

struct Case {
    f1: FeatureFactor,
    f2: FeatureFactor,
    gamma1: f64,
    gamma2: f64,
}

fn random_case(stream: RngStream) -> Result<Case> {
    let mut rng = stream.rng();
    let n = rng.random_range(4..=24);
    let p1 = rng.random_range(1..=6);
    let p2 = rng.random_range(1..=6);
    let gamma1 = 10f64.powf(rng.random_range(-1.3..0.7));
    let gamma2 = 10f64.powf(rng.random_range(-1.3..0.7));
    let mut factor = |p: usize| {
        let data: Vec<f64> = (0..n * p).map(|_| standard_normal(&mut rng)).collect();
        FeatureFactor::new(DMatrix::from_vec(n, p, data))
    };
    Ok(Case {
        f1: factor(p1)?,
        f2: factor(p2)?,
        gamma1,
        gamma2,
    })
}

fn relative(value: Result<f64>, reference: f64) -> f64 {
    match value {
        Ok(v) if v.is_finite() => (v - reference).abs() / reference.abs().max(f64::MIN_POSITIVE),
        _ => f64::INFINITY,
    }
}

fn track(result: &mut IdentityResult, trial: usize, deviation: f64) {
    let deviation = if deviation.is_nan() { f64::INFINITY } else { deviation };
    if deviation > result.max_deviation {
        result.max_deviation = deviation;
        result.worst_trial = trial;
    }
}

/// Runs `trials` random cases; trial `t` draws from `RngStream(seed).derive(t)`.
pub fn run_identity_check(seed: u64, trials: usize, impls: &FactorIdentities) -> Result<IdentityReport> {
    let mut results = [
        ("log_from_factor", LOG_FACTOR_TOL),
        ("loghs_from_factors", LOGHS_FACTOR_TOL),
        ("aihs_from_factors", AIHS_FACTOR_TOL),
    ]
    .map(|(name, tolerance)| IdentityResult {
        name,
        tolerance,
        max_deviation: 0.0,
        worst_trial: 0,
    });
    let base = RngStream::new(seed);
    for trial in 0..trials {
        let case = random_case(base.derive(trial as u64))?;
        let c1 = case.f1.covariance();
        let c2 = case.f2.covariance();

        let direct = spd_func(&c1.shifted(1.0), MatrixFunction::Log, DEFAULT_CLIP_TOL)?;
        let deviation = match (impls.log_from_factor)(&case.f1) {
            Ok(l) => (l.as_matrix() - direct.as_matrix()).norm() / direct.frobenius_norm().max(1.0),
            Err(_) => f64::INFINITY,
        };
        track(&mut results[0], trial, deviation);

        let p = RegularizedOperator::new(c1, case.gamma1)?;
        let q = RegularizedOperator::new(c2, case.gamma2)?;
        let loghs = (impls.loghs_from_factors)(&case.f1, case.gamma1, &case.f2, case.gamma2);
        track(&mut results[1], trial, relative(loghs, dist_loghs(&p, &q)?));
        let aihs = (impls.aihs_from_factors)(&case.f1, case.gamma1, &case.f2, case.gamma2);
        track(&mut results[2], trial, relative(aihs, dist_aihs(&p, &q)?));
    }
    Ok(IdentityReport {
        seed,
        trials,
        results: results.to_vec(),
    })
}
