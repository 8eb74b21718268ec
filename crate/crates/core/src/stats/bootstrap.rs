//! Confidence intervals by resampling annotators within each summary.
//!
//! Each iteration draws, for every row independently, `M` column indices
//! uniformly with replacement and rebuilds the row from them; rows are never
//! resampled. The statistic is evaluated on every resampled matrix and the
//! interval is read off the empirical `alpha/2` and `1 - alpha/2` percentiles.
//!
//! Iteration `t` draws from a stream keyed by `(seed, t)`, so the parallel
//! and sequential evaluations are bit-identical.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::{kendall_tau, pearson};
use super::describe::percentile;
use super::{ScoreMatrix, StatsError};
use crate::num::Scalar;
use crate::seeding::StreamKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi<T> {
    pub lower: T,
    pub upper: T,
    pub alpha: f64,
    pub iterations: usize,
    pub statistic_name: String,
    pub seed: u64,
}

impl<T: Scalar> BootstrapCi<T> {
    pub fn midpoint(&self) -> T {
        (self.lower + self.upper) / T::lit(2.0)
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, value: T) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            iterations: 1000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

pub const MIN_ITERATIONS: usize = 100;

impl BootstrapConfig {
    fn validate(&self) -> Result<(), StatsError> {
        if self.iterations < MIN_ITERATIONS {
            return Err(StatsError::Parameter(format!(
                "bootstrap needs at least {MIN_ITERATIONS} iterations, got {}",
                self.iterations
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(StatsError::Parameter(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// One annotator resample of `x` drawn from `rng`.
pub fn resample_annotators<T: Scalar, R: Rng + ?Sized>(x: &ScoreMatrix<T>, rng: &mut R) -> ScoreMatrix<T> {
    let m = x.n_cols();
    let mut values = Vec::with_capacity(x.values().len());
    for row in x.rows() {
        for _ in 0..m {
            values.push(row[rng.gen_range(0..m)]);
        }
    }
    ScoreMatrix::from_raw(values, x.n_rows(), m)
}

/// The `iterations` statistic values, in iteration order.
pub fn bootstrap_samples<T, F>(
    x: &ScoreMatrix<T>,
    statistic: F,
    iterations: usize,
    seed: u64,
) -> Result<Vec<T>, StatsError>
where
    T: Scalar,
    F: Fn(&ScoreMatrix<T>) -> Result<T, StatsError> + Sync,
{
    let results: Vec<Result<T, StatsError>> = (0..iterations)
        .into_par_iter()
        .map(|iteration| {
            let mut rng = StreamKey::new("bootstrap").u64(seed).u64(iteration as u64).rng();
            let resampled = resample_annotators(x, &mut rng);
            statistic(&resampled).map_err(|e| StatsError::Resample {
                iteration,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

pub fn bootstrap_ci<T, F>(
    x: &ScoreMatrix<T>,
    statistic_name: &str,
    statistic: F,
    config: &BootstrapConfig,
) -> Result<BootstrapCi<T>, StatsError>
where
    T: Scalar,
    F: Fn(&ScoreMatrix<T>) -> Result<T, StatsError> + Sync,
{
    config.validate()?;
    let mut samples = bootstrap_samples(x, statistic, config.iterations, config.seed)?;
    samples.sort_by(|a, b| a.partial_cmp(b).expect("statistic returned NaN"));
    let half = config.alpha / 2.0 * 100.0;
    Ok(BootstrapCi {
        lower: percentile(&samples, half)?,
        upper: percentile(&samples, 100.0 - half)?,
        alpha: config.alpha,
        iterations: config.iterations,
        statistic_name: statistic_name.to_string(),
        seed: config.seed,
    })
}

/// Interval for a system's mean score (mean over summaries of the mean over
/// annotators). `x` holds only that system's rows.
pub fn mean_system_ci<T: Scalar>(x: &ScoreMatrix<T>, config: &BootstrapConfig) -> Result<BootstrapCi<T>, StatsError> {
    bootstrap_ci(x, "mean", |xs| Ok(xs.mean_of_row_means()), config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Kendall,
}

impl CorrelationMethod {
    pub fn name(self) -> &'static str {
        match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Kendall => "kendall",
        }
    }

    pub fn compute<T: Scalar>(self, a: &[T], b: &[T]) -> Result<T, StatsError> {
        match self {
            CorrelationMethod::Pearson => pearson(a, b),
            CorrelationMethod::Kendall => kendall_tau(a, b),
        }
    }
}

/// Interval for the correlation between per-summary human scores (mean over
/// annotators) and an automatic metric; `metric[i]` pairs with row `i`.
pub fn metric_correlation_ci<T: Scalar>(
    x: &ScoreMatrix<T>,
    metric: &[T],
    method: CorrelationMethod,
    config: &BootstrapConfig,
) -> Result<BootstrapCi<T>, StatsError> {
    if metric.len() != x.n_rows() {
        return Err(StatsError::LengthMismatch(x.n_rows(), metric.len()));
    }
    let first = metric[0];
    if metric.iter().all(|&v| v == first) {
        return Err(StatsError::UndefinedCorrelation("metric vector"));
    }
    bootstrap_ci(
        x,
        method.name(),
        |xs| method.compute(&xs.row_means(), metric),
        config,
    )
}
