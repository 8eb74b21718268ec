//! Statistics over annotation data.

mod agreement;
mod bootstrap;
mod correlation;
mod describe;
mod learning;
mod partial;
mod perturbation;

use thiserror::Error;

use crate::num::Scalar;

pub use agreement::{agreement_report, all_agree_fraction, fine_label_table, fleiss_kappa, randolph_kappa, AgreementReport, LabelTable};
pub use bootstrap::{
    bootstrap_ci, bootstrap_samples, mean_system_ci, metric_correlation_ci, resample_annotators, BootstrapCi,
    BootstrapConfig, CorrelationMethod,
};
pub use correlation::{kendall_tau, pearson};
pub use describe::{interannotator_stddev, mean, median, percentile, stddev, StddevDenominator};
pub use learning::{learning_curve, LearningPoint};
pub use partial::{partial_annotation_curve, FullFineAnnotations, PartialCurveConfig, PartialCurvePoint, Percentiles, SummaryLabels};
pub use perturbation::{perturbation_report, GoldLabel, PerturbationConfig, PerturbationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined: {0} has zero variance")]
    UndefinedCorrelation(&'static str),
    #[error("need at least {needed} annotator columns, have {have}")]
    TooFewColumns { needed: usize, have: usize },
    #[error("ragged table: row {row} has {len} entries, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
    #[error("label {label} at row {row} outside 0..{categories}")]
    Category { row: usize, label: usize, categories: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("statistic failed on bootstrap iteration {iteration}: {source}")]
    Resample {
        iteration: usize,
        #[source]
        source: Box<StatsError>,
    },
    #[error("statistic failed: {0}")]
    Statistic(String),
    #[error("missing gold label for summary {summary_id} unit {unit_index}")]
    MissingGold { summary_id: String, unit_index: usize },
    #[error("summary {0}: {1}")]
    Summary(String, String),
}

/// Dense, complete `N x M` matrix: rows are summaries, columns annotator slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T> {
    values: Vec<T>,
    n_rows: usize,
    n_cols: usize,
}

impl<T: Scalar> ScoreMatrix<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, StatsError> {
        let n_cols = rows.first().map(Vec::len).ok_or(StatsError::Empty)?;
        if n_cols == 0 {
            return Err(StatsError::Empty);
        }
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(StatsError::Ragged {
                    row,
                    len: r.len(),
                    expected: n_cols,
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(StatsError::Parameter(format!("row {row} has a non-finite value")));
            }
            values.extend_from_slice(r);
        }
        Ok(ScoreMatrix {
            values,
            n_rows: rows.len(),
            n_cols,
        })
    }

    pub(crate) fn from_raw(values: Vec<T>, n_rows: usize, n_cols: usize) -> Self {
        debug_assert_eq!(values.len(), n_rows * n_cols);
        ScoreMatrix { values, n_rows, n_cols }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks(self.n_cols)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n_cols + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row_means(&self) -> Vec<T> {
        let m = T::from_count(self.n_cols);
        self.rows().map(|r| r.iter().copied().sum::<T>() / m).collect()
    }

    /// Mean over rows of the per-row mean.
    pub fn mean_of_row_means(&self) -> T {
        let means = self.row_means();
        means.iter().copied().sum::<T>() / T::from_count(means.len())
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        ScoreMatrix::from_raw(values, rows.len(), self.n_cols)
    }
}
