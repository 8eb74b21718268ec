//! How well does judging a random fraction of units track full annotation?
//!
//! For each fraction and each of `n_subsets` seeded draws, every annotator
//! slot gets its own random unit subset (the same sampler used for live
//! assignments), summary scores are recomputed from those subsets only, and
//! the draw is summarized by Kendall's tau against the full-annotation
//! scores and by the inter-annotator standard deviation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::kendall_tau;
use super::describe::{interannotator_stddev, mean, percentile, StddevDenominator};
use super::{ScoreMatrix, StatsError};
use crate::assign::sample_positions;
use crate::judgments::FineJudgment;
use crate::seeding::StreamKey;

/// Complete labels for one summary, `labels[slot][unit]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLabels {
    pub summary_id: String,
    pub labels: Vec<Vec<u8>>,
}

impl SummaryLabels {
    fn n_units(&self) -> usize {
        self.labels[0].len()
    }
}

/// Every unit of every summary judged by every slot.
#[derive(Debug, Clone, PartialEq)]
pub struct FullFineAnnotations {
    summaries: Vec<SummaryLabels>,
    n_slots: usize,
}

impl FullFineAnnotations {
    pub fn new(summaries: Vec<SummaryLabels>) -> Result<Self, StatsError> {
        let n_slots = summaries
            .first()
            .map(|s| s.labels.len())
            .ok_or(StatsError::Empty)?;
        for s in &summaries {
            if s.labels.len() != n_slots || n_slots == 0 {
                return Err(StatsError::Summary(
                    s.summary_id.clone(),
                    format!("{} slots, expected {n_slots}", s.labels.len()),
                ));
            }
            let n = s.labels[0].len();
            if n == 0 || s.labels.iter().any(|l| l.len() != n) {
                return Err(StatsError::Summary(
                    s.summary_id.clone(),
                    "slots must judge the same, non-empty set of units".into(),
                ));
            }
            if s.labels.iter().flatten().any(|&l| l > 1) {
                return Err(StatsError::Summary(s.summary_id.clone(), "labels must be 0 or 1".into()));
            }
        }
        Ok(FullFineAnnotations { summaries, n_slots })
    }

    /// Groups effective judgments by summary and slot. Fails if any slot
    /// skipped a unit another slot judged.
    pub fn from_judgments(judgments: &[FineJudgment]) -> Result<Self, StatsError> {
        let mut by_summary: BTreeMap<&str, BTreeMap<usize, BTreeMap<usize, u8>>> = BTreeMap::new();
        for j in judgments {
            by_summary
                .entry(&j.summary_id)
                .or_default()
                .entry(j.annotator_slot)
                .or_default()
                .insert(j.unit_index, j.label);
        }
        let mut summaries = Vec::with_capacity(by_summary.len());
        for (summary_id, slots) in by_summary {
            let units: Vec<usize> = slots.values().next().map(|u| u.keys().copied().collect()).unwrap_or_default();
            let mut labels = Vec::with_capacity(slots.len());
            for (slot, judged) in &slots {
                if judged.keys().copied().collect::<Vec<_>>() != units {
                    return Err(StatsError::Summary(
                        summary_id.to_string(),
                        format!("slot {slot} does not cover the same units as the others"),
                    ));
                }
                labels.push(judged.values().copied().collect());
            }
            summaries.push(SummaryLabels {
                summary_id: summary_id.to_string(),
                labels,
            });
        }
        FullFineAnnotations::new(summaries)
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn summaries(&self) -> &[SummaryLabels] {
        &self.summaries
    }

    /// `[summary][slot]` scores on the 0-100 scale over all units.
    pub fn full_scores(&self) -> ScoreMatrix<f64> {
        let rows: Vec<Vec<f64>> = self
            .summaries
            .iter()
            .map(|s| s.labels.iter().map(|l| score(l.iter().copied())).collect())
            .collect();
        ScoreMatrix::from_rows(&rows).expect("validated shape")
    }

    /// Scores when every slot only judges its sampled subset.
    pub fn partial_scores(&self, fraction: f64, seed: u64) -> ScoreMatrix<f64> {
        let mut values = Vec::with_capacity(self.summaries.len() * self.n_slots);
        for s in &self.summaries {
            for (slot, labels) in s.labels.iter().enumerate() {
                let picked = sample_positions(&s.summary_id, slot, s.n_units(), fraction, seed);
                values.push(score(picked.iter().map(|&p| labels[p])));
            }
        }
        ScoreMatrix::from_raw(values, self.summaries.len(), self.n_slots)
    }
}

fn score(labels: impl Iterator<Item = u8>) -> f64 {
    let (mut sum, mut n) = (0u32, 0u32);
    for l in labels {
        sum += l as u32;
        n += 1;
    }
    100.0 * sum as f64 / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialCurveConfig {
    pub fractions: Vec<f64>,
    pub n_subsets: usize,
    pub seed: u64,
    pub denominator: StddevDenominator,
}

impl Default for PartialCurveConfig {
    fn default() -> Self {
        PartialCurveConfig {
            fractions: (1..=10).map(|t| t as f64 / 10.0).collect(),
            n_subsets: 1000,
            seed: 0,
            denominator: StddevDenominator::Sample,
        }
    }
}

pub const MIN_SUBSETS: usize = 100;

/// 2.5 / 50 / 97.5 percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p2_5: f64,
    pub p50: f64,
    pub p97_5: f64,
}

impl Percentiles {
    fn of(mut xs: Vec<f64>) -> Result<Self, StatsError> {
        xs.sort_by(f64::total_cmp);
        Ok(Percentiles {
            p2_5: percentile(&xs, 2.5)?,
            p50: percentile(&xs, 50.0)?,
            p97_5: percentile(&xs, 97.5)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialCurvePoint {
    pub fraction: f64,
    /// Tau over the draws where it was defined.
    pub tau: Percentiles,
    /// Draws whose partial scores were all tied (tau undefined).
    pub n_undefined_tau: usize,
    /// `None` with a single annotator slot.
    pub stddev: Option<Percentiles>,
    pub mean_stddev: Option<f64>,
    pub n_subsets: usize,
    pub seed: u64,
}

pub fn partial_annotation_curve(
    data: &FullFineAnnotations,
    config: &PartialCurveConfig,
) -> Result<Vec<PartialCurvePoint>, StatsError> {
    if config.n_subsets < MIN_SUBSETS {
        return Err(StatsError::Parameter(format!(
            "need at least {MIN_SUBSETS} subsets, got {}",
            config.n_subsets
        )));
    }
    if let Some(&f) = config.fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(StatsError::Parameter(format!("fraction {f} outside (0, 1]")));
    }
    let full = data.full_scores().row_means();
    kendall_tau(&full, &full)?;
    let with_stddev = data.n_slots() >= 2;

    config
        .fractions
        .iter()
        .map(|&fraction| {
            let draws: Vec<(Option<f64>, Option<f64>)> = (0..config.n_subsets)
                .into_par_iter()
                .map(|s| {
                    let seed = StreamKey::new("partial")
                        .u64(config.seed)
                        .u64(fraction.to_bits())
                        .u64(s as u64)
                        .seed();
                    let partial = data.partial_scores(fraction, seed);
                    let tau = kendall_tau(&full, &partial.row_means()).ok();
                    let sd = with_stddev
                        .then(|| interannotator_stddev(&partial, config.denominator).ok())
                        .flatten();
                    (tau, sd)
                })
                .collect();
            let taus: Vec<f64> = draws.iter().filter_map(|d| d.0).collect();
            let sds: Vec<f64> = draws.iter().filter_map(|d| d.1).collect();
            let n_undefined_tau = draws.len() - taus.len();
            Ok(PartialCurvePoint {
                fraction,
                tau: Percentiles::of(taus)?,
                n_undefined_tau,
                mean_stddev: if with_stddev { Some(mean(&sds)?) } else { None },
                stddev: if with_stddev { Some(Percentiles::of(sds)?) } else { None },
                n_subsets: config.n_subsets,
                seed: config.seed,
            })
        })
        .collect()
}
