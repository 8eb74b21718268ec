//! Error-detection report over units with known perturbations.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::agreement::{fine_label_table, fleiss_kappa};
use super::describe::median;
use super::StatsError;
use crate::judgments::FineJudgment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldLabel {
    Perturbed,
    Clean,
}

impl GoldLabel {
    /// The judgment label a correct annotator gives.
    pub fn expected_label(self) -> u8 {
        match self {
            GoldLabel::Clean => 1,
            GoldLabel::Perturbed => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Per-unit times above this are treated as breaks and left out of the
    /// medians.
    pub time_cap_ms: u64,
    /// How many leading units per (summary, slot) feed `median_time_first_ms`.
    pub first_n: usize,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            time_cap_ms: 10 * 60 * 1000,
            first_n: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub n_judgments: usize,
    pub accuracy_2way: f64,
    /// Over units sharing the most common rater count (at least 2).
    pub fleiss_kappa: Option<f64>,
    pub n_kappa_units: usize,
    pub median_time_all_ms: Option<f64>,
    pub median_time_first_ms: Option<f64>,
    pub n_time_excluded: usize,
    pub time_cap_ms: u64,
    pub first_n: usize,
}

pub fn perturbation_report(
    judgments: &[FineJudgment],
    gold: &HashMap<(String, usize), GoldLabel>,
    config: &PerturbationConfig,
) -> Result<PerturbationReport, StatsError> {
    if judgments.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut correct = 0usize;
    for j in judgments {
        let label = gold
            .get(&(j.summary_id.clone(), j.unit_index))
            .ok_or_else(|| StatsError::MissingGold {
                summary_id: j.summary_id.clone(),
                unit_index: j.unit_index,
            })?;
        if j.label == label.expected_label() {
            correct += 1;
        }
    }
    let (fleiss, n_kappa_units) = match fine_label_table(judgments)? {
        Some(table) => (fleiss_kappa(&table), table.n_items()),
        None => (None, 0),
    };

    let within_cap = |j: &&FineJudgment| j.elapsed_ms <= config.time_cap_ms;
    let all_times: Vec<f64> = judgments.iter().filter(within_cap).map(|j| j.elapsed_ms as f64).collect();
    let n_time_excluded = judgments.len() - all_times.len();

    let mut sequences: BTreeMap<(&str, usize), Vec<&FineJudgment>> = BTreeMap::new();
    for j in judgments {
        sequences.entry((&j.summary_id, j.annotator_slot)).or_default().push(j);
    }
    let first_times: Vec<f64> = sequences
        .into_values()
        .flat_map(|mut seq| {
            seq.sort_by_key(|j| j.unit_index);
            seq.truncate(config.first_n);
            seq
        })
        .filter(within_cap)
        .map(|j| j.elapsed_ms as f64)
        .collect();

    Ok(PerturbationReport {
        n_judgments: judgments.len(),
        accuracy_2way: correct as f64 / judgments.len() as f64,
        fleiss_kappa: fleiss,
        n_kappa_units,
        median_time_all_ms: median(&all_times).ok(),
        median_time_first_ms: median(&first_times).ok(),
        n_time_excluded,
        time_cap_ms: config.time_cap_ms,
        first_n: config.first_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::HintMode;

    fn judgment(summary: &str, unit: usize, slot: usize, label: u8, ms: u64) -> FineJudgment {
        FineJudgment {
            summary_id: summary.into(),
            unit_index: unit,
            annotator_slot: slot,
            label,
            elapsed_ms: ms,
            hint_mode: HintMode::None,
            submitted_at: chrono::DateTime::UNIX_EPOCH,
        }
    }

    fn gold(n: usize) -> HashMap<(String, usize), GoldLabel> {
        (0..n)
            .map(|u| {
                let g = if u % 2 == 0 { GoldLabel::Clean } else { GoldLabel::Perturbed };
                (("s".to_string(), u), g)
            })
            .collect()
    }

    #[test]
    fn all_correct() {
        let g = gold(4);
        let js: Vec<_> = (0..4)
            .flat_map(|u| (0..3).map(move |slot| judgment("s", u, slot, u8::from(u % 2 == 0), 1000)))
            .collect();
        let r = perturbation_report(&js, &g, &PerturbationConfig::default()).unwrap();
        assert_eq!(r.accuracy_2way, 1.0);
        assert_eq!(r.fleiss_kappa, Some(1.0));
        assert_eq!(r.n_kappa_units, 4);
    }

    #[test]
    fn median_times_with_cap() {
        let g = gold(3);
        let js = vec![
            judgment("s", 0, 0, 1, 10_000),
            judgment("s", 1, 0, 0, 20_000),
            judgment("s", 2, 0, 1, 400_000),
        ];
        let r = perturbation_report(&js, &g, &PerturbationConfig::default()).unwrap();
        assert_eq!(r.median_time_all_ms, Some(20_000.0));
        assert_eq!(r.n_time_excluded, 0);
        let capped = PerturbationConfig {
            time_cap_ms: 100_000,
            first_n: 1,
        };
        let r = perturbation_report(&js, &g, &capped).unwrap();
        assert_eq!(r.n_time_excluded, 1);
        assert_eq!(r.median_time_all_ms, Some(15_000.0));
        assert_eq!(r.median_time_first_ms, Some(10_000.0));
        assert_eq!(r.fleiss_kappa, None);
    }

    #[test]
    fn missing_gold() {
        let err = perturbation_report(&[judgment("s", 9, 0, 1, 1)], &gold(2), &PerturbationConfig::default());
        assert!(matches!(err, Err(StatsError::MissingGold { unit_index: 9, .. })));
    }
}
