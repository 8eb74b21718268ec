//! Annotator judgments, their durable log, and aggregation into scores.

mod matrix;
mod store;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assign::{HintMode, ScaleSpec};

pub use matrix::{build_matrix, system_score, AnnotationMatrix};
pub use store::{effective_judgments, load_log, JudgmentStore, LogRecord};

#[derive(Debug, Error)]
pub enum JudgmentError {
    #[error("label {0} is not 0 or 1")]
    Label(u8),
    #[error("rating {rating} outside scale [{min}, {max}]")]
    Rating { rating: f64, min: f64, max: f64 },
    #[error("no judgments to score")]
    Empty,
    #[error("duplicate judgment for {0}")]
    Duplicate(JudgmentKey),
    #[error("record {supersedes} is not the current judgment for {key}")]
    Supersedes { key: JudgmentKey, supersedes: u64 },
    #[error("judgment log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("judgment references unknown summary {0}")]
    UnknownSummary(String),
    #[error("ragged annotation data (summary, slots judged): {0:?}")]
    Ragged(Vec<(String, usize)>),
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("matrix value {value} at row {row} outside [0, 100]")]
    Range { row: usize, value: f64 },
    #[error("summary {0} has no system in the grouping")]
    Ungrouped(String),
    #[error("matrix csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary support judgment for one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineJudgment {
    pub summary_id: String,
    pub unit_index: usize,
    pub annotator_slot: usize,
    /// 1 = supported by the source, 0 = not supported.
    pub label: u8,
    pub elapsed_ms: u64,
    #[serde(default)]
    pub hint_mode: HintMode,
    #[serde(default = "Utc::now")]
    pub submitted_at: DateTime<Utc>,
}

/// Whole-summary rating on a declared scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseJudgment {
    pub summary_id: String,
    pub annotator_slot: usize,
    pub rating: f64,
    #[serde(default)]
    pub scale: ScaleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    #[serde(default)]
    pub elapsed_ms: u64,
    #[serde(default = "Utc::now")]
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Judgment {
    Fine(FineJudgment),
    Coarse(CoarseJudgment),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JudgmentKey {
    Fine {
        summary_id: String,
        unit_index: usize,
        annotator_slot: usize,
    },
    Coarse {
        summary_id: String,
        annotator_slot: usize,
    },
}

impl std::fmt::Display for JudgmentKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JudgmentKey::Fine {
                summary_id,
                unit_index,
                annotator_slot,
            } => write!(f, "summary {summary_id} unit {unit_index} slot {annotator_slot}"),
            JudgmentKey::Coarse {
                summary_id,
                annotator_slot,
            } => write!(f, "summary {summary_id} slot {annotator_slot}"),
        }
    }
}

impl Judgment {
    pub fn key(&self) -> JudgmentKey {
        match self {
            Judgment::Fine(j) => JudgmentKey::Fine {
                summary_id: j.summary_id.clone(),
                unit_index: j.unit_index,
                annotator_slot: j.annotator_slot,
            },
            Judgment::Coarse(j) => JudgmentKey::Coarse {
                summary_id: j.summary_id.clone(),
                annotator_slot: j.annotator_slot,
            },
        }
    }

    pub fn summary_id(&self) -> &str {
        match self {
            Judgment::Fine(j) => &j.summary_id,
            Judgment::Coarse(j) => &j.summary_id,
        }
    }

    pub fn annotator_slot(&self) -> usize {
        match self {
            Judgment::Fine(j) => j.annotator_slot,
            Judgment::Coarse(j) => j.annotator_slot,
        }
    }

    pub fn elapsed_ms(&self) -> u64 {
        match self {
            Judgment::Fine(j) => j.elapsed_ms,
            Judgment::Coarse(j) => j.elapsed_ms,
        }
    }

    pub fn as_fine(&self) -> Option<&FineJudgment> {
        match self {
            Judgment::Fine(j) => Some(j),
            Judgment::Coarse(_) => None,
        }
    }

    pub fn as_coarse(&self) -> Option<&CoarseJudgment> {
        match self {
            Judgment::Coarse(j) => Some(j),
            Judgment::Fine(_) => None,
        }
    }

    /// Checks the label / rating range.
    pub fn validate(&self) -> Result<(), JudgmentError> {
        match self {
            Judgment::Fine(j) if j.label > 1 => Err(JudgmentError::Label(j.label)),
            Judgment::Coarse(j) if !j.scale.contains(j.rating) || !j.rating.is_finite() => {
                Err(JudgmentError::Rating {
                    rating: j.rating,
                    min: j.scale.min,
                    max: j.scale.max,
                })
            }
            _ => Ok(()),
        }
    }
}

/// 100 x the mean label over the judged units.
pub fn summary_score_fine(labels: &[u8]) -> Result<f64, JudgmentError> {
    if labels.is_empty() {
        return Err(JudgmentError::Empty);
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(JudgmentError::Label(bad));
    }
    let supported: u32 = labels.iter().map(|&l| l as u32).sum();
    Ok(100.0 * supported as f64 / labels.len() as f64)
}

/// Maps a rating linearly onto 0-100.
pub fn summary_score_coarse(rating: f64, scale: ScaleSpec) -> Result<f64, JudgmentError> {
    if !rating.is_finite() || !scale.contains(rating) {
        return Err(JudgmentError::Rating {
            rating,
            min: scale.min,
            max: scale.max,
        });
    }
    Ok(100.0 * (rating - scale.min) / (scale.max - scale.min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fine_scores() {
        assert_eq!(summary_score_fine(&[1, 1, 0, 1]).unwrap(), 75.0);
        assert_eq!(summary_score_fine(&[0, 0]).unwrap(), 0.0);
        assert_eq!(summary_score_fine(&[1; 12]).unwrap(), 100.0);
        assert!(matches!(summary_score_fine(&[]), Err(JudgmentError::Empty)));
        assert!(matches!(summary_score_fine(&[1, 2]), Err(JudgmentError::Label(2))));
    }

    #[test]
    fn fine_score_ignores_unit_order() {
        assert_eq!(summary_score_fine(&[0, 1, 1, 1]).unwrap(), summary_score_fine(&[1, 1, 1, 0]).unwrap());
    }

    #[test]
    fn coarse_scores() {
        assert_eq!(summary_score_coarse(3.0, ScaleSpec::LIKERT_0_5).unwrap(), 60.0);
        assert_eq!(summary_score_coarse(0.0, ScaleSpec::LIKERT_0_5).unwrap(), 0.0);
        assert_eq!(summary_score_coarse(5.0, ScaleSpec::LIKERT_0_5).unwrap(), 100.0);
        assert_eq!(summary_score_coarse(100.0, ScaleSpec::DA_1_100).unwrap(), 100.0);
        assert_eq!(summary_score_coarse(1.0, ScaleSpec::DA_1_100).unwrap(), 0.0);
        assert!(summary_score_coarse(6.0, ScaleSpec::LIKERT_0_5).is_err());
    }

    #[test]
    fn judgment_json_shape() {
        let j: Judgment = serde_json::from_str(
            r#"{"kind":"fine","summary_id":"s","unit_index":2,"annotator_slot":1,"label":1,"elapsed_ms":900}"#,
        )
        .unwrap();
        assert_eq!(j.key().to_string(), "summary s unit 2 slot 1");
        let j: Judgment = serde_json::from_str(
            r#"{"kind":"coarse","summary_id":"s","annotator_slot":0,"rating":4,"comment":"ok"}"#,
        )
        .unwrap();
        let c = j.as_coarse().unwrap();
        assert_eq!(c.scale, ScaleSpec::LIKERT_0_5);
        assert_eq!(c.comment.as_deref(), Some("ok"));
        j.validate().unwrap();
    }
}
