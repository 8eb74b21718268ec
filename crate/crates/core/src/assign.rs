//! Annotation assignments: per-slot unit subsets for FINE judging and
//! whole-summary tasks for COARSE rating.

use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::StreamKey;
use crate::segment::FineUnit;

#[derive(Debug, Error, PartialEq)]
pub enum AssignError {
    #[error("annotator count must be at least 1")]
    NoAnnotators,
    #[error("fraction {0} outside (0, 1]")]
    Fraction(f64),
    #[error("summary {0} has no units")]
    NoUnits(String),
    #[error("invalid scale [{min}, {max}]")]
    Scale { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fine,
    Coarse,
}

/// Which source highlights an annotator sees for a summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HintMode {
    #[default]
    None,
    Algorithmic,
    Gold,
}

impl fmt::Display for HintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HintMode::None => "none",
            HintMode::Algorithmic => "algorithmic",
            HintMode::Gold => "gold",
        })
    }
}

/// Closed rating range of a COARSE scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub min: f64,
    pub max: f64,
}

impl ScaleSpec {
    /// The 0-5 range shown in the COARSE instructions.
    pub const LIKERT_0_5: ScaleSpec = ScaleSpec { min: 0.0, max: 5.0 };
    /// Direct assessment.
    pub const DA_1_100: ScaleSpec = ScaleSpec { min: 1.0, max: 100.0 };

    pub fn new(min: f64, max: f64) -> Result<Self, AssignError> {
        if min.is_finite() && max.is_finite() && min < max {
            Ok(ScaleSpec { min, max })
        } else {
            Err(AssignError::Scale { min, max })
        }
    }

    pub fn contains(&self, rating: f64) -> bool {
        rating >= self.min && rating <= self.max
    }
}

impl Default for ScaleSpec {
    fn default() -> Self {
        ScaleSpec::LIKERT_0_5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub summary_id: String,
    pub annotator_slot: usize,
    pub mode: Mode,
    /// Sorted, duplicate-free; empty for COARSE.
    #[serde(default)]
    pub unit_indices: Vec<usize>,
    #[serde(default)]
    pub hint_mode: HintMode,
    pub seed: u64,
    pub fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleSpec>,
}

/// `max(1, round(f * n))`, capped at `n`.
pub fn subset_size(n_units: usize, fraction: f64) -> usize {
    ((fraction * n_units as f64).round() as usize).clamp(1, n_units.max(1))
}

fn check_fraction(fraction: f64) -> Result<(), AssignError> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(AssignError::Fraction(fraction))
    }
}

/// Positions `0..n_units` drawn for one slot, sorted ascending.
///
/// The stream is keyed by `(seed, summary_id, slot)` only, so each slot's
/// subset is reproducible on its own and independent of the others.
pub fn sample_positions(summary_id: &str, slot: usize, n_units: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let size = subset_size(n_units, fraction);
    if size >= n_units {
        return (0..n_units).collect();
    }
    let mut rng = StreamKey::new("assign/fine")
        .u64(seed)
        .str(summary_id)
        .u64(slot as u64)
        .rng();
    let mut picked = index::sample(&mut rng, n_units, size).into_vec();
    picked.sort_unstable();
    picked
}

/// One FINE assignment per annotator slot, each an independent random
/// subset of the summary's units.
pub fn make_fine_assignments(
    summary_id: &str,
    units: &[FineUnit],
    annotators: usize,
    fraction: f64,
    seed: u64,
    hint_mode: HintMode,
) -> Result<Vec<Assignment>, AssignError> {
    if annotators == 0 {
        return Err(AssignError::NoAnnotators);
    }
    check_fraction(fraction)?;
    if units.is_empty() {
        return Err(AssignError::NoUnits(summary_id.to_string()));
    }
    Ok((0..annotators)
        .map(|slot| {
            let mut unit_indices: Vec<usize> = sample_positions(summary_id, slot, units.len(), fraction, seed)
                .into_iter()
                .map(|p| units[p].unit_index)
                .collect();
            unit_indices.sort_unstable();
            Assignment {
                summary_id: summary_id.to_string(),
                annotator_slot: slot,
                mode: Mode::Fine,
                unit_indices,
                hint_mode,
                seed,
                fraction,
                scale: None,
            }
        })
        .collect())
}

pub fn make_coarse_assignments(
    summary_id: &str,
    annotators: usize,
    scale: ScaleSpec,
    seed: u64,
) -> Result<Vec<Assignment>, AssignError> {
    if annotators == 0 {
        return Err(AssignError::NoAnnotators);
    }
    Ok((0..annotators)
        .map(|slot| Assignment {
            summary_id: summary_id.to_string(),
            annotator_slot: slot,
            mode: Mode::Coarse,
            unit_indices: Vec::new(),
            hint_mode: HintMode::None,
            seed,
            fraction: 1.0,
            scale: Some(scale),
        })
        .collect())
}
