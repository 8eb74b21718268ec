use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assign::HintMode;
use crate::judgments::FineJudgment;

/// Mean time per unit in one decile of progress through a summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningPoint {
    pub hint_mode: HintMode,
    /// 0 = first tenth of the units an annotator judged in a summary.
    pub decile: usize,
    pub mean_elapsed_ms: f64,
    pub n: usize,
}

/// Positions are ranks by unit index within each (summary, slot) sequence.
/// Output is ordered by hint mode, then decile; empty buckets are omitted.
pub fn learning_curve(judgments: &[FineJudgment]) -> Vec<LearningPoint> {
    let mut sequences: BTreeMap<(&str, usize), Vec<&FineJudgment>> = BTreeMap::new();
    for j in judgments {
        sequences.entry((&j.summary_id, j.annotator_slot)).or_default().push(j);
    }
    let mut buckets: BTreeMap<(HintMode, usize), (u64, usize)> = BTreeMap::new();
    for mut seq in sequences.into_values() {
        seq.sort_by_key(|j| j.unit_index);
        let n = seq.len();
        for (rank, j) in seq.into_iter().enumerate() {
            let decile = 10 * rank / n;
            let entry = buckets.entry((j.hint_mode, decile)).or_default();
            entry.0 += j.elapsed_ms;
            entry.1 += 1;
        }
    }
    buckets
        .into_iter()
        .map(|((hint_mode, decile), (total, n))| LearningPoint {
            hint_mode,
            decile,
            mean_elapsed_ms: total as f64 / n as f64,
            n,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(summary: &str, times: &[u64], hint_mode: HintMode) -> Vec<FineJudgment> {
        times
            .iter()
            .enumerate()
            .map(|(u, &ms)| FineJudgment {
                summary_id: summary.into(),
                unit_index: u,
                annotator_slot: 0,
                label: 1,
                elapsed_ms: ms,
                hint_mode,
                submitted_at: chrono::DateTime::UNIX_EPOCH,
            })
            .collect()
    }

    #[test]
    fn constant_times_flat() {
        let js = seq("a", &[30_000; 20], HintMode::None);
        let curve = learning_curve(&js);
        assert_eq!(curve.len(), 10);
        assert!(curve.iter().all(|p| p.mean_elapsed_ms == 30_000.0 && p.n == 2));
    }

    #[test]
    fn decaying_times_strictly_decrease() {
        // 120s down to 30s in equal steps over 20 units.
        let times: Vec<u64> = (0..20).map(|i| 120_000 - i * 90_000 / 19).collect();
        let mut js = seq("a", &times, HintMode::Algorithmic);
        js.extend(seq("b", &times, HintMode::None));
        let curve = learning_curve(&js);
        for mode in [HintMode::None, HintMode::Algorithmic] {
            let means: Vec<f64> = curve.iter().filter(|p| p.hint_mode == mode).map(|p| p.mean_elapsed_ms).collect();
            assert_eq!(means.len(), 10);
            assert!(means.windows(2).all(|w| w[0] > w[1]), "{means:?}");
        }
    }

    #[test]
    fn empty_input() {
        assert!(learning_curve(&[]).is_empty());
    }
}
