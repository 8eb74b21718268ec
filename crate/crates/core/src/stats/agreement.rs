//! Chance-corrected agreement over an item x rater table of category labels.
//!
//! Conventions follow `statsmodels.stats.inter_rater.fleiss_kappa`: Fleiss
//! takes chance agreement from the pooled category marginals, Randolph's
//! free-marginal kappa uses `1/q` for `q` declared categories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::judgments::FineJudgment;
use crate::num::Scalar;

/// Labels indexed `[item][rater]`, each in `0..n_categories`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    rows: Vec<Vec<usize>>,
    n_categories: usize,
}

impl LabelTable {
    pub fn new(rows: Vec<Vec<usize>>, n_categories: usize) -> Result<Self, StatsError> {
        let n_raters = rows.first().map(Vec::len).ok_or(StatsError::Empty)?;
        if n_raters < 2 {
            return Err(StatsError::TooFewColumns {
                needed: 2,
                have: n_raters,
            });
        }
        if n_categories < 2 {
            return Err(StatsError::Parameter("need at least two categories".into()));
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n_raters {
                return Err(StatsError::Ragged {
                    row,
                    len: r.len(),
                    expected: n_raters,
                });
            }
            if let Some(&label) = r.iter().find(|&&l| l >= n_categories) {
                return Err(StatsError::Category {
                    row,
                    label,
                    categories: n_categories,
                });
            }
        }
        Ok(LabelTable { rows, n_categories })
    }

    /// Binary supported / not-supported labels.
    pub fn binary(rows: &[Vec<u8>]) -> Result<Self, StatsError> {
        LabelTable::new(
            rows.iter()
                .map(|r| r.iter().map(|&l| l as usize).collect())
                .collect(),
            2,
        )
    }

    pub fn n_items(&self) -> usize {
        self.rows.len()
    }

    pub fn n_raters(&self) -> usize {
        self.rows[0].len()
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    fn counts(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.rows.iter().map(|r| {
            let mut c = vec![0; self.n_categories];
            for &l in r {
                c[l] += 1;
            }
            c
        })
    }

    /// Mean observed pairwise agreement per item.
    fn observed_agreement<T: Scalar>(&self) -> T {
        let n = self.n_raters();
        let denom = T::from_count(n * (n - 1));
        let total: T = self
            .counts()
            .map(|c| T::from_count(c.iter().map(|&k| k * k).sum::<usize>() - n) / denom)
            .sum();
        total / T::from_count(self.n_items())
    }
}

/// `None` when the expected agreement is 1 (all labels in one category).
pub fn fleiss_kappa<T: Scalar>(table: &LabelTable) -> Option<T> {
    let mut totals = vec![0usize; table.n_categories];
    for c in table.counts() {
        for (t, k) in totals.iter_mut().zip(c) {
            *t += k;
        }
    }
    let all = T::from_count(table.n_items() * table.n_raters());
    let expected: T = totals
        .iter()
        .map(|&t| {
            let p = T::from_count(t) / all;
            p * p
        })
        .sum();
    if expected >= T::one() - T::epsilon() {
        return None;
    }
    let observed = table.observed_agreement::<T>();
    Some((observed - expected) / (T::one() - expected))
}

pub fn randolph_kappa<T: Scalar>(table: &LabelTable) -> T {
    let expected = T::one() / T::from_count(table.n_categories);
    (table.observed_agreement::<T>() - expected) / (T::one() - expected)
}

/// Fraction of items on which every rater chose the same label.
pub fn all_agree_fraction<T: Scalar>(table: &LabelTable) -> T {
    let agree = table
        .rows
        .iter()
        .filter(|r| r.iter().all(|&l| l == r[0]))
        .count();
    T::from_count(agree) / T::from_count(table.n_items())
}

/// Binary label table over the units judged by the most common number of
/// raters (at least 2; ties go to the larger count). Units with other rater
/// counts are left out, as a kappa needs a fixed count per item. `None` when
/// no unit has two raters.
pub fn fine_label_table(judgments: &[FineJudgment]) -> Result<Option<LabelTable>, StatsError> {
    let mut per_unit: BTreeMap<(&str, usize), Vec<u8>> = BTreeMap::new();
    for j in judgments {
        per_unit.entry((&j.summary_id, j.unit_index)).or_default().push(j.label);
    }
    let mut by_count: BTreeMap<usize, usize> = BTreeMap::new();
    for labels in per_unit.values().filter(|l| l.len() >= 2) {
        *by_count.entry(labels.len()).or_default() += 1;
    }
    let Some(raters) = by_count.iter().max_by_key(|(k, n)| (**n, **k)).map(|(k, _)| *k) else {
        return Ok(None);
    };
    let rows: Vec<Vec<u8>> = per_unit.into_values().filter(|l| l.len() == raters).collect();
    LabelTable::binary(&rows).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport<T> {
    /// `None` when undefined.
    pub fleiss_kappa: Option<T>,
    pub randolph_kappa: T,
    pub all_agree_fraction: T,
    pub n_items: usize,
    pub n_raters: usize,
}

pub fn agreement_report<T: Scalar>(table: &LabelTable) -> AgreementReport<T> {
    AgreementReport {
        fleiss_kappa: fleiss_kappa(table),
        randolph_kappa: randolph_kappa(table),
        all_agree_fraction: all_agree_fraction(table),
        n_items: table.n_items(),
        n_raters: table.n_raters(),
    }
}
