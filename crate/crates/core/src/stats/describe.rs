use serde::{Deserialize, Serialize};

use super::{ScoreMatrix, StatsError};
use crate::num::Scalar;

/// Denominator for the per-row standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StddevDenominator {
    /// `n - 1`
    #[default]
    Sample,
    /// `n`
    Population,
}

pub fn mean<T: Scalar>(xs: &[T]) -> Result<T, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(xs.iter().copied().sum::<T>() / T::from_count(xs.len()))
}

pub fn stddev<T: Scalar>(xs: &[T], denominator: StddevDenominator) -> Result<T, StatsError> {
    let n = xs.len();
    let dof = match denominator {
        StddevDenominator::Sample if n < 2 => {
            return Err(StatsError::TooFewColumns { needed: 2, have: n })
        }
        StddevDenominator::Sample => n - 1,
        StddevDenominator::Population if n == 0 => return Err(StatsError::Empty),
        StddevDenominator::Population => n,
    };
    let m = mean(xs)?;
    let ss: T = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    Ok((ss / T::from_count(dof)).sqrt())
}

/// Mean over rows of the standard deviation across annotator columns.
pub fn interannotator_stddev<T: Scalar>(
    x: &ScoreMatrix<T>,
    denominator: StddevDenominator,
) -> Result<T, StatsError> {
    if x.n_cols() < 2 {
        return Err(StatsError::TooFewColumns {
            needed: 2,
            have: x.n_cols(),
        });
    }
    let per_row = x
        .rows()
        .map(|r| stddev(r, denominator))
        .collect::<Result<Vec<T>, _>>()?;
    mean(&per_row)
}

/// Empirical percentile, `q` in `[0, 100]`, linear interpolation between
/// closest ranks over a sorted sample.
pub fn percentile<T: Scalar>(sorted: &[T], q: f64) -> Result<T, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(StatsError::Parameter(format!("percentile {q} outside [0, 100]")));
    }
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        return Ok(sorted[lo]);
    }
    let frac = T::lit(rank - lo as f64);
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

pub fn median<T: Scalar>(xs: &[T]) -> Result<T, StatsError> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    percentile(&sorted, 50.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stddev_examples() {
        let x = ScoreMatrix::from_rows(&[vec![50.0, 50.0, 50.0], vec![80.0, 80.0, 80.0]]).unwrap();
        assert_eq!(interannotator_stddev(&x, StddevDenominator::Sample).unwrap(), 0.0);
        // sqrt((50^2 + 50^2) / 1)
        let x = ScoreMatrix::from_rows(&[vec![0.0, 100.0]]).unwrap();
        let s = interannotator_stddev(&x, StddevDenominator::Sample).unwrap();
        assert!((s - 5000f64.sqrt()).abs() < 1e-12);
        assert!((s - 70.7107).abs() < 1e-4);
        let p = interannotator_stddev(&x, StddevDenominator::Population).unwrap();
        assert_eq!(p, 50.0);
    }

    #[test]
    fn stddev_needs_two_columns() {
        let x = ScoreMatrix::from_rows(&[vec![10.0], vec![20.0]]).unwrap();
        assert!(matches!(
            interannotator_stddev(&x, StddevDenominator::Sample),
            Err(StatsError::TooFewColumns { .. })
        ));
    }

    #[test]
    fn percentile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&xs, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&xs, 100.0).unwrap(), 4.0);
        assert_eq!(percentile(&xs, 50.0).unwrap(), 2.5);
        assert!((percentile(&xs, 2.5).unwrap() - 1.075_f64).abs() < 1e-12);
        assert!(percentile::<f64>(&[], 5.0).is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[10.0, 400.0, 20.0]).unwrap(), 20.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
    }

    proptest! {
        #[test]
        fn stddev_permutation_invariant(
            rows in prop::collection::vec(prop::collection::vec(0.0f64..100.0, 3), 1..20),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let base = interannotator_stddev(&ScoreMatrix::from_rows(&rows).unwrap(), StddevDenominator::Sample).unwrap();
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rng);
            let mut cols = [0usize, 1, 2];
            cols.shuffle(&mut rng);
            let shuffled: Vec<Vec<f64>> = shuffled.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
            let other = interannotator_stddev(&ScoreMatrix::from_rows(&shuffled).unwrap(), StddevDenominator::Sample).unwrap();
            prop_assert!((base - other).abs() < 1e-9);
        }
    }
}
