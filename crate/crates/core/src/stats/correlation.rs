use std::cmp::Ordering;

use super::StatsError;
use crate::num::Scalar;

fn check_lengths<T>(a: &[T], b: &[T]) -> Result<(), StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::Parameter("need at least two observations".into()));
    }
    Ok(())
}

pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Result<T, StatsError> {
    check_lengths(a, b)?;
    let n = T::from_count(a.len());
    let ma = a.iter().copied().sum::<T>() / n;
    let mb = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab = sab + dx * dy;
        saa = saa + dx * dx;
        sbb = sbb + dy * dy;
    }
    if saa == T::zero() {
        return Err(StatsError::UndefinedCorrelation("first vector"));
    }
    if sbb == T::zero() {
        return Err(StatsError::UndefinedCorrelation("second vector"));
    }
    let r = sab / (saa.sqrt() * sbb.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// Kendall's tau-b, tie-corrected.
pub fn kendall_tau<T: Scalar>(a: &[T], b: &[T]) -> Result<T, StatsError> {
    check_lengths(a, b)?;
    let n = a.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_a, mut ties_b) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i].partial_cmp(&a[j]).expect("finite values");
            let db = b[i].partial_cmp(&b[j]).expect("finite values");
            match (da, db) {
                (Ordering::Equal, Ordering::Equal) => {
                    ties_a += 1;
                    ties_b += 1;
                }
                (Ordering::Equal, _) => ties_a += 1,
                (_, Ordering::Equal) => ties_b += 1,
                _ if da == db => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as i64;
    if ties_a == pairs {
        return Err(StatsError::UndefinedCorrelation("first vector"));
    }
    if ties_b == pairs {
        return Err(StatsError::UndefinedCorrelation("second vector"));
    }
    let num = T::from_i64(concordant - discordant).expect("pair count");
    let da = T::from_i64(pairs - ties_a).expect("pair count");
    let db = T::from_i64(pairs - ties_b).expect("pair count");
    Ok(num / (da * db).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        // 2 concordant, 1 discordant pair
        let t: f64 = kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_ties_match_reference_values() {
        // Reference values from scipy.stats.kendalltau (tau-b).
        let a = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0, 5.0];
        let b = [2.0, 1.0, 2.0, 3.0, 3.0, 5.0, 4.0, 4.0];
        assert!((kendall_tau(&a, &b).unwrap() - 0.6940220937885673_f64).abs() < 1e-12);
        let a = [12.5, 80.0, 80.0, 33.3, 50.0, 66.7, 100.0, 0.0, 50.0, 25.0];
        let b = [20.0, 75.0, 90.0, 30.0, 45.0, 70.0, 95.0, 10.0, 40.0, 25.0];
        assert!((kendall_tau(&a, &b).unwrap() - 0.9775252199076787_f64).abs() < 1e-12);
        assert!((pearson(&a, &b).unwrap() - 0.976273577700416_f64).abs() < 1e-12);
    }

    #[test]
    fn undefined_cases() {
        assert_eq!(
            kendall_tau(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::UndefinedCorrelation("first vector"))
        );
        assert!(pearson(&[1.0, 2.0], &[5.0, 5.0]).is_err());
        assert!(kendall_tau(&[1.0], &[1.0]).is_err());
        assert_eq!(kendall_tau(&[1.0, 2.0], &[1.0]), Err(StatsError::LengthMismatch(2, 1)));
    }

    #[test]
    fn f32_instantiation() {
        let t: f32 = kendall_tau(&[1.0f32, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn tau_identities(a in prop::collection::vec(0u8..20, 2..40)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            prop_assume!(a.iter().any(|&x| x != a[0]));
            prop_assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
            let neg: Vec<f64> = a.iter().map(|x| -x).collect();
            prop_assert_eq!(kendall_tau(&a, &neg).unwrap(), -1.0);
        }

        #[test]
        fn tau_symmetric_and_bounded(
            pairs in prop::collection::vec((0u8..6, 0u8..6), 2..40)
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            if let (Ok(x), Ok(y)) = (kendall_tau(&a, &b), kendall_tau(&b, &a)) {
                prop_assert_eq!(x, y);
                prop_assert!((-1.0..=1.0).contains(&x));
            }
        }
    }
}
