//! Order statistics, seven-number summaries, QQ data and confusion matrices.

use std::fmt;

use crate::schema::Portfolio;
use crate::{Error, Result, Scalar};

/// Quantile of an ascending sample by linear interpolation between order
/// statistics at `h = (n − 1)p + 1`.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = T::of((n - 1) as f64) * p.max(T::zero()).min(T::one());
    let lo = h.floor();
    let i = lo.as_f64() as usize;
    if i + 1 >= n {
        return sorted[n - 1];
    }
    sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i])
}

fn sorted_copy<T: Scalar>(values: &[T], what: &str) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(Error::Empty(what.into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument(format!("{what} contains NaN")));
    }
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats<T> {
    pub mean: T,
    pub sd: T,
    pub min: T,
    pub q1: T,
    pub median: T,
    pub q3: T,
    pub max: T,
}

impl<T: Scalar> SummaryStats<T> {
    pub const HEADER: [&'static str; 7] = ["Mean", "Std Dev", "Min", "Q1", "Median", "Q3", "Max"];

    pub fn to_array(&self) -> [T; 7] {
        [
            self.mean,
            self.sd,
            self.min,
            self.q1,
            self.median,
            self.q3,
            self.max,
        ]
    }
}

pub fn summary_stats<T: Scalar>(values: &[T]) -> Result<SummaryStats<T>> {
    let s = sorted_copy(values, "summary statistics sample")?;
    let n = s.len();
    let mean = s.iter().copied().sum::<T>() / T::of(n as f64);
    let sd = if n < 2 {
        T::zero()
    } else {
        let ss: T = s.iter().map(|&x| (x - mean) * (x - mean)).sum();
        (ss / T::of((n - 1) as f64)).sqrt()
    };
    Ok(SummaryStats {
        mean,
        sd,
        min: s[0],
        q1: quantile_sorted(&s, T::of(0.25)),
        median: quantile_sorted(&s, T::of(0.5)),
        q3: quantile_sorted(&s, T::of(0.75)),
        max: s[n - 1],
    })
}

/// One row of the claim-amount table: the claim count, how many policies
/// have it, and the summary of their amounts (absent when there are none).
#[derive(Debug, Clone, PartialEq)]
pub struct CountSummary {
    pub count: u8,
    pub n: usize,
    pub stats: Option<SummaryStats<f64>>,
}

/// Summary of `AMT_Claim` for each claim count 0 through 3.
pub fn stats_by_count(p: &Portfolio) -> Result<Vec<CountSummary>> {
    let counts = p.claim_counts()?;
    let amounts = p.claim_amounts()?;
    (0u8..=3)
        .map(|k| {
            let v: Vec<f64> = counts
                .iter()
                .zip(&amounts)
                .filter(|(c, _)| **c == k as f64)
                .map(|(_, a)| *a)
                .collect();
            let stats = if v.is_empty() {
                None
            } else {
                Some(summary_stats(&v)?)
            };
            Ok(CountSummary {
                count: k,
                n: v.len(),
                stats,
            })
        })
        .collect()
}

/// Matched quantiles of `a` (x) and `b` (y) at `i/(k+1)`, `i = 1..=k`.
pub fn qq_points<T: Scalar>(a: &[T], b: &[T], k: usize) -> Result<Vec<(T, T)>> {
    if k < 2 {
        return Err(Error::InvalidArgument(
            "QQ plots need at least 2 points".into(),
        ));
    }
    let sa = sorted_copy(a, "first QQ sample")?;
    let sb = sorted_copy(b, "second QQ sample")?;
    Ok((1..=k)
        .map(|i| {
            let p = T::of(i as f64 / (k + 1) as f64);
            (quantile_sorted(&sa, p), quantile_sorted(&sb, p))
        })
        .collect())
}

/// Expected frequency times expected average severity.
pub fn pure_premium<T: Scalar>(frequency: T, severity: T) -> T {
    frequency * severity
}

pub fn pure_premiums<T: Scalar>(frequency: &[T], severity: &[T]) -> Result<Vec<T>> {
    if frequency.len() != severity.len() {
        return Err(Error::Dimension {
            expected: frequency.len(),
            found: severity.len(),
        });
    }
    Ok(frequency
        .iter()
        .zip(severity)
        .map(|(&f, &s)| pure_premium(f, s))
        .collect())
}

/// Cell `(i, j)` counts policies with actual count `i` and predicted `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix(pub [[usize; 4]; 4]);

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn diagonal(&self) -> usize {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.diagonal() as f64 / self.total().max(1) as f64
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal() == self.total()
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "actual\\predicted,0,1,2,3")?;
        for (i, row) in self.0.iter().enumerate() {
            writeln!(f, "{i},{},{},{},{}", row[0], row[1], row[2], row[3])?;
        }
        Ok(())
    }
}

fn count_index(v: f64) -> Result<usize> {
    if (0.0..=3.0).contains(&v) && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidArgument(format!(
            "claim count {v} is outside 0..=3"
        )))
    }
}

pub fn confusion_matrix(actual: &[f64], predicted: &[f64]) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::Dimension {
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    let mut m = ConfusionMatrix::default();
    for (&a, &p) in actual.iter().zip(predicted) {
        m.0[count_index(a)?][count_index(p)?] += 1;
    }
    Ok(m)
}

/// Share of each claim count 0 through 3.
pub fn claim_mix(counts: &[f64]) -> Result<[f64; 4]> {
    if counts.is_empty() {
        return Err(Error::Empty("claim counts".into()));
    }
    let mut mix = [0.0; 4];
    for &c in counts {
        mix[count_index(c)?] += 1.0;
    }
    let n = counts.len() as f64;
    Ok(mix.map(|m| m / n))
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let sa = sorted_copy(a, "first KS sample")?;
    let sb = sorted_copy(b, "second KS sample")?;
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_sample() {
        let s = summary_stats(&[2.5; 6]).unwrap();
        assert_eq!(s.to_array(), [2.5, 0.0, 2.5, 2.5, 2.5, 2.5, 2.5]);
    }

    #[test]
    fn zero_to_four() {
        let s = summary_stats(&[3.0, 0.0, 4.0, 1.0, 2.0]).unwrap();
        assert_eq!(
            (s.mean, s.min, s.q1, s.median, s.q3, s.max),
            (2.0, 0.0, 1.0, 2.0, 3.0, 4.0)
        );
        assert!((s.sd - 2.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn header_order() {
        assert_eq!(
            SummaryStats::<f64>::HEADER,
            ["Mean", "Std Dev", "Min", "Q1", "Median", "Q3", "Max"]
        );
    }

    #[test]
    fn interpolates_between_order_statistics() {
        // h = 3·0.5 + 1 = 2.5 → halfway between the 2nd and 3rd values
        assert_eq!(quantile_sorted(&[1.0, 2.0, 4.0, 8.0], 0.5), 3.0);
        // h = 3·0.25 + 1 = 1.75
        assert_eq!(quantile_sorted(&[1.0, 2.0, 4.0, 8.0], 0.25), 1.75);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(summary_stats::<f64>(&[]).is_err());
        assert!(qq_points::<f64>(&[], &[1.0], 3).is_err());
    }

    #[test]
    fn qq_probabilities() {
        let a = [0.0, 1.0, 2.0, 3.0, 4.0];
        let q = qq_points(&a, &a, 3).unwrap();
        assert_eq!(q, vec![(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
        for (x, y) in qq_points(&a, &b, 7).unwrap() {
            assert_eq!(y, 2.0 * x);
        }
        assert!(qq_points(&a, &a, 1).is_err());
    }

    #[test]
    fn pure_premium_products() {
        assert_eq!(pure_premium(0.0, 1234.0), 0.0);
        assert!((pure_premium(0.04f64, 5000.0) - 200.0).abs() < 1e-9);
        assert_eq!(pure_premium(0.37, 1.0), 0.37);
    }

    #[test]
    fn confusion_matrix_cells() {
        let a = [0.0, 1.0, 2.0, 3.0, 0.0];
        let m = confusion_matrix(&a, &a).unwrap();
        assert!(m.is_diagonal());
        assert_eq!(m.total(), 5);
        let zeros = [0.0; 5];
        let m = confusion_matrix(&a, &zeros).unwrap();
        assert_eq!(
            m.0.iter().map(|r| r[0]).collect::<Vec<_>>(),
            vec![2, 1, 1, 1]
        );
        assert_eq!(m.0.iter().map(|r| r[1] + r[2] + r[3]).sum::<usize>(), 0);
        assert!(confusion_matrix(&[4.0], &[0.0]).is_err());
    }

    #[test]
    fn mix_sums_to_one() {
        let mix = claim_mix(&[0.0, 0.0, 1.0, 3.0]).unwrap();
        assert_eq!(mix, [0.5, 0.25, 0.0, 0.25]);
    }

    #[test]
    fn ks_of_shifted_samples() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_distance(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(
            ks_distance(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]).unwrap(),
            0.5
        );
    }

    proptest! {
        #[test]
        fn summary_is_ordered(v in prop::collection::vec(-1e6f64..1e6, 1..60)) {
            let s = summary_stats(&v).unwrap();
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            prop_assert!(s.sd >= 0.0);
        }

        #[test]
        fn quantile_is_monotone(mut v in prop::collection::vec(-1e6f64..1e6, 1..40), p in 0.0f64..1.0, q in 0.0f64..1.0) {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(quantile_sorted(&v, lo) <= quantile_sorted(&v, hi));
        }

        #[test]
        fn self_qq_is_identity(v in prop::collection::vec(-1e6f64..1e6, 1..40), k in 2usize..30) {
            for (x, y) in qq_points(&v, &v, k).unwrap() {
                prop_assert_eq!(x, y);
            }
        }

        #[test]
        fn pure_premium_zero_iff_factor_zero(f in prop_oneof![Just(0.0), 1e-6f64..10.0], s in prop_oneof![Just(0.0), 1e-3f64..1e5]) {
            prop_assert_eq!(pure_premium(f, s) == 0.0, f == 0.0 || s == 0.0);
        }
    }
}
