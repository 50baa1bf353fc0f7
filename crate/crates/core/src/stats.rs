//! Small numerical helpers shared by the summaries.

/// Linear-interpolation quantile of sorted data (the usual "type 7" definition).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Inverse empirical CDF: the smallest sample value `x` with `F(x) >= p`.
///
/// For an even sample the median is the lower of the two middle values.
pub fn lower_quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let n = sorted.len();
    let k = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

pub fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with `n - 1` denominator.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Median, 2.5% and 97.5% quantiles.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
}

impl Interval {
    pub fn from_samples(values: impl IntoIterator<Item = f64>) -> Self {
        let s = sorted(values);
        Interval {
            median: quantile_sorted(&s, 0.5),
            lower95: quantile_sorted(&s, 0.025),
            upper95: quantile_sorted(&s, 0.975),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower95 <= x && x <= self.upper95
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_definitions() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(lower_quantile_sorted(&s, 0.5), 2.0);
        assert_eq!(lower_quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(lower_quantile_sorted(&s, 1.0), 4.0);
        assert_eq!(quantile_sorted(&[7.0], 0.975), 7.0);
    }

    #[test]
    fn degenerate_interval() {
        let i = Interval::from_samples(vec![1.05; 20]);
        assert_eq!((i.lower95, i.median, i.upper95), (1.05, 1.05, 1.05));
    }

    proptest::proptest! {
        #[test]
        fn interval_ordered(v in proptest::collection::vec(-1e3f64..1e3, 1..200)) {
            let i = Interval::from_samples(v);
            proptest::prop_assert!(i.lower95 <= i.median && i.median <= i.upper95);
        }
    }
}
