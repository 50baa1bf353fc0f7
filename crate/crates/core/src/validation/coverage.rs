//! Calibration of held-out observations against a training-only fit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::SrbObservation;
use crate::error::{Result, SrbError};
use crate::inference::PosteriorDraws;
use crate::stats::{mean, quantile_sorted, sorted, Interval};

/// Lower and upper tail probabilities outside the 95% predictive interval.
const TAIL: f64 = 0.025;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationCheck {
    pub region_id: String,
    pub source_id: String,
    pub period_start: i32,
    pub period_end: i32,
    pub ratio: f64,
    /// Posterior quantiles of the period-mean sex ratio.
    pub period_mean: Interval,
    /// Predictive probability of a ratio at or below the observed one.
    pub pit: f64,
    pub covered: bool,
    /// Observed ratio minus the posterior median.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n_held_out: usize,
    pub coverage_percent: f64,
    pub mean_error: f64,
    pub median_absolute_error: f64,
    pub share_below: f64,
    pub share_above: f64,
    pub observations: Vec<ObservationCheck>,
}

/// Scores held-out observations against the posterior predictive distribution.
///
/// For every draw the period-mean sex ratio gives a log-normal predictive
/// density with the observation's own sampling error. An observation is covered
/// when its predictive CDF value lies within `[0.025, 0.975]`.
pub fn coverage_report(
    draws: &PosteriorDraws,
    held_out: &[SrbObservation],
) -> Result<CoverageReport> {
    if draws.n_draws() == 0 {
        return Err(SrbError::Invalid("posterior draws are empty".into()));
    }
    if held_out.is_empty() {
        return Err(SrbError::Invalid("no held-out observations".into()));
    }
    let normal = Normal::standard();
    let b = draws.config.baseline_b;
    let years = draws.years;
    let mut checks = Vec::with_capacity(held_out.len());
    for o in held_out {
        let r = draws.region_index(&o.region_id).ok_or_else(|| {
            SrbError::Invalid(format!("held-out region {} was not estimated", o.region_id))
        })?;
        let first = o.period_start.max(years.start);
        let last = o.period_end.min(years.end);
        if first > last {
            return Err(SrbError::Invalid(format!(
                "held-out period {}-{} of region {} lies outside the estimated years",
                o.period_start, o.period_end, o.region_id
            )));
        }
        let (i0, i1) = (
            (first - years.start) as usize,
            (last - years.start) as usize,
        );
        let means: Vec<f64> = draws
            .iter()
            .map(|d| {
                let path = draws.theta_path(d, r, b);
                mean(&path[i0..=i1])
            })
            .collect();
        let log_r = o.log_ratio();
        let pit = mean(
            &means
                .iter()
                .map(|m| {
                    if o.log_se > 0.0 {
                        normal.cdf((log_r - m.ln()) / o.log_se)
                    } else if log_r < m.ln() {
                        0.0
                    } else if log_r > m.ln() {
                        1.0
                    } else {
                        0.5
                    }
                })
                .collect::<Vec<_>>(),
        );
        let period_mean = Interval::from_samples(means);
        checks.push(ObservationCheck {
            region_id: o.region_id.clone(),
            source_id: o.source_id.clone(),
            period_start: o.period_start,
            period_end: o.period_end,
            ratio: o.ratio,
            period_mean,
            pit,
            covered: (TAIL..=1.0 - TAIL).contains(&pit),
            error: o.ratio - period_mean.median,
        });
    }

    let n = checks.len() as f64;
    let share =
        |f: &dyn Fn(&ObservationCheck) -> bool| checks.iter().filter(|c| f(c)).count() as f64 / n;
    let errors: Vec<f64> = checks.iter().map(|c| c.error).collect();
    Ok(CoverageReport {
        n_held_out: checks.len(),
        coverage_percent: 100.0 * share(&|c| c.covered),
        mean_error: mean(&errors),
        median_absolute_error: quantile_sorted(&sorted(errors.iter().map(|e| e.abs())), 0.5),
        share_below: share(&|c| c.pit < TAIL),
        share_above: share(&|c| c.pit > 1.0 - TAIL),
        observations: checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::testing::fixture;

    fn held(ratio: f64, se: f64) -> SrbObservation {
        SrbObservation::new("A", 2000, 2001, ratio, se, 10_000, "S")
    }

    #[test]
    fn ratio_at_median_is_covered() {
        let d = fixture(&[false; 4], &[2000.0; 4]);
        let r = coverage_report(&d, &[held(1.049, 0.02)]).unwrap();
        assert!((r.observations[0].pit - 0.5).abs() < 1e-12);
        assert_eq!(r.coverage_percent, 100.0);
        assert!(r.mean_error.abs() < 1e-12);
    }

    #[test]
    fn zero_width_and_far_off_is_not_covered() {
        let d = fixture(&[false; 4], &[2000.0; 4]);
        let iv = Interval::from_samples(d.iter().map(|_| 1.049));
        assert_eq!(iv.lower95, iv.upper95);
        let r =
            coverage_report(&d, &[held(1.12, 0.02), held(0.99, 0.02), held(1.05, 0.0)]).unwrap();
        assert_eq!(r.coverage_percent, 0.0);
        assert!((r.share_above - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.share_below - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pit_matches_lognormal_cdf() {
        let d = fixture(&[false; 2], &[2000.0; 2]);
        let r = coverage_report(&d, &[held(1.08, 0.02)]).unwrap();
        let z = ((1.08f64).ln() - (1.049f64).ln()) / 0.02;
        let oracle = 0.5 * (1.0 + statrs::function::erf::erf(z / 2f64.sqrt()));
        assert!((r.observations[0].pit - oracle).abs() < 1e-12);
    }

    #[test]
    fn outside_span_is_rejected() {
        let d = fixture(&[false; 2], &[2000.0; 2]);
        let o = SrbObservation::new("A", 1990, 1995, 1.05, 0.02, 10, "S");
        assert!(coverage_report(&d, &[o]).is_err());
        let o = SrbObservation::new("B", 2000, 2000, 1.05, 0.02, 10, "S");
        assert!(coverage_report(&d, &[o]).is_err());
    }
}
