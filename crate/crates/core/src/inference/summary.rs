//! Posterior summaries of sampled draws.

use serde::{Deserialize, Serialize};

use super::draws::PosteriorDraws;
use crate::data::TfrSeries;
use crate::error::{Result, SrbError};
use crate::stats::{lower_quantile_sorted, sorted, Interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionYearEstimate {
    pub region_id: String,
    pub year: i32,
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
}

pub const ESTIMATES_HEADER: [&str; 5] = ["region_id", "year", "median", "lower95", "upper95"];

fn ensure_nonempty(draws: &PosteriorDraws) -> Result<()> {
    if draws.n_draws() == 0 {
        Err(SrbError::Invalid("posterior draws are empty".into()))
    } else {
        Ok(())
    }
}

fn region_index(draws: &PosteriorDraws, region_id: &str) -> Result<usize> {
    draws.region_index(region_id).ok_or_else(|| {
        SrbError::Invalid(format!("region {region_id} is not in the posterior draws"))
    })
}

/// Median and central 95% interval of the sex ratio for every region-year,
/// ordered by region then year.
pub fn srb_estimates(draws: &PosteriorDraws) -> Result<Vec<RegionYearEstimate>> {
    ensure_nonempty(draws)?;
    let b = draws.config.baseline_b;
    let n = draws.n_years();
    let mut out = Vec::with_capacity(draws.regions.len() * n);
    for (r, region_id) in draws.regions.iter().enumerate() {
        let paths: Vec<Vec<f64>> = draws.iter().map(|d| draws.theta_path(d, r, b)).collect();
        for (t, year) in draws.years.years().enumerate() {
            let iv = Interval::from_samples(paths.iter().map(|p| p[t]));
            out.push(RegionYearEstimate {
                region_id: region_id.clone(),
                year,
                median: iv.median,
                lower95: iv.lower95,
                upper95: iv.upper95,
            });
        }
    }
    Ok(out)
}

pub fn write_estimates<W: std::io::Write>(
    writer: W,
    estimates: &[RegionYearEstimate],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| SrbError::Csv {
        path: "estimates".into(),
        message: e.to_string(),
    };
    w.write_record(ESTIMATES_HEADER).map_err(io)?;
    for e in estimates {
        w.write_record([
            e.region_id.clone(),
            e.year.to_string(),
            e.median.to_string(),
            e.lower95.to_string(),
            e.upper95.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| SrbError::Csv {
        path: "estimates".into(),
        message: e.to_string(),
    })
}

/// Fraction of draws, pooled over chains, in which the region is inflated.
pub fn inflation_probability(draws: &PosteriorDraws, region_id: &str) -> Result<f64> {
    ensure_nonempty(draws)?;
    let r = region_index(draws, region_id)?;
    let inflated = draws.iter().filter(|d| d.delta[r]).count();
    Ok(inflated as f64 / draws.n_draws() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetSummary {
    pub region_id: String,
    /// False when no draw has the region inflated; the fields below are then absent.
    pub available: bool,
    pub inflated_draws: usize,
    pub median: Option<i32>,
    pub lower95: Option<i32>,
    pub upper95: Option<i32>,
    pub tfr_at_median_onset: Option<f64>,
}

/// Onset-year quantiles over the inflated draws only.
///
/// Quantiles are order statistics (the lower one on ties, so an even count of
/// distinct years picks the earlier middle value), rounded to whole years.
pub fn onset_summary(
    draws: &PosteriorDraws,
    region_id: &str,
    tfr: Option<&TfrSeries>,
) -> Result<OnsetSummary> {
    ensure_nonempty(draws)?;
    let r = region_index(draws, region_id)?;
    let gammas = sorted(
        draws
            .iter()
            .filter(|d| d.delta[r])
            .map(|d| d.transition[r].gamma),
    );
    if gammas.is_empty() {
        return Ok(OnsetSummary {
            region_id: region_id.to_string(),
            available: false,
            inflated_draws: 0,
            median: None,
            lower95: None,
            upper95: None,
            tfr_at_median_onset: None,
        });
    }
    let year = |p: f64| lower_quantile_sorted(&gammas, p).round() as i32;
    let median = year(0.5);
    Ok(OnsetSummary {
        region_id: region_id.to_string(),
        available: true,
        inflated_draws: gammas.len(),
        median: Some(median),
        lower95: Some(year(0.025)),
        upper95: Some(year(0.975)),
        tfr_at_median_onset: tfr.and_then(|s| s.tfr_at(median)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::testing::fixture;

    #[test]
    fn inflation_fraction() {
        let d = fixture(&[true; 4], &[2000.0; 4]);
        assert_eq!(inflation_probability(&d, "A").unwrap(), 1.0);
        let d = fixture(&[true, false, true, false], &[2000.0; 4]);
        assert_eq!(inflation_probability(&d, "A").unwrap(), 0.5);
        assert!(inflation_probability(&d, "B").is_err());
    }

    #[test]
    fn degenerate_draws_give_zero_width() {
        let d = fixture(&[false; 4], &[2000.0; 4]);
        for e in srb_estimates(&d).unwrap() {
            assert_eq!(e.median, 1.049);
            assert_eq!(e.lower95, e.median);
            assert_eq!(e.upper95, e.median);
        }
    }

    #[test]
    fn onset_shared_year() {
        let d = fixture(&[true; 6], &[2001.0; 6]);
        let s = onset_summary(&d, "A", None).unwrap();
        assert_eq!(
            (s.median, s.lower95, s.upper95),
            (Some(2001), Some(2001), Some(2001))
        );
    }

    #[test]
    fn onset_uniform_years_tie_to_lower() {
        let gammas: Vec<f64> = (2000..2010).map(f64::from).collect();
        let d = fixture(&[true; 10], &gammas);
        let tfr = TfrSeries::new("A", 1990, vec![4.0; 40]).unwrap();
        let s = onset_summary(&d, "A", Some(&tfr)).unwrap();
        // ten ordered values: the 5th is 2004, the 6th 2005; the lower one wins
        assert_eq!(s.median, Some(2004));
        assert_eq!(s.tfr_at_median_onset, Some(4.0));
    }

    #[test]
    fn onset_uses_inflated_draws_only() {
        let d = fixture(
            &[false, true, false, true],
            &[1900.0, 2003.0, 1900.0, 2003.0],
        );
        let s = onset_summary(&d, "A", None).unwrap();
        assert_eq!(s.inflated_draws, 2);
        assert_eq!(s.median, Some(2003));
        let none = onset_summary(&fixture(&[false; 2], &[2000.0; 2]), "A", None).unwrap();
        assert!(!none.available && none.median.is_none());
    }
}
