use std::collections::BTreeSet;

use serde::Serialize;

use crate::data::tfr::find_series;
use crate::data::{SrbObservation, TfrSeries};
use crate::error::{Result, SrbError};
use crate::model::density::LN_SQRT_2PI;
use crate::model::{onset_prior_mean, ModelConfig, YearRange};

/// An observation mapped onto the estimation year lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeObservation {
    pub first: usize,
    pub last: usize,
    pub log_ratio: f64,
    pub log_se: f64,
    /// `-ln(se) - ln sqrt(2 pi)`
    pub(crate) ln_norm: f64,
}

impl LatticeObservation {
    /// Normal log-density against the period-mean of `theta`.
    #[inline]
    pub fn loglik(&self, theta: &[f64]) -> f64 {
        let span = &theta[self.first..=self.last];
        let mean = span.iter().sum::<f64>() / span.len() as f64;
        let z = (self.log_ratio - mean.ln()) / self.log_se;
        self.ln_norm - 0.5 * z * z
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionData {
    pub region_id: String,
    pub observations: Vec<LatticeObservation>,
    /// Observation indices touching each year of the lattice.
    pub by_year: Vec<Vec<usize>>,
    pub onset_mean: f64,
    #[serde(skip)]
    pub tfr: TfrSeries,
}

/// Observations and TFR arranged for the sampler.
#[derive(Debug, Clone, Serialize)]
pub struct ModelData {
    pub years: YearRange,
    pub regions: Vec<RegionData>,
    pub warnings: Vec<String>,
}

impl ModelData {
    /// Regions are those of the TFR input, sorted by id. Observations outside the
    /// estimation years are clipped; those entirely outside are dropped.
    pub fn new(
        observations: &[SrbObservation],
        tfr: &[TfrSeries],
        config: &ModelConfig,
    ) -> Result<Self> {
        config.validate()?;
        let years = config.year_range;
        let mut warnings = Vec::new();

        let observed: BTreeSet<&str> = observations.iter().map(|o| o.region_id.as_str()).collect();
        for r in &observed {
            if find_series(tfr, r).is_none() {
                return Err(SrbError::MissingTfr(r.to_string()));
            }
        }
        let mut region_ids: Vec<&str> = tfr.iter().map(|s| s.region_id.as_str()).collect();
        region_ids.sort_unstable();
        region_ids.dedup();
        if region_ids.is_empty() {
            return Err(SrbError::Invalid(
                "no regions: the TFR input is empty".into(),
            ));
        }

        let mut regions = Vec::with_capacity(region_ids.len());
        for id in region_ids {
            let series = find_series(tfr, id).expect("listed");
            if !series.covers(years.start, years.end) {
                return Err(SrbError::TfrInvalid {
                    region: id.to_string(),
                    message: format!(
                        "covers {}-{}, but the estimation years {}-{} are required",
                        series.first_year,
                        series.last_year(),
                        years.start,
                        years.end
                    ),
                });
            }
            let mut lattice = Vec::new();
            for o in observations.iter().filter(|o| o.region_id == id) {
                let start = o.period_start.max(years.start);
                let end = o.period_end.min(years.end);
                if start > end {
                    warnings.push(format!(
                        "region {id}: observation {}-{} ({}) lies outside the estimation years and was dropped",
                        o.period_start, o.period_end, o.source_id
                    ));
                    continue;
                }
                if start != o.period_start || end != o.period_end {
                    warnings.push(format!(
                        "region {id}: observation {}-{} ({}) clipped to {start}-{end}",
                        o.period_start, o.period_end, o.source_id
                    ));
                }
                lattice.push(LatticeObservation {
                    first: years.index_of(start).expect("clipped"),
                    last: years.index_of(end).expect("clipped"),
                    log_ratio: o.ratio.ln(),
                    log_se: o.log_se,
                    ln_norm: -o.log_se.ln() - LN_SQRT_2PI,
                });
            }
            let mut by_year = vec![Vec::new(); years.len()];
            for (i, o) in lattice.iter().enumerate() {
                for slot in &mut by_year[o.first..=o.last] {
                    slot.push(i);
                }
            }
            regions.push(RegionData {
                region_id: id.to_string(),
                observations: lattice,
                by_year,
                onset_mean: onset_prior_mean(series, config.onset_reference_tfr),
                tfr: series.clone(),
            });
        }
        Ok(ModelData {
            years,
            regions,
            warnings,
        })
    }

    pub fn region_ids(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.region_id.clone()).collect()
    }

    pub fn n_observations(&self) -> usize {
        self.regions.iter().map(|r| r.observations.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::obs_loglik;

    fn tfr(id: &str) -> TfrSeries {
        TfrSeries::new(id, 1970, vec![3.0; 81]).unwrap()
    }

    #[test]
    fn clipping_and_missing_tfr() {
        let cfg = ModelConfig::default();
        let obs = vec![
            SrbObservation::new("A", 1976, 1982, 1.05, 0.02, 100, "S"),
            SrbObservation::new("A", 1970, 1975, 1.05, 0.02, 100, "S"),
            SrbObservation::new("A", 2000, 2000, 1.05, 0.02, 100, "S"),
        ];
        let d = ModelData::new(&obs, &[tfr("A"), tfr("B")], &cfg).unwrap();
        assert_eq!(d.region_ids(), vec!["A", "B"]);
        assert_eq!(d.regions[0].observations.len(), 2);
        assert_eq!(
            (
                d.regions[0].observations[0].first,
                d.regions[0].observations[0].last
            ),
            (0, 2)
        );
        assert_eq!(d.warnings.len(), 2);
        assert_eq!(d.regions[0].by_year[1], vec![0]);
        assert!(d.regions[1].observations.is_empty());

        let err = ModelData::new(&obs, &[tfr("B")], &cfg).unwrap_err();
        assert!(matches!(err, SrbError::MissingTfr(ref r) if r == "A"));
    }

    #[test]
    fn lattice_loglik_matches_single_year_density() {
        let o = SrbObservation::new("A", 2000, 2000, 1.1, 0.047, 100, "S");
        let d = ModelData::new(
            std::slice::from_ref(&o),
            &[tfr("A")],
            &ModelConfig::default(),
        )
        .unwrap();
        let lo = &d.regions[0].observations[0];
        let mut theta = vec![1.0; 37];
        theta[20] = 1.049;
        assert!((lo.loglik(&theta) - obs_loglik(&o, 1.049)).abs() < 1e-12);
    }
}
