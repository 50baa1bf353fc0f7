//! Synthetic datasets with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::{
    jackknife_log_se, ratio_cv, BirthRecord, Sex, SexTotals, SrbObservation, TfrSeries,
};
use crate::error::{Result, SrbError};
use crate::model::{
    simulate_ar1, theta, trapezoid_alpha, ModelConfig, TransitionParams, YearRange,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionTruth {
    pub region_id: String,
    pub delta: bool,
    pub transition: TransitionParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationTruth {
    pub regions: Vec<RegionTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDesign {
    pub year_start: i32,
    pub year_end: i32,
    /// Consecutive periods per region; the year range is split as evenly as possible.
    pub observations_per_region: usize,
    pub births_per_observation: u64,
    pub clusters_per_observation: usize,
    /// Also emit individual birth records for the preprocessing pipeline.
    #[serde(default)]
    pub record_level: bool,
    /// Collection years of the simulated surveys. Each period is attributed to
    /// the first survey collected in or after its last year. When empty, every
    /// period counts as collected in its own last year.
    #[serde(default)]
    pub survey_years: Vec<i32>,
}

impl SimulationDesign {
    pub fn validate(&self) -> Result<()> {
        let n_years = self.year_end - self.year_start + 1;
        if n_years < 1 {
            return Err(SrbError::Config(
                "design year_end precedes year_start".into(),
            ));
        }
        if self.observations_per_region == 0 || self.observations_per_region > n_years as usize {
            return Err(SrbError::Config(format!(
                "observations_per_region must be between 1 and {n_years}"
            )));
        }
        if self.births_per_observation == 0 || self.clusters_per_observation == 0 {
            return Err(SrbError::Config("design sizes must be positive".into()));
        }
        if let Some(last) = self.survey_years.iter().max() {
            if *last < self.year_end {
                return Err(SrbError::Config(format!(
                    "the latest survey year {last} precedes the design's last year {}",
                    self.year_end
                )));
            }
        }
        Ok(())
    }

    fn periods(&self) -> Vec<(i32, i32)> {
        let n_years = (self.year_end - self.year_start + 1) as usize;
        let k = self.observations_per_region;
        (0..k)
            .map(|i| {
                let first = self.year_start + (i * n_years / k) as i32;
                let last = self.year_start + ((i + 1) * n_years / k) as i32 - 1;
                (first, last)
            })
            .collect()
    }

    fn survey_for(&self, period_end: i32) -> i32 {
        let mut years = self.survey_years.clone();
        years.sort_unstable();
        years
            .into_iter()
            .find(|y| *y >= period_end)
            .unwrap_or(period_end)
    }
}

/// Generated paths of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRegion {
    pub region_id: String,
    pub delta: bool,
    pub transition: TransitionParams,
    pub log_phi: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub seed: u64,
    pub years: YearRange,
    pub regions: Vec<SimulatedRegion>,
}

impl SimulationRecord {
    pub fn region(&self, region_id: &str) -> Option<&SimulatedRegion> {
        self.regions.iter().find(|r| r.region_id == region_id)
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub observations: Vec<SrbObservation>,
    pub records: Option<Vec<BirthRecord>>,
    pub tfr: Vec<TfrSeries>,
    pub truth: SimulationRecord,
}

/// Synthetic fertility decline crossing the onset reference level in the onset year.
///
/// TFR falls by 0.1 per year and is held within [1.5, 6.5].
pub fn synthetic_tfr(
    region_id: &str,
    onset_year: f64,
    reference: f64,
    years: YearRange,
) -> Result<TfrSeries> {
    let values = years
        .years()
        .map(|y| (reference - 0.1 * (y as f64 - onset_year)).clamp(1.5, 6.5))
        .collect();
    TfrSeries::new(region_id, years.start, values)
}

/// Probability that a birth is male when the sex ratio is `theta`.
pub fn male_probability(theta: f64) -> f64 {
    theta / (1.0 + theta)
}

/// Splits `n` items over `k` equally likely cells.
fn multinomial_equal<R: Rng + ?Sized>(rng: &mut R, n: u64, k: usize) -> Vec<u64> {
    let mut left = n;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let cells = (k - i) as f64;
        let x = if i + 1 == k || left == 0 {
            left
        } else {
            Binomial::new(left, 1.0 / cells)
                .expect("valid binomial")
                .sample(rng)
        };
        out.push(x);
        left -= x;
    }
    out
}

/// Draws the fluctuation paths and the observed counts for every region.
///
/// The same seed always reproduces the same dataset.
pub fn simulate_dataset(
    truth: &SimulationTruth,
    design: &SimulationDesign,
    config: &ModelConfig,
    seed: u64,
) -> Result<SimulatedDataset> {
    design.validate()?;
    if truth.regions.is_empty() {
        return Err(SrbError::Config("truth lists no regions".into()));
    }
    for r in &truth.regions {
        if !r.transition.is_valid() {
            return Err(SrbError::Config(format!(
                "invalid transition parameters for region {}",
                r.region_id
            )));
        }
    }
    let years = YearRange {
        start: design.year_start,
        end: design.year_end,
    };
    let tfr_years = YearRange {
        start: years.start.min(config.year_range.start),
        end: years
            .end
            .max(config.year_range.end)
            .max(config.projection_end),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observations = Vec::new();
    let mut records = design.record_level.then(Vec::new);
    let mut regions = Vec::new();
    let mut tfr = Vec::new();

    for rt in &truth.regions {
        let log_phi = simulate_ar1(&mut rng, years.len(), config.ar1_rho, config.ar1_sd);
        let theta_path: Vec<f64> = years
            .years()
            .zip(&log_phi)
            .map(|(y, x)| {
                theta(
                    config.baseline_b,
                    *x,
                    rt.delta,
                    trapezoid_alpha(y as f64, &rt.transition),
                )
            })
            .collect();

        for (k, (first, last)) in design.periods().into_iter().enumerate() {
            let span = &theta_path[(first - years.start) as usize..=(last - years.start) as usize];
            let mean_theta = span.iter().sum::<f64>() / span.len() as f64;
            let n = design.births_per_observation;
            let males = Binomial::new(n, male_probability(mean_theta))
                .expect("valid binomial")
                .sample(&mut rng);
            let male_cells = multinomial_equal(&mut rng, males, design.clusters_per_observation);
            let female_cells =
                multinomial_equal(&mut rng, n - males, design.clusters_per_observation);
            let clusters: Vec<SexTotals> = male_cells
                .iter()
                .zip(&female_cells)
                .map(|(m, f)| SexTotals::new(*m as f64, *f as f64))
                .collect();

            let (m, f) = (males as f64, (n - males) as f64);
            let ratio = if m > 0.0 && f > 0.0 {
                m / f
            } else {
                (m + 0.5) / (f + 0.5)
            };
            let log_se = match jackknife_log_se(&clusters) {
                Ok(est) if est.log_se > 0.0 => est.log_se,
                _ => ratio_cv(ratio, n).min(1.0),
            };
            let survey_year = design.survey_for(last);
            let source_id = format!("SIM{survey_year}");
            observations.push(SrbObservation::new(
                &rt.region_id,
                first,
                last,
                ratio,
                log_se,
                n,
                &source_id,
            ));

            if let Some(out) = records.as_mut() {
                for (c, (mc, fc)) in male_cells.iter().zip(&female_cells).enumerate() {
                    for (sex, count) in [(Sex::Male, *mc), (Sex::Female, *fc)] {
                        for _ in 0..count {
                            out.push(BirthRecord {
                                region_id: rt.region_id.clone(),
                                year: rng.random_range(first..=last),
                                cluster_id: format!("C{c}"),
                                stratum_id: format!("{}-{k}", rt.region_id),
                                weight: 1.0,
                                sex,
                                source_id: source_id.clone(),
                                survey_year,
                            });
                        }
                    }
                }
            }
        }

        tfr.push(synthetic_tfr(
            &rt.region_id,
            rt.transition.gamma,
            config.onset_reference_tfr,
            tfr_years,
        )?);
        regions.push(SimulatedRegion {
            region_id: rt.region_id.clone(),
            delta: rt.delta,
            transition: rt.transition,
            log_phi,
            theta: theta_path,
        });
    }

    Ok(SimulatedDataset {
        observations,
        records,
        tfr,
        truth: SimulationRecord {
            seed,
            years,
            regions,
        },
    })
}
