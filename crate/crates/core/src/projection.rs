//! Forward simulation of posterior draws to the projection horizon.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrbError};
use crate::inference::{Draw, PosteriorDraws};
use crate::model::{theta, trapezoid_alpha, ModelConfig, YearRange};
use crate::stats::Interval;

/// Sex ratio trajectories over the estimation and projection years.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    pub regions: Vec<String>,
    pub years: YearRange,
    pub last_estimation_year: i32,
    /// One entry per draw, region-major: `paths[d][region * n_years + year_index]`.
    pub paths: Vec<Vec<f64>>,
}

impl ProjectionSet {
    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn path(&self, draw: usize, region: usize) -> &[f64] {
        let n = self.n_years();
        &self.paths[draw][region * n..(region + 1) * n]
    }
}

/// Continues every draw to `config.projection_end`.
///
/// The fluctuation follows the AR(1) recursion from the draw's last value and
/// the transition is evaluated from the draw's own parameters. Draw `i` of
/// chain `c` uses stream `(c << 32) | i` of a generator seeded with `seed`, so
/// its trajectory does not depend on any other draw or on the thread count.
pub fn project(draws: &PosteriorDraws, config: &ModelConfig, seed: u64) -> Result<ProjectionSet> {
    let last = draws.years.end;
    if config.projection_end <= last {
        return Err(SrbError::Config(format!(
            "projection_end {} must be after the last estimation year {last}",
            config.projection_end
        )));
    }
    if draws.n_draws() == 0 {
        return Err(SrbError::Invalid("posterior draws are empty".into()));
    }
    let years = YearRange {
        start: draws.years.start,
        end: config.projection_end,
    };
    let jobs: Vec<(usize, usize, &Draw)> = draws
        .chains
        .iter()
        .flat_map(|c| {
            c.draws
                .iter()
                .enumerate()
                .map(move |(i, d)| (c.chain, i, d))
        })
        .collect();
    let paths = jobs
        .par_iter()
        .map(|(chain, i, d)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((*chain as u64) << 32) | *i as u64);
            project_draw(draws, config, d, years, &mut rng)
        })
        .collect();
    Ok(ProjectionSet {
        regions: draws.regions.clone(),
        years,
        last_estimation_year: last,
        paths,
    })
}

fn project_draw(
    draws: &PosteriorDraws,
    config: &ModelConfig,
    d: &Draw,
    years: YearRange,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n_est = draws.n_years();
    let mut out = Vec::with_capacity(draws.regions.len() * years.len());
    for r in 0..draws.regions.len() {
        let tp = &d.transition[r];
        let delta = d.delta[r];
        let mut x = *draws.log_phi(d, r).last().expect("nonempty year range");
        for (t, year) in years.years().enumerate() {
            if t < n_est {
                x = draws.log_phi(d, r)[t];
            } else {
                let z: f64 = StandardNormal.sample(rng);
                x = config.ar1_rho * x + config.ar1_sd * z;
            }
            out.push(theta(
                config.baseline_b,
                x,
                delta,
                trapezoid_alpha(year as f64, tp),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Estimate,
    Projection,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Estimate => "estimate",
            Phase::Projection => "projection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub region_id: String,
    pub year: i32,
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakYear {
    pub region_id: String,
    pub peak_year: i32,
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub rows: Vec<ProjectionRow>,
    pub peaks: Vec<PeakYear>,
}

pub const PROJECTIONS_HEADER: [&str; 6] =
    ["region_id", "year", "median", "lower95", "upper95", "phase"];

/// Quantiles per region-year and the year at which each median trajectory peaks.
///
/// Ties for the peak go to the earliest year.
pub fn summarize_projection(set: &ProjectionSet) -> Result<ProjectionSummary> {
    if set.paths.is_empty() {
        return Err(SrbError::Invalid("no projected trajectories".into()));
    }
    let n = set.n_years();
    let mut rows = Vec::with_capacity(set.regions.len() * n);
    let mut peaks = Vec::with_capacity(set.regions.len());
    for (r, region_id) in set.regions.iter().enumerate() {
        let mut best: Option<(i32, Interval)> = None;
        for (t, year) in set.years.years().enumerate() {
            let iv = Interval::from_samples((0..set.paths.len()).map(|d| set.path(d, r)[t]));
            if best.is_none_or(|(_, b)| iv.median > b.median) {
                best = Some((year, iv));
            }
            rows.push(ProjectionRow {
                region_id: region_id.clone(),
                year,
                median: iv.median,
                lower95: iv.lower95,
                upper95: iv.upper95,
                phase: if year <= set.last_estimation_year {
                    Phase::Estimate
                } else {
                    Phase::Projection
                },
            });
        }
        let (peak_year, iv) = best.expect("nonempty year range");
        peaks.push(PeakYear {
            region_id: region_id.clone(),
            peak_year,
            median: iv.median,
            lower95: iv.lower95,
            upper95: iv.upper95,
        });
    }
    Ok(ProjectionSummary { rows, peaks })
}

pub fn write_projections<W: std::io::Write>(writer: W, rows: &[ProjectionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| SrbError::Csv {
        path: "projections".into(),
        message: e.to_string(),
    };
    w.write_record(PROJECTIONS_HEADER).map_err(err)?;
    for row in rows {
        w.write_record([
            row.region_id.clone(),
            row.year.to_string(),
            row.median.to_string(),
            row.lower95.to_string(),
            row.upper95.to_string(),
            row.phase.as_str().to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| SrbError::Csv {
        path: "projections".into(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::testing::fixture;

    #[test]
    fn zero_innovation_decays_geometrically() {
        let mut d = fixture(&[false; 2], &[2000.0; 2]);
        for c in &mut d.chains {
            for dr in &mut c.draws {
                dr.log_phi = vec![0.0, 0.0, 0.01];
            }
        }
        let mut config = d.config.clone();
        config.ar1_sd = 0.0;
        config.projection_end = 2005;
        let set = project(&d, &config, 1).unwrap();
        let p = set.path(0, 0);
        assert_eq!(p.len(), 6);
        for (k, expected) in [0.009, 0.0081, 0.00729].iter().enumerate() {
            assert!((p[3 + k] - 1.049 * f64::exp(*expected)).abs() < 1e-12);
        }
    }

    #[test]
    fn uninflated_draw_is_fluctuation_only() {
        let d = fixture(&[false; 4], &[2001.0; 4]);
        let mut config = d.config.clone();
        config.projection_end = 2010;
        let set = project(&d, &config, 3).unwrap();
        // a finished transition in an inflated draw gives the same numbers
        let mut done = d.clone();
        for c in &mut done.chains {
            for dr in &mut c.draws {
                dr.delta[0] = true;
                dr.transition[0].gamma = 1980.0;
            }
        }
        let set2 = project(&done, &config, 3).unwrap();
        assert_eq!(set.paths, set2.paths);
    }

    #[test]
    fn subset_projects_identically() {
        let d = fixture(&[true, false, true, false, true, false], &[2001.0; 6]);
        let mut config = d.config.clone();
        config.projection_end = 2020;
        let full = project(&d, &config, 8).unwrap();
        let sub = project(&d.subset(|c, _| c == 0), &config, 8).unwrap();
        assert_eq!(sub.paths.len(), 3);
        assert_eq!(sub.paths[..], full.paths[..3]);
        let prefix = project(&d.subset(|_, i| i < 2), &config, 8).unwrap();
        assert_eq!(prefix.paths[2], full.paths[3]);
    }

    #[test]
    fn rejects_short_horizon() {
        let d = fixture(&[false; 2], &[2000.0; 2]);
        let mut config = d.config.clone();
        config.projection_end = 2002;
        assert!(project(&d, &config, 0).is_err());
        config.projection_end = 2003;
        let s = summarize_projection(&project(&d, &config, 0).unwrap()).unwrap();
        assert_eq!(
            s.rows
                .iter()
                .filter(|r| r.phase == Phase::Projection)
                .count(),
            1
        );
    }

    fn set_from(medians: &[f64]) -> ProjectionSet {
        ProjectionSet {
            regions: vec!["A".into()],
            years: YearRange {
                start: 2000,
                end: 2000 + medians.len() as i32 - 1,
            },
            last_estimation_year: 2000,
            paths: vec![medians.to_vec()],
        }
    }

    #[test]
    fn peak_rules() {
        let s = summarize_projection(&set_from(&[1.10, 1.09, 1.08])).unwrap();
        assert_eq!(s.peaks[0].peak_year, 2000);
        let s = summarize_projection(&set_from(&[1.05; 4])).unwrap();
        assert_eq!(s.peaks[0].peak_year, 2000);
        let s = summarize_projection(&set_from(&[1.05, 1.07, 1.08, 1.08, 1.06])).unwrap();
        assert_eq!(s.peaks[0].peak_year, 2002);
        assert_eq!(s.rows[0].phase, Phase::Estimate);
        assert_eq!(s.rows[1].phase, Phase::Projection);
    }
}
