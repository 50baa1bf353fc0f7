//! Out-of-sample validation and simulation studies.

pub mod coverage;
pub mod simulate;
pub mod split;

use serde::Serialize;

pub use coverage::{coverage_report, CoverageReport, ObservationCheck};
pub use simulate::{
    simulate_dataset, RegionTruth, SimulatedDataset, SimulationDesign, SimulationRecord,
    SimulationTruth,
};
pub use split::{split_out_of_sample, HeldOutEntry, Split};

use crate::data::{SrbObservation, TfrSeries};
use crate::error::Result;
use crate::inference::{run_mcmc, BlockDiagnostic, McmcSettings, ModelData, PosteriorDraws};
use crate::model::ModelConfig;

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub holdout_fraction: f64,
    pub n_observations: usize,
    pub n_training: usize,
    pub held_out: Vec<HeldOutEntry>,
    pub coverage: CoverageReport,
    pub diagnostics: Vec<BlockDiagnostic>,
}

/// Fits the model to the older observations and scores the most recent ones.
pub fn out_of_sample_validation(
    observations: &[SrbObservation],
    tfr: &[TfrSeries],
    config: &ModelConfig,
    settings: &McmcSettings,
    holdout_fraction: f64,
    threads: Option<usize>,
) -> Result<(ValidationReport, PosteriorDraws)> {
    let split = split_out_of_sample(observations, holdout_fraction)?;
    let data = ModelData::new(&split.training, tfr, config)?;
    let draws = run_mcmc(&data, config, settings, threads)?;
    let coverage = coverage_report(&draws, &split.held_out)?;
    let diagnostics = crate::inference::block_diagnostics(&draws)?;
    Ok((
        ValidationReport {
            holdout_fraction,
            n_observations: observations.len(),
            n_training: split.training.len(),
            held_out: split.manifest(),
            coverage,
            diagnostics,
        },
        draws,
    ))
}
