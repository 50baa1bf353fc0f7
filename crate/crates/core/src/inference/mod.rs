//! Posterior sampling, convergence diagnostics and summaries.

pub mod diagnostics;
pub mod draws;
pub mod model_data;
pub mod sampler;
pub mod settings;
pub mod summary;
#[cfg(test)]
pub(crate) mod testing;

pub use diagnostics::{block_diagnostics, ess, rhat, BlockDiagnostic, Parameter, Rhat};
pub use draws::{load_draws, save_draws, ChainDraws, Draw, PosteriorDraws};
pub use model_data::ModelData;
pub use sampler::run_mcmc;
pub use settings::McmcSettings;
pub use summary::{
    inflation_probability, onset_summary, srb_estimates, OnsetSummary, RegionYearEstimate,
};
