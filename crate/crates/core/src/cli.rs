//! `srb` command-line interface.
//!
//! Every command reads its inputs, computes everything in memory and only then
//! writes into the output directory, so a failed run leaves no partial output.
//! Each output directory gets a `manifest.json` recording the effective
//! configuration, seed, input digests and tool version.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::data::{
    load_tfr, parse_birth_records, preprocess, read_observations, write_tfr, SrbObservation,
    TfrSeries,
};
use crate::error::{Result, SrbError};
use crate::inference::{
    block_diagnostics, inflation_probability, load_draws, onset_summary, run_mcmc, save_draws,
    srb_estimates, BlockDiagnostic, McmcSettings, ModelData, PosteriorDraws,
};
use crate::model::ModelConfig;
use crate::projection::{project, summarize_projection, write_projections};
use crate::validation::{
    out_of_sample_validation, simulate_dataset, SimulationDesign, SimulationTruth,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NONCONVERGED: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Largest acceptable split R-hat.
pub const RHAT_THRESHOLD: f64 = 1.05;

#[derive(Debug, Parser)]
#[command(
    name = "srb",
    version,
    about = "Estimate and project subnational sex ratios at birth"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn birth records into period observations with sampling errors.
    Preprocess(PreprocessArgs),
    /// Fit the model and write estimates, draws and diagnostics.
    Estimate(EstimateArgs),
    /// Extend saved draws to the projection horizon.
    Project(ProjectArgs),
    /// Hold out the most recent observations, refit and score them.
    Validate(ValidateArgs),
    /// Generate a synthetic dataset with known truth.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub births: PathBuf,
    /// Optional TFR table; when given, every observed region must appear in it.
    #[arg(long)]
    pub tfr: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub observations: PathBuf,
    #[arg(long)]
    pub tfr: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub settings: Option<PathBuf>,
    /// Seeds every chain; replaces any seed in the settings file.
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Exit with success even when some R-hat exceeds the threshold.
    #[arg(long)]
    pub allow_nonconverged: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value_t = 0.2)]
    pub holdout_fraction: f64,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Directory holding `draws.csv` and `draws.json`.
    #[arg(long)]
    pub draws: PathBuf,
    /// Defaults to the configuration stored with the draws.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub projection_end: Option<i32>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// How a command ended, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    Input(SrbError),
    NotConverged { worst: f64 },
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::NotConverged { .. } => EXIT_NONCONVERGED,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(e) => write!(f, "{e}"),
            Failure::NotConverged { worst } => write!(
                f,
                "not converged: largest R-hat {worst:.4} exceeds {RHAT_THRESHOLD} (outputs were written; rerun with more iterations or pass --allow-nonconverged)"
            ),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<SrbError> for Failure {
    fn from(e: SrbError) -> Self {
        Failure::Input(e)
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match catch_unwind(AssertUnwindSafe(|| run(&cli))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(f)) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            eprintln!("error: internal error: {msg}");
            EXIT_INTERNAL
        }
    }
}

pub fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Project(a) => cmd_project(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: Option<u64>,
    config: &'a ModelConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    settings: Option<&'a McmcSettings>,
    #[serde(skip_serializing_if = "Value::is_null")]
    options: Value,
    inputs: BTreeMap<String, InputDigest>,
}

fn digest(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(|e| SrbError::io(path, e))?;
    let hash = Sha256::digest(&bytes);
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

fn digests(inputs: &[(&str, &Path)]) -> Result<BTreeMap<String, InputDigest>> {
    inputs
        .iter()
        .map(|(k, p)| Ok((k.to_string(), digest(p)?)))
        .collect()
}

fn load_config(path: Option<&Path>) -> Result<ModelConfig> {
    match path {
        Some(p) => ModelConfig::load(p),
        None => Ok(ModelConfig::default()),
    }
}

fn load_settings(path: Option<&Path>, seed: u64) -> Result<McmcSettings> {
    let mut s = match path {
        Some(p) => McmcSettings::load(p)?,
        None => McmcSettings::default(),
    };
    s.seed = seed;
    s.validate()?;
    Ok(s)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SrbError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| SrbError::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| SrbError::json(path.display().to_string(), e))?;
    write_text(path, &(text + "\n"))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| SrbError::io(path, e))
}

fn input_paths<'a>(
    fixed: &[(&'a str, &'a Path)],
    optional: &[(&'a str, Option<&'a PathBuf>)],
) -> Vec<(&'a str, &'a Path)> {
    let mut v = fixed.to_vec();
    v.extend(
        optional
            .iter()
            .filter_map(|(k, p)| p.map(|p| (*k, p.as_path()))),
    );
    v
}

fn cmd_preprocess(a: &PreprocessArgs) -> std::result::Result<(), Failure> {
    let config = load_config(a.config.as_deref())?;
    let records = parse_birth_records(&a.births)?;
    let (observations, report) = preprocess(&records, &config.preprocess)?;
    if let Some(tfr_path) = &a.tfr {
        let tfr = load_tfr(tfr_path)?;
        for o in &observations {
            if !tfr.iter().any(|s| s.region_id == o.region_id) {
                return Err(SrbError::MissingTfr(o.region_id.clone()).into());
            }
        }
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let inputs = input_paths(
        &[("births", &a.births)],
        &[("tfr", a.tfr.as_ref()), ("config", a.config.as_ref())],
    );
    let manifest = RunManifest {
        tool: "srb",
        version: env!("CARGO_PKG_VERSION"),
        command: "preprocess",
        seed: None,
        config: &config,
        settings: None,
        options: Value::Null,
        inputs: digests(&inputs)?,
    };
    let obs_csv =
        csv_bytes(|buf| crate::data::observations::write_observations_to(buf, &observations))?;

    create_dir(&a.out)?;
    write_bytes(&a.out.join("observations.csv"), &obs_csv)?;
    write_json(&a.out.join("report.json"), &report)?;
    write_json(&a.out.join("manifest.json"), &manifest)?;
    Ok(())
}

/// Reads the fit inputs shared by `estimate` and `validate`.
fn fit_inputs(
    a: &FitArgs,
) -> Result<(
    ModelConfig,
    McmcSettings,
    Vec<SrbObservation>,
    Vec<TfrSeries>,
)> {
    let config = load_config(a.config.as_deref())?;
    let settings = load_settings(a.settings.as_deref(), a.seed)?;
    let observations = read_observations(&a.observations)?;
    let tfr = load_tfr(&a.tfr)?;
    Ok((config, settings, observations, tfr))
}

fn fit_digests(a: &FitArgs) -> Result<BTreeMap<String, InputDigest>> {
    digests(&input_paths(
        &[("observations", &a.observations), ("tfr", &a.tfr)],
        &[
            ("config", a.config.as_ref()),
            ("settings", a.settings.as_ref()),
        ],
    ))
}

fn worst_rhat(blocks: &[BlockDiagnostic]) -> f64 {
    blocks.iter().map(|b| b.max_rhat).fold(1.0, f64::max)
}

fn diagnostics_json(draws: &PosteriorDraws, blocks: &[BlockDiagnostic]) -> Value {
    let worst = worst_rhat(blocks);
    json!({
        "rhat_threshold": RHAT_THRESHOLD,
        "max_rhat": worst,
        "converged": worst <= RHAT_THRESHOLD,
        "retained_draws": draws.n_draws(),
        "blocks": blocks,
        "acceptance": draws.chains.iter().map(|c| json!({
            "chain": c.chain,
            "log_phi": c.acceptance.log_phi.rate(),
            "transition": c.acceptance.transition.rate(),
            "delta_flip": c.acceptance.delta_flip.rate(),
            "hyper": c.acceptance.hyper.rate(),
            "delta_gibbs_switches": c.acceptance.delta_gibbs_switches,
        })).collect::<Vec<_>>(),
    })
}

fn region_summaries(draws: &PosteriorDraws, tfr: &[TfrSeries]) -> Result<Value> {
    let mut out = Vec::new();
    for region in &draws.regions {
        let series = tfr.iter().find(|s| &s.region_id == region);
        out.push(json!({
            "region_id": region,
            "inflation_probability": inflation_probability(draws, region)?,
            "onset": onset_summary(draws, region, series)?,
        }));
    }
    Ok(Value::Array(out))
}

fn cmd_estimate(a: &EstimateArgs) -> std::result::Result<(), Failure> {
    let a = &a.fit;
    let (config, settings, observations, tfr) = fit_inputs(a)?;
    let inputs = fit_digests(a)?;
    let data = ModelData::new(&observations, &tfr, &config)?;
    for w in &data.warnings {
        log::warn!("{w}");
    }
    let draws = run_mcmc(&data, &config, &settings, a.threads)?;
    let blocks = block_diagnostics(&draws)?;
    let diagnostics = diagnostics_json(&draws, &blocks);
    let estimates = srb_estimates(&draws)?;
    let est_csv = csv_bytes(|buf| crate::inference::summary::write_estimates(buf, &estimates))?;
    let regions = region_summaries(&draws, &tfr)?;
    let manifest = RunManifest {
        tool: "srb",
        version: env!("CARGO_PKG_VERSION"),
        command: "estimate",
        seed: Some(a.seed),
        config: &config,
        settings: Some(&settings),
        options: Value::Null,
        inputs,
    };

    create_dir(&a.out)?;
    write_bytes(&a.out.join("estimates.csv"), &est_csv)?;
    write_json(&a.out.join("diagnostics.json"), &diagnostics)?;
    write_json(&a.out.join("regions.json"), &regions)?;
    save_draws(&a.out.join("draws"), &draws, Some(diagnostics.clone()))?;
    write_json(&a.out.join("manifest.json"), &manifest)?;

    let worst = worst_rhat(&blocks);
    if worst > RHAT_THRESHOLD && !a.allow_nonconverged {
        return Err(Failure::NotConverged { worst });
    }
    Ok(())
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SrbError::Invalid(format!("thread pool: {e}")))?
            .install(f)),
        None => Ok(f()),
    }
}

fn cmd_project(a: &ProjectArgs) -> std::result::Result<(), Failure> {
    let draws = load_draws(&a.draws)?;
    let mut config = match &a.config {
        Some(p) => ModelConfig::load(p)?,
        None => draws.config.clone(),
    };
    if let Some(end) = a.projection_end {
        config.projection_end = end;
    }
    let set = in_pool(a.threads, || project(&draws, &config, a.seed))??;
    let summary = summarize_projection(&set)?;
    let proj_csv = csv_bytes(|buf| write_projections(buf, &summary.rows))?;
    let (draws_csv, draws_json) = (a.draws.join("draws.csv"), a.draws.join("draws.json"));
    let inputs = input_paths(
        &[("draws_csv", &draws_csv), ("draws_json", &draws_json)],
        &[("config", a.config.as_ref())],
    );
    let manifest = RunManifest {
        tool: "srb",
        version: env!("CARGO_PKG_VERSION"),
        command: "project",
        seed: Some(a.seed),
        config: &config,
        settings: None,
        options: json!({ "projection_end": config.projection_end }),
        inputs: digests(&inputs)?,
    };

    create_dir(&a.out)?;
    write_bytes(&a.out.join("projections.csv"), &proj_csv)?;
    write_json(&a.out.join("peaks.json"), &summary.peaks)?;
    write_json(&a.out.join("manifest.json"), &manifest)?;
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> std::result::Result<(), Failure> {
    let fit = &a.fit;
    let (config, settings, observations, tfr) = fit_inputs(fit)?;
    let inputs = fit_digests(fit)?;
    let (report, _) = out_of_sample_validation(
        &observations,
        &tfr,
        &config,
        &settings,
        a.holdout_fraction,
        fit.threads,
    )?;
    let manifest = RunManifest {
        tool: "srb",
        version: env!("CARGO_PKG_VERSION"),
        command: "validate",
        seed: Some(fit.seed),
        config: &config,
        settings: Some(&settings),
        options: json!({ "holdout_fraction": a.holdout_fraction }),
        inputs,
    };

    create_dir(&fit.out)?;
    write_json(&fit.out.join("validation.json"), &report)?;
    write_json(&fit.out.join("manifest.json"), &manifest)?;

    let worst = worst_rhat(&report.diagnostics);
    if worst > RHAT_THRESHOLD && !fit.allow_nonconverged {
        return Err(Failure::NotConverged { worst });
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| SrbError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SrbError::json(path.display().to_string(), e))
}

fn cmd_simulate(a: &SimulateArgs) -> std::result::Result<(), Failure> {
    let config = load_config(a.config.as_deref())?;
    let truth: SimulationTruth = read_json(&a.truth)?;
    let design: SimulationDesign = read_json(&a.design)?;
    let sim = simulate_dataset(&truth, &design, &config, a.seed)?;
    let obs_csv =
        csv_bytes(|buf| crate::data::observations::write_observations_to(buf, &sim.observations))?;
    let tfr_csv = csv_bytes(|buf| write_tfr(buf, &sim.tfr))?;
    let inputs = input_paths(
        &[("truth", &a.truth), ("design", &a.design)],
        &[("config", a.config.as_ref())],
    );
    let manifest = RunManifest {
        tool: "srb",
        version: env!("CARGO_PKG_VERSION"),
        command: "simulate",
        seed: Some(a.seed),
        config: &config,
        settings: None,
        options: serde_json::to_value(&design).map_err(|e| SrbError::json("design", e))?,
        inputs: digests(&inputs)?,
    };

    create_dir(&a.out)?;
    write_bytes(&a.out.join("observations.csv"), &obs_csv)?;
    write_bytes(&a.out.join("tfr.csv"), &tfr_csv)?;
    write_json(&a.out.join("truth.json"), &sim.truth)?;
    if let Some(records) = &sim.records {
        crate::data::records::write_birth_records(&a.out.join("births.csv"), records)?;
    }
    write_json(&a.out.join("manifest.json"), &manifest)?;
    Ok(())
}
