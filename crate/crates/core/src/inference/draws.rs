use std::collections::HashMap;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::settings::McmcSettings;
use crate::data::records::{column_indices, csv_error};
use crate::error::{Result, SrbError};
use crate::model::{theta, trapezoid_alpha, HyperState, ModelConfig, TransitionParams, YearRange};

/// One retained iteration of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    /// Region-major: `log_phi[region * n_years + year_index]`.
    pub log_phi: Vec<f64>,
    pub delta: Vec<bool>,
    pub pi: Vec<f64>,
    pub transition: Vec<TransitionParams>,
    pub hyper: HyperState,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockRate {
    pub proposed: u64,
    pub accepted: u64,
}

impl BlockRate {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Post-burn-in acceptance counts per update block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub log_phi: BlockRate,
    pub transition: BlockRate,
    pub delta_flip: BlockRate,
    pub hyper: BlockRate,
    pub delta_gibbs_switches: u64,
}

/// Every proposal scale of a chain, flattened in a fixed order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleSnapshot {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub chain: usize,
    pub draws: Vec<Draw>,
    pub acceptance: Acceptance,
    pub scales_at_burnin_end: ScaleSnapshot,
    pub scales_final: ScaleSnapshot,
}

/// Retained samples of every chain plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub regions: Vec<String>,
    pub years: YearRange,
    pub config: ModelConfig,
    pub settings: McmcSettings,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Draw> {
        self.chains.iter().flat_map(|c| c.draws.iter())
    }

    pub fn region_index(&self, region_id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r == region_id)
    }

    pub fn log_phi<'a>(&self, draw: &'a Draw, region: usize) -> &'a [f64] {
        let n = self.n_years();
        &draw.log_phi[region * n..(region + 1) * n]
    }

    /// Sex ratio path of one region in one draw over the estimation years.
    pub fn theta_path(&self, draw: &Draw, region: usize, b: f64) -> Vec<f64> {
        let tp = &draw.transition[region];
        let delta = draw.delta[region];
        self.years
            .years()
            .zip(self.log_phi(draw, region))
            .map(|(y, x)| theta(b, *x, delta, trapezoid_alpha(y as f64, tp)))
            .collect()
    }

    /// Keeps the listed chains and, within each, the listed draw positions.
    pub fn subset(&self, keep: impl Fn(usize, usize) -> bool) -> PosteriorDraws {
        let mut out = self.clone();
        for c in &mut out.chains {
            let chain = c.chain;
            c.draws = std::mem::take(&mut c.draws)
                .into_iter()
                .enumerate()
                .filter(|(i, _)| keep(chain, *i))
                .map(|(_, d)| d)
                .collect();
        }
        out
    }
}

const SHAPES: [&str; 4] = ["lambda1", "lambda2", "lambda3", "xi"];

/// Manifest stored next to `draws.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrawsManifest {
    pub regions: Vec<String>,
    pub years: YearRange,
    pub config: ModelConfig,
    pub settings: McmcSettings,
    pub draws_per_chain: Vec<usize>,
    pub acceptance: Vec<Acceptance>,
    pub scales_at_burnin_end: Vec<ScaleSnapshot>,
    pub scales_final: Vec<ScaleSnapshot>,
    #[serde(default)]
    pub diagnostics: Option<serde_json::Value>,
}

pub const DRAWS_HEADER: [&str; 6] = ["chain", "draw", "parameter", "region_id", "year", "value"];

/// Writes the long-format draw table: one row per retained draw per parameter.
pub fn write_draws_csv<W: Write>(writer: W, draws: &PosteriorDraws) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(writer));
    let err = |e| csv_error("draws.csv", e);
    w.write_record(DRAWS_HEADER).map_err(err)?;
    let years: Vec<String> = draws.years.years().map(|y| y.to_string()).collect();
    for c in &draws.chains {
        let chain = c.chain.to_string();
        for (i, d) in c.draws.iter().enumerate() {
            let idx = i.to_string();
            let mut row = |param: &str, region: &str, year: &str, value: String| {
                w.write_record([
                    chain.as_str(),
                    idx.as_str(),
                    param,
                    region,
                    year,
                    value.as_str(),
                ])
                .map_err(err)
            };
            for (r, region) in draws.regions.iter().enumerate() {
                for (t, year) in years.iter().enumerate() {
                    row(
                        "log_phi",
                        region,
                        year,
                        d.log_phi[r * years.len() + t].to_string(),
                    )?;
                }
                let tp = &d.transition[r];
                row("delta", region, "", (d.delta[r] as u8).to_string())?;
                row("pi", region, "", d.pi[r].to_string())?;
                row("gamma", region, "", tp.gamma.to_string())?;
                for (name, v) in SHAPES.iter().zip(tp.shapes()) {
                    row(name, region, "", v.to_string())?;
                }
            }
            for (k, name) in SHAPES.iter().enumerate() {
                row(
                    &format!("hyper_mean_{name}"),
                    "",
                    "",
                    d.hyper.mean[k].to_string(),
                )?;
                row(
                    &format!("hyper_log_sd_{name}"),
                    "",
                    "",
                    d.hyper.log_sd[k].to_string(),
                )?;
            }
        }
    }
    w.flush().map_err(|e| SrbError::io("draws.csv", e))
}

pub fn read_draws_csv<R: Read>(reader: R, manifest: &DrawsManifest) -> Result<PosteriorDraws> {
    let name = "draws.csv";
    let mut rdr = csv::Reader::from_reader(reader);
    let cols = column_indices(&mut rdr, name, &DRAWS_HEADER)?;
    let n_regions = manifest.regions.len();
    let n_years = manifest.years.len();
    let region_idx: HashMap<&str, usize> = manifest
        .regions
        .iter()
        .enumerate()
        .map(|(i, r)| (r.as_str(), i))
        .collect();
    let blank = || Draw {
        log_phi: vec![f64::NAN; n_regions * n_years],
        delta: vec![false; n_regions],
        pi: vec![f64::NAN; n_regions],
        transition: vec![
            TransitionParams {
                gamma: f64::NAN,
                lambda1: f64::NAN,
                lambda2: f64::NAN,
                lambda3: f64::NAN,
                xi: f64::NAN,
            };
            n_regions
        ],
        hyper: HyperState {
            mean: [f64::NAN; 4],
            log_sd: [f64::NAN; 4],
        },
    };
    let mut chains: Vec<ChainDraws> = manifest
        .draws_per_chain
        .iter()
        .enumerate()
        .map(|(c, n)| ChainDraws {
            chain: c,
            draws: (0..*n).map(|_| blank()).collect(),
            acceptance: manifest.acceptance.get(c).cloned().unwrap_or_default(),
            scales_at_burnin_end: manifest
                .scales_at_burnin_end
                .get(c)
                .cloned()
                .unwrap_or_default(),
            scales_final: manifest.scales_final.get(c).cloned().unwrap_or_default(),
        })
        .collect();

    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(name, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |m: String| SrbError::Row {
            path: name.into(),
            line,
            message: m,
        };
        let f = |i: usize| row.get(cols[i]).unwrap_or("");
        let chain: usize = f(0).parse().map_err(|_| row_err("bad chain".into()))?;
        let idx: usize = f(1).parse().map_err(|_| row_err("bad draw index".into()))?;
        let value: f64 = f(5).parse().map_err(|_| row_err("bad value".into()))?;
        let draw = chains
            .get_mut(chain)
            .and_then(|c| c.draws.get_mut(idx))
            .ok_or_else(|| row_err(format!("draw {chain}/{idx} not in manifest")))?;
        let param = f(2);
        if let Some(shape) = param.strip_prefix("hyper_mean_") {
            let k = SHAPES
                .iter()
                .position(|s| *s == shape)
                .ok_or_else(|| row_err(format!("unknown parameter {param}")))?;
            draw.hyper.mean[k] = value;
            continue;
        }
        if let Some(shape) = param.strip_prefix("hyper_log_sd_") {
            let k = SHAPES
                .iter()
                .position(|s| *s == shape)
                .ok_or_else(|| row_err(format!("unknown parameter {param}")))?;
            draw.hyper.log_sd[k] = value;
            continue;
        }
        let r = *region_idx
            .get(f(3))
            .ok_or_else(|| row_err(format!("unknown region `{}`", f(3))))?;
        let tp = &mut draw.transition[r];
        match param {
            "log_phi" => {
                let year: i32 = f(4).parse().map_err(|_| row_err("bad year".into()))?;
                let t = manifest
                    .years
                    .index_of(year)
                    .ok_or_else(|| row_err(format!("year {year} outside range")))?;
                draw.log_phi[r * n_years + t] = value;
            }
            "delta" => draw.delta[r] = value != 0.0,
            "pi" => draw.pi[r] = value,
            "gamma" => tp.gamma = value,
            "lambda1" => tp.lambda1 = value,
            "lambda2" => tp.lambda2 = value,
            "lambda3" => tp.lambda3 = value,
            "xi" => tp.xi = value,
            other => return Err(row_err(format!("unknown parameter {other}"))),
        }
    }

    let complete = chains.iter().flat_map(|c| &c.draws).all(|d| {
        d.log_phi.iter().chain(&d.pi).all(|v| v.is_finite())
            && d.transition.iter().all(|t| t.is_valid())
            && d.hyper
                .mean
                .iter()
                .chain(&d.hyper.log_sd)
                .all(|v| v.is_finite())
    });
    if !complete {
        return Err(SrbError::Invalid(
            "draws.csv is missing values for some draws".into(),
        ));
    }
    Ok(PosteriorDraws {
        regions: manifest.regions.clone(),
        years: manifest.years,
        config: manifest.config.clone(),
        settings: manifest.settings.clone(),
        chains,
    })
}

pub fn manifest_for(
    draws: &PosteriorDraws,
    diagnostics: Option<serde_json::Value>,
) -> DrawsManifest {
    DrawsManifest {
        regions: draws.regions.clone(),
        years: draws.years,
        config: draws.config.clone(),
        settings: draws.settings.clone(),
        draws_per_chain: draws.chains.iter().map(|c| c.draws.len()).collect(),
        acceptance: draws.chains.iter().map(|c| c.acceptance.clone()).collect(),
        scales_at_burnin_end: draws
            .chains
            .iter()
            .map(|c| c.scales_at_burnin_end.clone())
            .collect(),
        scales_final: draws
            .chains
            .iter()
            .map(|c| c.scales_final.clone())
            .collect(),
        diagnostics,
    }
}

/// Writes `draws.csv` and `draws.json` into `dir`.
pub fn save_draws(
    dir: &Path,
    draws: &PosteriorDraws,
    diagnostics: Option<serde_json::Value>,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SrbError::io(dir, e))?;
    let csv_path = dir.join("draws.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| SrbError::io(&csv_path, e))?;
    write_draws_csv(file, draws)?;
    let manifest = manifest_for(draws, diagnostics);
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| SrbError::json("draws manifest", e))?;
    let json_path = dir.join("draws.json");
    std::fs::write(&json_path, json + "\n").map_err(|e| SrbError::io(&json_path, e))
}

pub fn load_draws(dir: &Path) -> Result<PosteriorDraws> {
    let json_path = dir.join("draws.json");
    let text = std::fs::read_to_string(&json_path).map_err(|e| SrbError::io(&json_path, e))?;
    let manifest: DrawsManifest =
        serde_json::from_str(&text).map_err(|e| SrbError::json("draws.json", e))?;
    let csv_path = dir.join("draws.csv");
    let file = std::fs::File::open(&csv_path).map_err(|e| SrbError::io(&csv_path, e))?;
    read_draws_csv(std::io::BufReader::new(file), &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::testing::fixture;

    fn awkward() -> PosteriorDraws {
        let mut d = fixture(
            &[true, false, true, true],
            &[1999.3, 2001.0, 1e-300, 2000.123456789],
        );
        d.chains[1].draws[0].log_phi = vec![0.1 + 0.2, -1e-17, f64::MIN_POSITIVE];
        d.chains[0].draws[1].hyper.mean[2] = -7.25;
        d
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let draws = awkward();
        let dir = tempfile::tempdir().unwrap();
        save_draws(
            dir.path(),
            &draws,
            Some(serde_json::json!({"max_rhat": 1.01})),
        )
        .unwrap();
        assert_eq!(load_draws(dir.path()).unwrap(), draws);
    }

    #[test]
    fn truncated_csv_is_rejected() {
        let draws = awkward();
        let mut buf = Vec::new();
        write_draws_csv(&mut buf, &draws).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(read_draws_csv(cut.as_bytes(), &manifest_for(&draws, None)).is_err());
    }

    #[test]
    fn subset_keeps_selected_positions() {
        let draws = fixture(
            &[true, false, true, false, true, false],
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        );
        let s = draws.subset(|chain, i| chain == 1 || i == 2);
        let gammas: Vec<f64> = s.iter().map(|d| d.transition[0].gamma).collect();
        assert_eq!(gammas, vec![3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.n_draws(), 4);
    }

    #[test]
    fn theta_path_ignores_transition_when_not_inflated() {
        let draws = fixture(&[false, true], &[2000.0, 2000.0]);
        let flat = draws.theta_path(&draws.chains[0].draws[0], 0, 1.049);
        assert!(flat.iter().all(|t| (t - 1.049).abs() < 1e-15));
        // gamma 2000 with unit segments: plateau at 2001, ramp to zero by 2003
        let bumped = draws.theta_path(&draws.chains[1].draws[0], 0, 1.049);
        assert!((bumped[0] - 1.049).abs() < 1e-15);
        assert!((bumped[1] - 1.109).abs() < 1e-12);
        assert!((bumped[2] - 1.109).abs() < 1e-12);
    }
}
