//! Split R-hat and effective sample size.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::draws::{Draw, PosteriorDraws};
use crate::error::{Result, SrbError};
use crate::model::trapezoid_alpha;
use crate::stats::{mean, quantile_sorted, sorted, variance};

/// A scalar function of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parameter {
    Theta { region: usize, year_index: usize },
    LogPhi { region: usize, year_index: usize },
    Delta { region: usize },
    Pi { region: usize },
    Gamma { region: usize },
    Lambda1 { region: usize },
    Lambda2 { region: usize },
    Lambda3 { region: usize },
    Xi { region: usize },
    HyperMean { shape: usize },
    HyperLogSd { shape: usize },
}

impl Parameter {
    pub fn value(&self, draws: &PosteriorDraws, d: &Draw) -> f64 {
        let n = draws.n_years();
        match *self {
            Parameter::Theta { region, year_index } => {
                let tp = &d.transition[region];
                let year = (draws.years.start + year_index as i32) as f64;
                let alpha = if d.delta[region] {
                    trapezoid_alpha(year, tp)
                } else {
                    0.0
                };
                draws.config.baseline_b * d.log_phi[region * n + year_index].exp() + alpha
            }
            Parameter::LogPhi { region, year_index } => d.log_phi[region * n + year_index],
            Parameter::Delta { region } => d.delta[region] as u8 as f64,
            Parameter::Pi { region } => d.pi[region],
            Parameter::Gamma { region } => d.transition[region].gamma,
            Parameter::Lambda1 { region } => d.transition[region].lambda1,
            Parameter::Lambda2 { region } => d.transition[region].lambda2,
            Parameter::Lambda3 { region } => d.transition[region].lambda3,
            Parameter::Xi { region } => d.transition[region].xi,
            Parameter::HyperMean { shape } => d.hyper.mean[shape],
            Parameter::HyperLogSd { shape } => d.hyper.log_sd[shape],
        }
    }

    /// Values per chain.
    pub fn chains(&self, draws: &PosteriorDraws) -> Vec<Vec<f64>> {
        draws
            .chains
            .iter()
            .map(|c| c.draws.iter().map(|d| self.value(draws, d)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rhat {
    /// The largest of the three statistics below.
    pub value: f64,
    pub classic: f64,
    pub bulk: f64,
    pub tail: f64,
    /// Every draw of every chain is identical.
    pub degenerate: bool,
}

fn check_shape(chains: &[Vec<f64>]) -> Result<usize> {
    if chains.len() < 2 {
        return Err(SrbError::Invalid(
            "diagnostics need at least 2 chains".into(),
        ));
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 4 {
        return Err(SrbError::Invalid(
            "diagnostics need at least 4 draws per chain".into(),
        ));
    }
    Ok(n)
}

fn split(chains: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..n].to_vec()])
        .collect()
}

/// Potential scale reduction of already-split chains.
fn psrf(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    let between_over_n = variance(&means);
    if within == 0.0 {
        return if between_over_n == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
    }
    let var_plus = (n - 1.0) / n * within + between_over_n;
    (var_plus / within).sqrt()
}

/// Normal scores of pooled average ranks.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut flat: Vec<(f64, usize)> = chains
        .iter()
        .flatten()
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    flat.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = flat.len();
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && flat[j + 1].0 == flat[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for item in &flat[i..=j] {
            ranks[item.1] = avg;
        }
        i = j + 1;
    }
    let normal = Normal::standard();
    let mut it = ranks.into_iter();
    chains
        .iter()
        .map(|c| {
            c.iter()
                .map(|_| normal.inverse_cdf((it.next().unwrap() - 0.375) / (s as f64 + 0.25)))
                .collect()
        })
        .collect()
}

/// Split R-hat: the maximum of the classic statistic on the raw draws and the
/// rank-normalized bulk and folded-tail statistics.
pub fn rhat_chains(chains: &[Vec<f64>]) -> Result<Rhat> {
    let n = check_shape(chains)?;
    let trimmed: Vec<Vec<f64>> = chains.iter().map(|c| c[..n].to_vec()).collect();
    let first = trimmed[0][0];
    if trimmed.iter().flatten().all(|v| *v == first) {
        return Ok(Rhat {
            value: 1.0,
            classic: 1.0,
            bulk: 1.0,
            tail: 1.0,
            degenerate: true,
        });
    }
    let halves = split(&trimmed, n);
    let classic = psrf(&halves);
    let bulk = psrf(&rank_normalize(&halves));
    let med = quantile_sorted(&sorted(halves.iter().flatten().copied()), 0.5);
    let folded: Vec<Vec<f64>> = halves
        .iter()
        .map(|c| c.iter().map(|v| (v - med).abs()).collect())
        .collect();
    let tail = psrf(&rank_normalize(&folded));
    Ok(Rhat {
        value: classic.max(bulk).max(tail),
        classic,
        bulk,
        tail,
        degenerate: false,
    })
}

/// Multi-chain effective sample size with Geyer's initial monotone sequence.
pub fn ess_chains(chains: &[Vec<f64>]) -> Result<f64> {
    let n = check_shape(chains)?;
    let m = chains.len();
    let trimmed: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = trimmed.iter().map(|c| mean(c)).collect();
    let centred: Vec<Vec<f64>> = trimmed
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| v - mu).collect())
        .collect();
    let acov = |lag: usize| -> f64 {
        let per_chain: Vec<f64> = centred
            .iter()
            .map(|c| {
                c[..n - lag]
                    .iter()
                    .zip(&c[lag..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / n as f64
            })
            .collect();
        mean(&per_chain)
    };
    let nf = n as f64;
    let within = acov(0) * nf / (nf - 1.0);
    let between_over_n = if m > 1 { variance(&means) } else { 0.0 };
    let var_plus = within * (nf - 1.0) / nf + between_over_n;
    if !(var_plus > 0.0) {
        return Ok((m * n) as f64);
    }
    let rho = |lag: usize| 1.0 - (within - acov(lag)) / var_plus;

    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = if t == 0 {
            1.0 + rho(1)
        } else {
            rho(t) + rho(t + 1)
        };
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / ((m * n) as f64).log10());
    Ok((m * n) as f64 / tau)
}

pub fn rhat(draws: &PosteriorDraws, parameter: Parameter) -> Result<Rhat> {
    rhat_chains(&parameter.chains(draws))
}

pub fn ess(draws: &PosteriorDraws, parameter: Parameter) -> Result<f64> {
    ess_chains(&parameter.chains(draws))
}

/// Worst-case diagnostics over a group of related parameters.
#[derive(Debug, Clone, Serialize)]
pub struct BlockDiagnostic {
    pub block: String,
    pub parameters: usize,
    pub max_rhat: f64,
    pub worst: Parameter,
    pub min_ess: f64,
    pub degenerate: usize,
}

/// Parameter groups monitored for convergence.
pub fn monitored_blocks(draws: &PosteriorDraws) -> Vec<(String, Vec<Parameter>)> {
    let r = draws.regions.len();
    let n = draws.n_years();
    let per_region = |f: fn(usize) -> Parameter| (0..r).map(f).collect::<Vec<_>>();
    vec![
        (
            "theta".into(),
            (0..r)
                .flat_map(|region| {
                    (0..n).map(move |year_index| Parameter::Theta { region, year_index })
                })
                .collect(),
        ),
        (
            "delta".into(),
            per_region(|region| Parameter::Delta { region }),
        ),
        ("pi".into(), per_region(|region| Parameter::Pi { region })),
        (
            "gamma".into(),
            per_region(|region| Parameter::Gamma { region }),
        ),
        (
            "lambda1".into(),
            per_region(|region| Parameter::Lambda1 { region }),
        ),
        (
            "lambda2".into(),
            per_region(|region| Parameter::Lambda2 { region }),
        ),
        (
            "lambda3".into(),
            per_region(|region| Parameter::Lambda3 { region }),
        ),
        ("xi".into(), per_region(|region| Parameter::Xi { region })),
        (
            "hyper".into(),
            (0..4)
                .flat_map(|shape| {
                    [
                        Parameter::HyperMean { shape },
                        Parameter::HyperLogSd { shape },
                    ]
                })
                .collect(),
        ),
    ]
}

pub fn block_diagnostics(draws: &PosteriorDraws) -> Result<Vec<BlockDiagnostic>> {
    monitored_blocks(draws)
        .into_iter()
        .map(|(block, params)| {
            let mut max_rhat = f64::NEG_INFINITY;
            let mut worst = params[0];
            let mut min_ess = f64::INFINITY;
            let mut degenerate = 0;
            for p in &params {
                let chains = p.chains(draws);
                let r = rhat_chains(&chains)?;
                if r.degenerate {
                    degenerate += 1;
                } else {
                    min_ess = min_ess.min(ess_chains(&chains)?);
                }
                if r.value > max_rhat {
                    max_rhat = r.value;
                    worst = *p;
                }
            }
            Ok(BlockDiagnostic {
                block,
                parameters: params.len(),
                max_rhat,
                worst,
                min_ess: if min_ess.is_finite() {
                    min_ess
                } else {
                    draws.n_draws() as f64
                },
                degenerate,
            })
        })
        .collect()
}
