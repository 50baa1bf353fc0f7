//! Log-densities of the observation model and priors.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::config::ModelConfig;
use super::state::HyperState;
use super::transition::TransitionParams;
use crate::data::{SrbObservation, TfrSeries};

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Student-t with three degrees of freedom.
pub fn student_t3_ln_pdf(x: f64, location: f64, scale: f64) -> f64 {
    // Gamma(2) / (Gamma(3/2) sqrt(3 pi)) = 2 / (sqrt(pi) * sqrt(3 pi))
    let ln_norm = (2.0 / (PI * 3f64.sqrt())).ln();
    let z = (x - location) / scale;
    ln_norm - scale.ln() - 2.0 * (1.0 + z * z / 3.0).ln()
}

pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
}

/// Sex ratio from baseline, log fluctuation and inflation: `b exp(log_phi) + delta alpha`.
pub fn theta(b: f64, log_phi: f64, delta: bool, alpha: f64) -> f64 {
    if delta {
        b * log_phi.exp() + alpha
    } else {
        b * log_phi.exp()
    }
}

/// Normal log-density of the observed log ratio around `ln theta_val`.
pub fn obs_loglik(obs: &SrbObservation, theta_val: f64) -> f64 {
    log_ratio_loglik(obs.ratio.ln(), obs.log_se, theta_val)
}

pub(crate) fn log_ratio_loglik(log_ratio: f64, log_se: f64, theta_val: f64) -> f64 {
    normal_ln_pdf(log_ratio, theta_val.ln(), log_se)
}

/// Stationary AR(1) log-density of one region's log fluctuation path.
pub fn ar1_logprior(path: &[f64], rho: f64, sd: f64) -> f64 {
    let Some((first, rest)) = path.split_first() else {
        return 0.0;
    };
    let stationary = sd / (1.0 - rho * rho).sqrt();
    let mut lp = normal_ln_pdf(*first, 0.0, stationary);
    let mut prev = *first;
    for x in rest {
        lp += normal_ln_pdf(*x, rho * prev, sd);
        prev = *x;
    }
    lp
}

/// First year the TFR falls to `reference` or below, interpolated between bracketing years.
///
/// Returns the last year of the series when it never gets there.
pub fn onset_prior_mean(tfr: &TfrSeries, reference: f64) -> f64 {
    let mut prev: Option<(i32, f64)> = None;
    for (year, v) in tfr.years() {
        if v <= reference {
            return match prev {
                None => year as f64,
                Some((py, pv)) => py as f64 + (pv - reference) / (pv - v) * (year - py) as f64,
            };
        }
        prev = Some((year, v));
    }
    tfr.last_year() as f64
}

/// Student-t(3) on the onset year plus the log-normal hierarchy on the shape parameters.
///
/// The shape terms are densities of the log parameters, which is also the
/// sampler's coordinate system.
pub fn transition_logprior(
    tp: &TransitionParams,
    hyper: &HyperState,
    onset_mean: f64,
    start_year_scale: f64,
) -> f64 {
    let mut lp = student_t3_ln_pdf(tp.gamma, onset_mean, start_year_scale);
    for (k, v) in tp.shapes().iter().enumerate() {
        lp += normal_ln_pdf(v.ln(), hyper.mean[k], hyper.sd(k));
    }
    lp
}

pub fn delta_logprior(delta: bool, pi: f64) -> f64 {
    if delta {
        pi.ln()
    } else {
        (1.0 - pi).ln()
    }
}

pub fn pi_logprior(pi: f64, a: f64, b: f64) -> f64 {
    beta_ln_pdf(pi, a, b)
}

/// Hyperprior on the hierarchy means and log standard deviations.
pub fn hyper_logprior(hyper: &HyperState, config: &ModelConfig) -> f64 {
    config
        .shape_hyperpriors
        .as_array()
        .iter()
        .enumerate()
        .map(|(k, h)| {
            normal_ln_pdf(hyper.mean[k], h.median.ln(), h.median_sd)
                + normal_ln_pdf(hyper.log_sd[k], h.spread.ln(), h.spread_sd)
        })
        .sum()
}
