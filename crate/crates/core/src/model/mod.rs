//! The generative model: baseline, AR(1) fluctuation, inflation indicator and trapezoid transition.

pub mod config;
pub mod density;
pub mod state;
pub mod transition;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use config::{ModelConfig, ShapeHyperprior, ShapeHyperpriors, YearRange};
pub use density::{
    ar1_logprior, delta_logprior, obs_loglik, onset_prior_mean, pi_logprior, theta,
    transition_logprior,
};
pub use state::{HyperState, LatentState};
pub use transition::{trapezoid_alpha, TransitionParams};

/// Draws a stationary AR(1) path of length `n` with zero mean.
pub fn simulate_ar1<R: Rng + ?Sized>(rng: &mut R, n: usize, rho: f64, sd: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let stationary = sd / (1.0 - rho * rho).sqrt();
    let z: f64 = StandardNormal.sample(rng);
    let mut x = stationary * z;
    out.push(x);
    for _ in 1..n {
        let z: f64 = StandardNormal.sample(rng);
        x = rho * x + sd * z;
        out.push(x);
    }
    out
}
