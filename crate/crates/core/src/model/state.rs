use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::transition::TransitionParams;

/// Population-level means and log standard deviations of the log shape parameters,
/// in the order lambda1, lambda2, lambda3, xi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperState {
    pub mean: [f64; 4],
    pub log_sd: [f64; 4],
}

impl HyperState {
    /// Hyperprior centres.
    pub fn from_config(config: &ModelConfig) -> Self {
        let h = config.shape_hyperpriors.as_array();
        HyperState {
            mean: h.map(|p| p.median.ln()),
            log_sd: h.map(|p| p.spread.ln()),
        }
    }

    pub fn sd(&self, k: usize) -> f64 {
        self.log_sd[k].exp()
    }

    /// Transition parameters at the hierarchy medians with the given onset year.
    pub fn central_transition(&self, gamma: f64) -> TransitionParams {
        TransitionParams {
            gamma,
            lambda1: self.mean[0].exp(),
            lambda2: self.mean[1].exp(),
            lambda3: self.mean[2].exp(),
            xi: self.mean[3].exp(),
        }
    }
}

/// All latent quantities for every region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    /// `log_phi[region][year index]`
    pub log_phi: Vec<Vec<f64>>,
    pub delta: Vec<bool>,
    pub pi: Vec<f64>,
    pub transition: Vec<TransitionParams>,
    pub hyper: HyperState,
}

impl LatentState {
    pub fn is_valid(&self) -> bool {
        self.pi.iter().all(|p| *p > 0.0 && *p < 1.0)
            && self.log_phi.iter().flatten().all(|x| x.is_finite())
            && self.transition.iter().all(|t| t.is_valid())
    }
}
