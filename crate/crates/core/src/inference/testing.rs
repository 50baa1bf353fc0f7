//! Hand-built posterior draws for unit tests.

use super::draws::{ChainDraws, Draw, PosteriorDraws};
use super::McmcSettings;
use crate::model::{HyperState, ModelConfig, TransitionParams, YearRange};

/// One region over 2000-2002 with `log_phi = 0`; draws are split over two chains.
pub fn fixture(deltas: &[bool], gammas: &[f64]) -> PosteriorDraws {
    let mut config = ModelConfig::default();
    config.year_range = YearRange {
        start: 2000,
        end: 2002,
    };
    let hyper = HyperState::from_config(&config);
    let draws: Vec<Draw> = deltas
        .iter()
        .zip(gammas)
        .map(|(&delta, &gamma)| Draw {
            log_phi: vec![0.0; 3],
            delta: vec![delta],
            pi: vec![0.5],
            transition: vec![TransitionParams {
                gamma,
                lambda1: 1.0,
                lambda2: 1.0,
                lambda3: 1.0,
                xi: 0.06,
            }],
            hyper,
        })
        .collect();
    let half = draws.len() / 2;
    let chain = |i: usize, d: Vec<Draw>| ChainDraws {
        chain: i,
        draws: d,
        acceptance: Default::default(),
        scales_at_burnin_end: Default::default(),
        scales_final: Default::default(),
    };
    PosteriorDraws {
        regions: vec!["A".into()],
        years: config.year_range,
        config,
        settings: McmcSettings::default(),
        chains: vec![
            chain(0, draws[..half].to_vec()),
            chain(1, draws[half..].to_vec()),
        ],
    }
}
