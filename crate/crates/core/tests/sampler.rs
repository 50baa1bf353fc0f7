use srb_core::data::{SrbObservation, TfrSeries};
use srb_core::inference::{
    block_diagnostics, inflation_probability, run_mcmc, McmcSettings, ModelData,
};
use srb_core::model::{trapezoid_alpha, ModelConfig, TransitionParams, YearRange};
use srb_core::validation::simulate::synthetic_tfr;

fn config() -> ModelConfig {
    let mut c = ModelConfig::default();
    c.year_range = YearRange {
        start: 1980,
        end: 2016,
    };
    c
}

fn tfr(ids: &[&str], onset: f64) -> Vec<TfrSeries> {
    ids.iter()
        .map(|id| {
            synthetic_tfr(
                id,
                onset,
                3.5,
                YearRange {
                    start: 1970,
                    end: 2050,
                },
            )
            .unwrap()
        })
        .collect()
}

fn short(seed: u64) -> McmcSettings {
    McmcSettings {
        n_iterations: 3000,
        n_burnin: 1500,
        thin: 3,
        seed,
        ..McmcSettings::default()
    }
}

/// Noise-free yearly observations of a clearly inflated ratio.
fn inflated_observations(region: &str) -> Vec<SrbObservation> {
    let tp = TransitionParams {
        gamma: 1990.0,
        lambda1: 8.0,
        lambda2: 6.0,
        lambda3: 8.0,
        xi: 0.08,
    };
    (1985..2015)
        .map(|y| {
            let ratio = 1.049 + trapezoid_alpha(y as f64, &tp);
            SrbObservation::new(region, y, y, ratio, 0.01, 40_000, "S")
        })
        .collect()
}

#[test]
fn strong_signal_is_detected() {
    let c = config();
    let data = ModelData::new(&inflated_observations("X"), &tfr(&["X"], 1990.0), &c).unwrap();
    let draws = run_mcmc(&data, &c, &short(1), None).unwrap();
    assert!(inflation_probability(&draws, "X").unwrap() > 0.9);
}

#[test]
fn region_without_data_keeps_prior_probability() {
    let c = config();
    let data = ModelData::new(&inflated_observations("X"), &tfr(&["X", "Y"], 1990.0), &c).unwrap();
    let settings = McmcSettings {
        n_iterations: 20_000,
        n_burnin: 2000,
        thin: 9,
        seed: 2,
        ..McmcSettings::default()
    };
    let draws = run_mcmc(&data, &c, &settings, None).unwrap();
    // the shared inflation prior is not pooled across regions
    let p = inflation_probability(&draws, "Y").unwrap();
    assert!((p - 0.5).abs() < 0.05, "{p}");
}

#[test]
fn identical_seed_and_threads_give_identical_draws() {
    let c = config();
    let data = ModelData::new(&inflated_observations("X"), &tfr(&["X"], 1990.0), &c).unwrap();
    let a = run_mcmc(&data, &c, &short(5), Some(1)).unwrap();
    let b = run_mcmc(&data, &c, &short(5), Some(3)).unwrap();
    assert_eq!(a, b);
    let other = run_mcmc(&data, &c, &short(6), Some(1)).unwrap();
    assert_ne!(a, other);
}

#[test]
fn adaptation_stops_after_burnin() {
    let c = config();
    let data = ModelData::new(&inflated_observations("X"), &tfr(&["X"], 1990.0), &c).unwrap();
    let draws = run_mcmc(&data, &c, &short(8), None).unwrap();
    for chain in &draws.chains {
        assert!(!chain.scales_final.values.is_empty());
        assert_eq!(chain.scales_at_burnin_end, chain.scales_final);
    }
}

#[test]
fn draws_are_positive_and_diagnostics_cover_all_blocks() {
    let c = config();
    let mut obs = inflated_observations("X");
    obs.push(SrbObservation::new("Z", 1995, 1999, 1.06, 0.03, 3000, "S"));
    let data = ModelData::new(&obs, &tfr(&["X", "Z"], 1992.0), &c).unwrap();
    let draws = run_mcmc(&data, &c, &short(9), None).unwrap();
    assert_eq!(draws.n_draws(), 4 * 500);
    for d in draws.iter() {
        for r in 0..2 {
            assert!(draws
                .theta_path(d, r, 1.049)
                .iter()
                .all(|t| *t > 0.0 && t.is_finite()));
            assert!((0.0..=1.0).contains(&d.pi[r]));
            let tp = &d.transition[r];
            assert!(tp.lambda1 > 0.0 && tp.lambda2 > 0.0 && tp.lambda3 > 0.0 && tp.xi > 0.0);
        }
    }
    let blocks = block_diagnostics(&draws).unwrap();
    let names: Vec<&str> = blocks.iter().map(|b| b.block.as_str()).collect();
    assert_eq!(
        names,
        ["theta", "delta", "pi", "gamma", "lambda1", "lambda2", "lambda3", "xi", "hyper"]
    );
    assert!(blocks
        .iter()
        .all(|b| b.max_rhat.is_finite() && b.max_rhat > 0.9 && b.min_ess > 0.0));
}

#[test]
fn rejects_settings_without_retained_draws() {
    let c = config();
    let data = ModelData::new(&inflated_observations("X"), &tfr(&["X"], 1990.0), &c).unwrap();
    let settings = McmcSettings {
        n_iterations: 100,
        n_burnin: 100,
        ..McmcSettings::default()
    };
    assert!(run_mcmc(&data, &c, &settings, None).is_err());
}
