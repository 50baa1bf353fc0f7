//! Adaptive Metropolis-within-Gibbs over the latent state.
//!
//! Each sweep visits every region and updates, in order: the log fluctuation
//! path (scalar random-walk steps plus one elliptical slice move under the
//! AR(1) prior), the transition parameters (joint random walk on
//! `[gamma, ln lambda1..3, ln xi]` when inflated, an exact draw from their
//! prior otherwise), a fit-preserving flip of the inflation
//! indicator, an exact Gibbs draw of the indicator, and a conjugate draw of
//! its Bernoulli mean. The hierarchy means and log standard deviations are
//! updated last. Proposal scales adapt during burn-in only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal, StudentT};
use rayon::prelude::*;

use super::draws::{Acceptance, ChainDraws, Draw, PosteriorDraws, ScaleSnapshot};
use super::model_data::{ModelData, RegionData};
use super::settings::McmcSettings;
use crate::error::{Result, SrbError};
use crate::model::density::{
    ar1_logprior, delta_logprior, hyper_logprior, normal_ln_pdf, pi_logprior, transition_logprior,
};
use crate::model::transition::Unconstrained;
use crate::model::{simulate_ar1, trapezoid_alpha, HyperState, ModelConfig, TransitionParams};

const DIM: usize = 5;
const INITIAL_BLOCK_SD: [f64; DIM] = [2.0, 0.15, 0.15, 0.15, 0.15];
const MIN_COVARIANCE_SAMPLES: u64 = 200;
const MAX_SLICE_SHRINKS: usize = 200;

/// Samples the posterior with `settings.n_chains` independent chains.
///
/// Chain `c` draws from its own generator seeded with `settings.seed + c`, so the
/// result does not depend on `threads`.
pub fn run_mcmc(
    data: &ModelData,
    config: &ModelConfig,
    settings: &McmcSettings,
    threads: Option<usize>,
) -> Result<PosteriorDraws> {
    config.validate()?;
    settings.validate()?;
    if !(config.ar1_sd > 0.0) {
        return Err(SrbError::Config(
            "ar1_sd must be positive for sampling".into(),
        ));
    }
    if data.years != config.year_range {
        return Err(SrbError::Config(
            "model data was prepared for a different year range".into(),
        ));
    }

    // Validate the initial states before spawning work.
    for c in 0..settings.n_chains {
        Chain::new(data, config, settings, c).check_initial()?;
    }

    let run = || -> Vec<ChainDraws> {
        (0..settings.n_chains)
            .into_par_iter()
            .map(|c| Chain::new(data, config, settings, c).run())
            .collect()
    };
    let chains = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SrbError::Invalid(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    Ok(PosteriorDraws {
        regions: data.region_ids(),
        years: data.years,
        config: config.clone(),
        settings: settings.clone(),
        chains,
    })
}

/// Exact conditional draw of the inflation indicator given the log-likelihoods
/// with and without inflation.
pub fn gibbs_delta<R: Rng + ?Sized>(
    rng: &mut R,
    pi: f64,
    loglik_inflated: f64,
    loglik_baseline: f64,
) -> bool {
    rng.random::<f64>() < delta_conditional_probability(pi, loglik_inflated, loglik_baseline)
}

/// `P(delta = 1 | rest)`, from the odds `pi / (1 - pi) * exp(ll1 - ll0)`.
pub fn delta_conditional_probability(pi: f64, loglik_inflated: f64, loglik_baseline: f64) -> f64 {
    let logit = pi.ln() - (1.0 - pi).ln() + loglik_inflated - loglik_baseline;
    if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    }
}

/// Robbins-Monro scale adaptation toward a target acceptance rate.
#[derive(Debug, Clone)]
struct Adaptive {
    log_scale: f64,
    accepted: u32,
    proposed: u32,
    windows: u32,
}

impl Adaptive {
    fn new(scale: f64) -> Self {
        Adaptive {
            log_scale: scale.ln(),
            accepted: 0,
            proposed: 0,
            windows: 0,
        }
    }

    fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u32;
    }

    fn adapt(&mut self, target: f64) {
        if self.proposed == 0 {
            return;
        }
        let rate = self.accepted as f64 / self.proposed as f64;
        self.windows += 1;
        let step = 1.0 / (self.windows as f64).sqrt();
        self.log_scale = (self.log_scale + step * (rate - target) * 2.0).clamp(-30.0, 10.0);
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// Joint random walk for one region's transition parameters.
///
/// The proposal covariance is learned from burn-in samples taken while the
/// region is inflated.
#[derive(Debug, Clone)]
struct BlockProposal {
    adaptive: Adaptive,
    chol: [[f64; DIM]; DIM],
    n: u64,
    mean: [f64; DIM],
    comoment: [[f64; DIM]; DIM],
}

impl BlockProposal {
    fn new() -> Self {
        let mut chol = [[0.0; DIM]; DIM];
        for (i, sd) in INITIAL_BLOCK_SD.iter().enumerate() {
            chol[i][i] = *sd;
        }
        BlockProposal {
            adaptive: Adaptive::new(1.0),
            chol,
            n: 0,
            mean: [0.0; DIM],
            comoment: [[0.0; DIM]; DIM],
        }
    }

    fn step<R: Rng + ?Sized>(&self, rng: &mut R, u: &Unconstrained) -> Unconstrained {
        let z: [f64; DIM] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let s = self.adaptive.scale();
        std::array::from_fn(|i| {
            let dz: f64 = (0..=i).map(|j| self.chol[i][j] * z[j]).sum();
            u[i] + s * dz
        })
    }

    fn observe(&mut self, u: &Unconstrained) {
        self.n += 1;
        let n = self.n as f64;
        let delta: [f64; DIM] = std::array::from_fn(|i| u[i] - self.mean[i]);
        for i in 0..DIM {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..DIM {
            for j in 0..DIM {
                self.comoment[i][j] += delta[i] * (u[j] - self.mean[j]);
            }
        }
    }

    fn adapt(&mut self, target: f64) {
        self.adaptive.adapt(target);
        if self.n < MIN_COVARIANCE_SAMPLES {
            return;
        }
        let n = self.n as f64;
        let mut cov = [[0.0; DIM]; DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                cov[i][j] = self.comoment[i][j] / (n - 1.0);
            }
            cov[i][i] += 1e-10 + 1e-6 * INITIAL_BLOCK_SD[i] * INITIAL_BLOCK_SD[i];
        }
        if let Some(l) = cholesky(&cov) {
            let factor = 2.38 / (DIM as f64).sqrt();
            let switching = self.chol[0][0] == INITIAL_BLOCK_SD[0] && self.chol[1][0] == 0.0;
            self.chol = l.map(|row| row.map(|v| v * factor));
            if switching {
                self.adaptive.log_scale = 0.0;
            }
        }
    }

    fn snapshot(&self, out: &mut Vec<f64>) {
        out.push(self.adaptive.scale());
        out.extend(self.chol.iter().flatten());
    }
}

fn cholesky(a: &[[f64; DIM]; DIM]) -> Option<[[f64; DIM]; DIM]> {
    let mut l = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Per-region state with caches of alpha, theta and per-observation log-likelihoods.
#[derive(Debug, Clone)]
struct RegionState {
    log_phi: Vec<f64>,
    alpha: Vec<f64>,
    theta: Vec<f64>,
    obs_ll: Vec<f64>,
    loglik: f64,
    delta: bool,
    pi: f64,
    u: Unconstrained,
    phi_scales: Vec<Adaptive>,
    block: BlockProposal,
}

struct Chain<'a> {
    data: &'a ModelData,
    config: &'a ModelConfig,
    settings: &'a McmcSettings,
    index: usize,
    rng: ChaCha8Rng,
    regions: Vec<RegionState>,
    hyper: HyperState,
    hyper_scales: [[Adaptive; 2]; 4],
    acceptance: Acceptance,
    years: Vec<f64>,
}

impl<'a> Chain<'a> {
    fn new(
        data: &'a ModelData,
        config: &'a ModelConfig,
        settings: &'a McmcSettings,
        index: usize,
    ) -> Self {
        let hyper = HyperState::from_config(config);
        let years: Vec<f64> = data.years.years().map(|y| y as f64).collect();
        let delta = index % 2 == 1;
        let n_years = years.len();
        let phi_scale = 0.5 * config.ar1_sd.max(1e-6);
        let regions = data
            .regions
            .iter()
            .map(|r| {
                let tp = hyper.central_transition(r.onset_mean);
                let mut st = RegionState {
                    log_phi: vec![0.0; n_years],
                    alpha: vec![0.0; n_years],
                    theta: vec![0.0; n_years],
                    obs_ll: vec![0.0; r.observations.len()],
                    loglik: 0.0,
                    delta,
                    pi: 0.5,
                    u: tp.to_unconstrained(),
                    phi_scales: vec![Adaptive::new(phi_scale); n_years],
                    block: BlockProposal::new(),
                };
                st.alpha = alpha_path(&years, &tp);
                refresh(&mut st, r, config.baseline_b);
                st
            })
            .collect();
        Chain {
            data,
            config,
            settings,
            index,
            rng: ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(index as u64)),
            regions,
            hyper,
            hyper_scales: std::array::from_fn(|_| [Adaptive::new(0.1), Adaptive::new(0.1)]),
            acceptance: Acceptance::default(),
            years,
        }
    }

    fn check_initial(&self) -> Result<()> {
        let cfg = self.config;
        let bad = |term: String| Err(SrbError::NonFiniteInit { term });
        if !hyper_logprior(&self.hyper, cfg).is_finite() {
            return bad("hyperprior".into());
        }
        for (st, r) in self.regions.iter().zip(&self.data.regions) {
            let id = &r.region_id;
            if !st.loglik.is_finite() {
                return bad(format!("observation likelihood of region {id}"));
            }
            if !ar1_logprior(&st.log_phi, cfg.ar1_rho, cfg.ar1_sd).is_finite() {
                return bad(format!("AR(1) prior of region {id}"));
            }
            let tp = TransitionParams::from_unconstrained(&st.u);
            if !transition_logprior(&tp, &self.hyper, r.onset_mean, cfg.start_year_scale)
                .is_finite()
            {
                return bad(format!("transition prior of region {id}"));
            }
            if !(pi_logprior(st.pi, cfg.inflation_prior_a, cfg.inflation_prior_b).is_finite()
                && delta_logprior(st.delta, st.pi).is_finite())
            {
                return bad(format!("inflation prior of region {id}"));
            }
        }
        Ok(())
    }

    fn run(mut self) -> ChainDraws {
        let s = self.settings;
        let mut draws = Vec::with_capacity(s.retained_per_chain());
        let mut scales_at_burnin_end = if s.n_burnin == 0 {
            self.snapshot()
        } else {
            ScaleSnapshot::default()
        };

        for iter in 0..s.n_iterations {
            let adapting = iter < s.n_burnin;
            let collect_cov = adapting && iter >= s.n_burnin / 4;
            self.sweep(!adapting, collect_cov);
            if adapting && (iter + 1) % s.adapt_window == 0 {
                self.adapt();
            }
            if iter + 1 == s.n_burnin {
                scales_at_burnin_end = self.snapshot();
            }
            if !adapting && (iter + 1 - s.n_burnin) % s.thin == 0 {
                draws.push(self.draw());
            }
        }

        ChainDraws {
            chain: self.index,
            draws,
            scales_final: self.snapshot(),
            scales_at_burnin_end,
            acceptance: self.acceptance,
        }
    }

    fn sweep(&mut self, counting: bool, collect_cov: bool) {
        for p in 0..self.regions.len() {
            self.update_log_phi(p, counting);
            self.elliptical_slice(p);
            self.update_transition(p, counting, collect_cov);
            self.flip_delta(p, counting);
            self.gibbs_delta(p, counting);
            self.gibbs_pi(p);
        }
        self.update_hyper(counting);
    }

    fn adapt(&mut self) {
        let target = self.settings.target_accept;
        let block_target = self.settings.block_target_accept;
        for st in &mut self.regions {
            for a in &mut st.phi_scales {
                a.adapt(target);
            }
            st.block.adapt(block_target);
        }
        for pair in &mut self.hyper_scales {
            for a in pair {
                a.adapt(target);
            }
        }
    }

    fn snapshot(&self) -> ScaleSnapshot {
        let mut values = Vec::new();
        for st in &self.regions {
            values.extend(st.phi_scales.iter().map(Adaptive::scale));
            st.block.snapshot(&mut values);
        }
        for pair in &self.hyper_scales {
            values.extend(pair.iter().map(Adaptive::scale));
        }
        ScaleSnapshot { values }
    }

    fn draw(&self) -> Draw {
        Draw {
            log_phi: self
                .regions
                .iter()
                .flat_map(|st| st.log_phi.iter().copied())
                .collect(),
            delta: self.regions.iter().map(|st| st.delta).collect(),
            pi: self.regions.iter().map(|st| st.pi).collect(),
            transition: self
                .regions
                .iter()
                .map(|st| TransitionParams::from_unconstrained(&st.u))
                .collect(),
            hyper: self.hyper,
        }
    }

    /// AR(1) log-density terms that involve `log_phi[t]` when it takes `value`.
    fn ar_local(&self, path: &[f64], t: usize, value: f64) -> f64 {
        let (rho, sd) = (self.config.ar1_rho, self.config.ar1_sd);
        let mut lp = if t == 0 {
            normal_ln_pdf(value, 0.0, sd / (1.0 - rho * rho).sqrt())
        } else {
            normal_ln_pdf(value, rho * path[t - 1], sd)
        };
        if t + 1 < path.len() {
            lp += normal_ln_pdf(path[t + 1], rho * value, sd);
        }
        lp
    }

    fn update_log_phi(&mut self, p: usize, counting: bool) {
        let b = self.config.baseline_b;
        let data = self.data;
        let region = &data.regions[p];
        for t in 0..self.years.len() {
            let st = &self.regions[p];
            let old = st.log_phi[t];
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let new = old + st.phi_scales[t].scale() * z;
            let mut log_ratio =
                self.ar_local(&st.log_phi, t, new) - self.ar_local(&st.log_phi, t, old);

            let st = &mut self.regions[p];
            let old_theta = st.theta[t];
            st.theta[t] = b * new.exp() + if st.delta { st.alpha[t] } else { 0.0 };
            let mut new_ll = Vec::with_capacity(region.by_year[t].len());
            for &i in &region.by_year[t] {
                let ll = region.observations[i].loglik(&st.theta);
                log_ratio += ll - st.obs_ll[i];
                new_ll.push(ll);
            }
            let accept = self.rng.random::<f64>().ln() < log_ratio;
            if accept {
                st.log_phi[t] = new;
                for (&i, ll) in region.by_year[t].iter().zip(new_ll) {
                    st.loglik += ll - st.obs_ll[i];
                    st.obs_ll[i] = ll;
                }
            } else {
                st.theta[t] = old_theta;
            }
            st.phi_scales[t].record(accept);
            if counting {
                self.acceptance.log_phi.record(accept);
            }
        }
    }

    /// Elliptical slice move on the whole path; the AR(1) prior is the Gaussian reference.
    fn elliptical_slice(&mut self, p: usize) {
        let b = self.config.baseline_b;
        let data = self.data;
        let region = &data.regions[p];
        let n = self.years.len();
        let nu = simulate_ar1(&mut self.rng, n, self.config.ar1_rho, self.config.ar1_sd);
        let st = &self.regions[p];
        let threshold = st.loglik + self.rng.random::<f64>().ln();
        let mut angle = self.rng.random::<f64>() * std::f64::consts::TAU;
        let (mut lo, mut hi) = (angle - std::f64::consts::TAU, angle);

        let mut cand = st.clone_path();
        for _ in 0..MAX_SLICE_SHRINKS {
            let (c, s) = (angle.cos(), angle.sin());
            for t in 0..n {
                cand.log_phi[t] = st.log_phi[t] * c + nu[t] * s;
                cand.theta[t] =
                    b * cand.log_phi[t].exp() + if st.delta { st.alpha[t] } else { 0.0 };
            }
            let ll = observation_loglik(region, &cand.theta, &mut cand.obs_ll);
            if ll > threshold {
                let st = &mut self.regions[p];
                st.log_phi = cand.log_phi;
                st.theta = cand.theta;
                st.obs_ll = cand.obs_ll;
                st.loglik = ll;
                return;
            }
            if angle < 0.0 {
                lo = angle;
            } else {
                hi = angle;
            }
            angle = lo + (hi - lo) * self.rng.random::<f64>();
        }
    }

    fn update_transition(&mut self, p: usize, counting: bool, collect_cov: bool) {
        if !self.regions[p].delta {
            self.draw_transition_from_prior(p);
            return;
        }
        let cfg = self.config;
        let data = self.data;
        let region = &data.regions[p];
        let st = &self.regions[p];
        let proposal = st.block.step(&mut self.rng, &st.u);
        let tp_old = TransitionParams::from_unconstrained(&st.u);
        let tp_new = TransitionParams::from_unconstrained(&proposal);

        let mut accept = false;
        let mut cand = None;
        if tp_new.is_valid() {
            let mut log_ratio = transition_logprior(
                &tp_new,
                &self.hyper,
                region.onset_mean,
                cfg.start_year_scale,
            ) - transition_logprior(
                &tp_old,
                &self.hyper,
                region.onset_mean,
                cfg.start_year_scale,
            );
            let alpha = alpha_path(&self.years, &tp_new);
            let theta: Vec<f64> = st
                .log_phi
                .iter()
                .zip(&alpha)
                .map(|(x, a)| cfg.baseline_b * x.exp() + a)
                .collect();
            let mut obs_ll = vec![0.0; st.obs_ll.len()];
            let ll = observation_loglik(region, &theta, &mut obs_ll);
            log_ratio += ll - st.loglik;
            accept = log_ratio.is_finite() && self.rng.random::<f64>().ln() < log_ratio;
            cand = Some((alpha, theta, obs_ll, ll));
        }

        let st = &mut self.regions[p];
        if accept {
            let (alpha, theta, obs_ll, ll) = cand.expect("valid proposal");
            st.u = proposal;
            st.alpha = alpha;
            st.theta = theta;
            st.obs_ll = obs_ll;
            st.loglik = ll;
        }
        st.block.adaptive.record(accept);
        if collect_cov {
            let u = st.u;
            st.block.observe(&u);
        }
        if counting {
            self.acceptance.transition.record(accept);
        }
    }

    /// Without inflation the likelihood ignores the transition, so its full
    /// conditional is the prior and can be sampled directly.
    fn draw_transition_from_prior(&mut self, p: usize) {
        let onset = self.data.regions[p].onset_mean;
        let t3 = StudentT::new(3.0).expect("positive degrees of freedom");
        let mut u = [0.0; DIM];
        u[0] = onset + self.config.start_year_scale * t3.sample(&mut self.rng);
        for k in 0..4 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            u[k + 1] = self.hyper.mean[k] + self.hyper.sd(k) * z;
        }
        let tp = TransitionParams::from_unconstrained(&u);
        if tp.is_valid() {
            let st = &mut self.regions[p];
            st.u = u;
            st.alpha = alpha_path(&self.years, &tp);
        }
    }

    /// Switches the indicator while holding every sex ratio fixed, moving the
    /// inflation into or out of the fluctuation path. The map is its own inverse,
    /// so the acceptance ratio carries only the priors and the Jacobian.
    fn flip_delta(&mut self, p: usize, counting: bool) {
        let cfg = self.config;
        let data = self.data;
        let region = &data.regions[p];
        let st = &self.regions[p];
        if st.alpha.iter().all(|a| *a == 0.0) {
            return;
        }
        let sign = if st.delta { 1.0 } else { -1.0 };
        let mut new_phi = Vec::with_capacity(st.log_phi.len());
        let mut log_jacobian = 0.0;
        for (x, a) in st.log_phi.iter().zip(&st.alpha) {
            let level = x.exp() + sign * a / cfg.baseline_b;
            if !(level > 0.0) {
                if counting {
                    self.acceptance.delta_flip.record(false);
                }
                return;
            }
            let y = level.ln();
            log_jacobian += x - y;
            new_phi.push(y);
        }
        let new_delta = !st.delta;
        let theta: Vec<f64> = new_phi
            .iter()
            .zip(&st.alpha)
            .map(|(x, a)| cfg.baseline_b * x.exp() + if new_delta { *a } else { 0.0 })
            .collect();
        let mut obs_ll = vec![0.0; st.obs_ll.len()];
        let ll = observation_loglik(region, &theta, &mut obs_ll);
        let log_ratio = ar1_logprior(&new_phi, cfg.ar1_rho, cfg.ar1_sd)
            - ar1_logprior(&st.log_phi, cfg.ar1_rho, cfg.ar1_sd)
            + log_jacobian
            + delta_logprior(new_delta, st.pi)
            - delta_logprior(st.delta, st.pi)
            + ll
            - st.loglik;
        let accept = log_ratio.is_finite() && self.rng.random::<f64>().ln() < log_ratio;
        if accept {
            let st = &mut self.regions[p];
            st.delta = new_delta;
            st.log_phi = new_phi;
            st.theta = theta;
            st.obs_ll = obs_ll;
            st.loglik = ll;
        }
        if counting {
            self.acceptance.delta_flip.record(accept);
        }
    }

    fn gibbs_delta(&mut self, p: usize, counting: bool) {
        let b = self.config.baseline_b;
        let data = self.data;
        let region = &data.regions[p];
        let st = &self.regions[p];
        let other = !st.delta;
        let theta: Vec<f64> = st
            .log_phi
            .iter()
            .zip(&st.alpha)
            .map(|(x, a)| b * x.exp() + if other { *a } else { 0.0 })
            .collect();
        let mut obs_ll = vec![0.0; st.obs_ll.len()];
        let ll_other = observation_loglik(region, &theta, &mut obs_ll);
        let (ll1, ll0) = if other {
            (ll_other, st.loglik)
        } else {
            (st.loglik, ll_other)
        };
        let new_delta = gibbs_delta(&mut self.rng, st.pi, ll1, ll0);
        if new_delta != st.delta {
            let st = &mut self.regions[p];
            st.delta = new_delta;
            st.theta = theta;
            st.obs_ll = obs_ll;
            st.loglik = ll_other;
            if counting {
                self.acceptance.delta_gibbs_switches += 1;
            }
        }
    }

    fn gibbs_pi(&mut self, p: usize) {
        let st = &self.regions[p];
        let d = st.delta as u8 as f64;
        let beta = Beta::new(
            self.config.inflation_prior_a + d,
            self.config.inflation_prior_b + 1.0 - d,
        )
        .expect("positive shape parameters");
        let draw: f64 = beta.sample(&mut self.rng);
        // keep strictly inside (0, 1) so log-densities stay finite
        self.regions[p].pi = draw.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    }

    fn update_hyper(&mut self, counting: bool) {
        let hp = self.config.shape_hyperpriors.as_array();
        for k in 0..4 {
            let values: Vec<f64> = self.regions.iter().map(|st| st.u[k + 1]).collect();
            let target = |mean: f64, log_sd: f64| {
                let sd = log_sd.exp();
                normal_ln_pdf(mean, hp[k].median.ln(), hp[k].median_sd)
                    + normal_ln_pdf(log_sd, hp[k].spread.ln(), hp[k].spread_sd)
                    + values
                        .iter()
                        .map(|v| normal_ln_pdf(*v, mean, sd))
                        .sum::<f64>()
            };
            for which in 0..2 {
                let (mean, log_sd) = (self.hyper.mean[k], self.hyper.log_sd[k]);
                let z: f64 = StandardNormal.sample(&mut self.rng);
                let step = self.hyper_scales[k][which].scale() * z;
                let (new_mean, new_log_sd) = if which == 0 {
                    (mean + step, log_sd)
                } else {
                    (mean, log_sd + step)
                };
                let log_ratio = target(new_mean, new_log_sd) - target(mean, log_sd);
                let accept = log_ratio.is_finite() && self.rng.random::<f64>().ln() < log_ratio;
                if accept {
                    self.hyper.mean[k] = new_mean;
                    self.hyper.log_sd[k] = new_log_sd;
                }
                self.hyper_scales[k][which].record(accept);
                if counting {
                    self.acceptance.hyper.record(accept);
                }
            }
        }
    }
}

struct PathScratch {
    log_phi: Vec<f64>,
    theta: Vec<f64>,
    obs_ll: Vec<f64>,
}

impl RegionState {
    fn clone_path(&self) -> PathScratch {
        PathScratch {
            log_phi: self.log_phi.clone(),
            theta: self.theta.clone(),
            obs_ll: self.obs_ll.clone(),
        }
    }
}

fn alpha_path(years: &[f64], tp: &TransitionParams) -> Vec<f64> {
    years.iter().map(|y| trapezoid_alpha(*y, tp)).collect()
}

fn observation_loglik(region: &RegionData, theta: &[f64], obs_ll: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (slot, o) in obs_ll.iter_mut().zip(&region.observations) {
        *slot = o.loglik(theta);
        total += *slot;
    }
    total
}

fn refresh(st: &mut RegionState, region: &RegionData, b: f64) {
    for t in 0..st.theta.len() {
        st.theta[t] = b * st.log_phi[t].exp() + if st.delta { st.alpha[t] } else { 0.0 };
    }
    st.loglik = observation_loglik(region, &st.theta, &mut st.obs_ll);
}
