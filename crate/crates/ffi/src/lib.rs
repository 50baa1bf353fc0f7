//! C interface to `srb-core`.
//!
//! Every function returns an [`SrbStatus`]. On failure the message is kept per
//! thread and can be read with [`srb_last_error_message`]. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use srb_core::data::{load_tfr, read_observations, SrbObservation};
use srb_core::inference::{
    block_diagnostics, inflation_probability, run_mcmc, srb_estimates, summary::write_estimates,
    McmcSettings, ModelData, PosteriorDraws,
};
use srb_core::model::{obs_loglik, theta, trapezoid_alpha, ModelConfig, TransitionParams};
use srb_core::SrbError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    InvalidInput = 4,
    Panic = 5,
}

/// Sampler settings; start from [`srb_default_settings`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SrbMcmcSettings {
    pub n_chains: usize,
    pub n_iterations: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub adapt_window: usize,
    pub seed: u64,
    /// Worker threads for the chains; 0 uses all cores.
    pub threads: usize,
}

/// Observations, TFR and model configuration, ready for fitting.
pub struct SrbData {
    config: ModelConfig,
    data: ModelData,
}

/// Posterior draws of one fit.
pub struct SrbFit {
    draws: PosteriorDraws,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &SrbError) -> SrbStatus {
    match err {
        SrbError::Io { .. } => SrbStatus::Io,
        SrbError::Config(_) => SrbStatus::InvalidArgument,
        _ => SrbStatus::InvalidInput,
    }
}

/// Runs `f`, converting errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (SrbStatus, String)>) -> SrbStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrbStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside srb".into());
            SrbStatus::Panic
        }
    }
}

fn core_err(e: SrbError) -> (SrbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (SrbStatus, String) {
    (SrbStatus::NullPointer, "null pointer argument".into())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (SrbStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SrbStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, (SrbStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            SrbStatus::InvalidArgument,
            "string is not valid UTF-8".into(),
        )
    })
}

/// Message of the last failed call on this thread, or NULL after a success.
///
/// The pointer stays valid until the next `srb_` call on the same thread.
#[no_mangle]
pub extern "C" fn srb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn srb_default_settings() -> SrbMcmcSettings {
    let d = McmcSettings::default();
    SrbMcmcSettings {
        n_chains: d.n_chains,
        n_iterations: d.n_iterations,
        n_burnin: d.n_burnin,
        thin: d.thin,
        adapt_window: d.adapt_window,
        seed: d.seed,
        threads: 0,
    }
}

/// Transition trapezoid at year `t`.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn srb_trapezoid_alpha(
    t: f64,
    gamma: f64,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    xi: f64,
    out: *mut f64,
) -> SrbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let tp = TransitionParams {
            gamma,
            lambda1,
            lambda2,
            lambda3,
            xi,
        };
        if !tp.is_valid() {
            return Err((
                SrbStatus::InvalidArgument,
                "lambda and xi must be positive".into(),
            ));
        }
        *out = trapezoid_alpha(t, &tp);
        Ok(())
    })
}

/// Sex ratio `b * exp(log_phi) + delta * alpha`; any nonzero `delta` counts as inflated.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn srb_theta(
    b: f64,
    log_phi: f64,
    delta: i32,
    alpha: f64,
    out: *mut f64,
) -> SrbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = theta(b, log_phi, delta != 0, alpha);
        Ok(())
    })
}

/// Log-likelihood of an observed ratio with log-scale standard error `log_se`.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn srb_obs_loglik(
    ratio: f64,
    log_se: f64,
    theta_value: f64,
    out: *mut f64,
) -> SrbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        if !(ratio > 0.0 && log_se > 0.0 && theta_value > 0.0) {
            return Err((
                SrbStatus::InvalidArgument,
                "ratio, log_se and theta must be positive".into(),
            ));
        }
        let obs = SrbObservation::new("", 0, 0, ratio, log_se, 0, "");
        *out = obs_loglik(&obs, theta_value);
        Ok(())
    })
}

/// Loads observations and TFR files; `config_path` may be NULL for defaults.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn srb_data_load(
    observations_path: *const c_char,
    tfr_path: *const c_char,
    config_path: *const c_char,
    out: *mut *mut SrbData,
) -> SrbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = std::ptr::null_mut();
        let obs_path = path_arg(observations_path)?;
        let tfr_path = path_arg(tfr_path)?;
        let config = if config_path.is_null() {
            ModelConfig::default()
        } else {
            ModelConfig::load(&path_arg(config_path)?).map_err(core_err)?
        };
        let observations = read_observations(&obs_path).map_err(core_err)?;
        let tfr = load_tfr(&tfr_path).map_err(core_err)?;
        let data = ModelData::new(&observations, &tfr, &config).map_err(core_err)?;
        *out = Box::into_raw(Box::new(SrbData { config, data }));
        Ok(())
    })
}

/// Number of regions in the loaded data.
///
/// # Safety
/// `data` must come from [`srb_data_load`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn srb_data_region_count(data: *const SrbData, out: *mut usize) -> SrbStatus {
    guard(|| {
        let (Some(d), false) = (data.as_ref(), out.is_null()) else {
            return Err(null());
        };
        *out = d.data.regions.len();
        Ok(())
    })
}

/// # Safety
/// `data` must come from [`srb_data_load`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn srb_data_free(data: *mut SrbData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Samples the posterior.
///
/// # Safety
/// `data` must come from [`srb_data_load`]; `settings` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn srb_fit_run(
    data: *const SrbData,
    settings: *const SrbMcmcSettings,
    out: *mut *mut SrbFit,
) -> SrbStatus {
    guard(|| {
        let (Some(d), Some(s), false) = (data.as_ref(), settings.as_ref(), out.is_null()) else {
            return Err(null());
        };
        *out = std::ptr::null_mut();
        let mcmc = McmcSettings {
            n_chains: s.n_chains,
            n_iterations: s.n_iterations,
            n_burnin: s.n_burnin,
            thin: s.thin,
            adapt_window: s.adapt_window,
            seed: s.seed,
            ..McmcSettings::default()
        };
        let threads = (s.threads > 0).then_some(s.threads);
        let draws = run_mcmc(&d.data, &d.config, &mcmc, threads).map_err(core_err)?;
        *out = Box::into_raw(Box::new(SrbFit { draws }));
        Ok(())
    })
}

/// Posterior probability that `region_id` is inflated.
///
/// # Safety
/// `fit` must come from [`srb_fit_run`]; `region_id` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn srb_fit_inflation_probability(
    fit: *const SrbFit,
    region_id: *const c_char,
    out: *mut f64,
) -> SrbStatus {
    guard(|| {
        let (Some(f), false) = (fit.as_ref(), out.is_null()) else {
            return Err(null());
        };
        let region = str_arg(region_id)?;
        *out = inflation_probability(&f.draws, region).map_err(core_err)?;
        Ok(())
    })
}

/// Largest split R-hat over all monitored parameters.
///
/// # Safety
/// `fit` must come from [`srb_fit_run`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn srb_fit_max_rhat(fit: *const SrbFit, out: *mut f64) -> SrbStatus {
    guard(|| {
        let (Some(f), false) = (fit.as_ref(), out.is_null()) else {
            return Err(null());
        };
        let blocks = block_diagnostics(&f.draws).map_err(core_err)?;
        *out = blocks.iter().map(|b| b.max_rhat).fold(1.0, f64::max);
        Ok(())
    })
}

/// Writes `region_id,year,median,lower95,upper95` to `path`.
///
/// # Safety
/// `fit` must come from [`srb_fit_run`]; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn srb_fit_write_estimates(
    fit: *const SrbFit,
    path: *const c_char,
) -> SrbStatus {
    guard(|| {
        let Some(f) = fit.as_ref() else {
            return Err(null());
        };
        let path = path_arg(path)?;
        let estimates = srb_estimates(&f.draws).map_err(core_err)?;
        let file =
            std::fs::File::create(&path).map_err(|e| core_err(SrbError::Io { path, source: e }))?;
        write_estimates(file, &estimates).map_err(core_err)
    })
}

/// # Safety
/// `fit` must come from [`srb_fit_run`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn srb_fit_free(fit: *mut SrbFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
