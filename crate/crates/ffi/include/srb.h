#ifndef SRB_H
#define SRB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SrbStatus {
  SRB_STATUS_OK = 0,
  SRB_STATUS_NULL_POINTER = 1,
  SRB_STATUS_INVALID_ARGUMENT = 2,
  SRB_STATUS_IO = 3,
  SRB_STATUS_INVALID_INPUT = 4,
  SRB_STATUS_PANIC = 5,
} SrbStatus;

/**
 * Observations, TFR and model configuration, ready for fitting.
 */
typedef struct SrbData SrbData;

/**
 * Posterior draws of one fit.
 */
typedef struct SrbFit SrbFit;

/**
 * Sampler settings; start from [`srb_default_settings`].
 */
typedef struct SrbMcmcSettings {
  size_t n_chains;
  size_t n_iterations;
  size_t n_burnin;
  size_t thin;
  size_t adapt_window;
  uint64_t seed;
  /**
   * Worker threads for the chains; 0 uses all cores.
   */
  size_t threads;
} SrbMcmcSettings;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 *
 * The pointer stays valid until the next `srb_` call on the same thread.
 */
const char *srb_last_error_message(void);

struct SrbMcmcSettings srb_default_settings(void);

/**
 * Transition trapezoid at year `t`.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum SrbStatus srb_trapezoid_alpha(double t,
                                   double gamma,
                                   double lambda1,
                                   double lambda2,
                                   double lambda3,
                                   double xi,
                                   double *out);

/**
 * Sex ratio `b * exp(log_phi) + delta * alpha`; any nonzero `delta` counts as inflated.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum SrbStatus srb_theta(double b, double log_phi, int32_t delta, double alpha, double *out);

/**
 * Log-likelihood of an observed ratio with log-scale standard error `log_se`.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum SrbStatus srb_obs_loglik(double ratio, double log_se, double theta_value, double *out);

/**
 * Loads observations and TFR files; `config_path` may be NULL for defaults.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be valid for writing a pointer.
 */
enum SrbStatus srb_data_load(const char *observations_path,
                             const char *tfr_path,
                             const char *config_path,
                             struct SrbData **out);

/**
 * Number of regions in the loaded data.
 *
 * # Safety
 * `data` must come from [`srb_data_load`]; `out` must be valid.
 */
enum SrbStatus srb_data_region_count(const struct SrbData *data, size_t *out);

/**
 * # Safety
 * `data` must come from [`srb_data_load`] and not be used afterwards. NULL is ignored.
 */
void srb_data_free(struct SrbData *data);

/**
 * Samples the posterior.
 *
 * # Safety
 * `data` must come from [`srb_data_load`]; `settings` and `out` must be valid.
 */
enum SrbStatus srb_fit_run(const struct SrbData *data,
                           const struct SrbMcmcSettings *settings,
                           struct SrbFit **out);

/**
 * Posterior probability that `region_id` is inflated.
 *
 * # Safety
 * `fit` must come from [`srb_fit_run`]; `region_id` must be NUL-terminated; `out` must be valid.
 */
enum SrbStatus srb_fit_inflation_probability(const struct SrbFit *fit,
                                             const char *region_id,
                                             double *out);

/**
 * Largest split R-hat over all monitored parameters.
 *
 * # Safety
 * `fit` must come from [`srb_fit_run`]; `out` must be valid.
 */
enum SrbStatus srb_fit_max_rhat(const struct SrbFit *fit, double *out);

/**
 * Writes `region_id,year,median,lower95,upper95` to `path`.
 *
 * # Safety
 * `fit` must come from [`srb_fit_run`]; `path` must be NUL-terminated.
 */
enum SrbStatus srb_fit_write_estimates(const struct SrbFit *fit, const char *path);

/**
 * # Safety
 * `fit` must come from [`srb_fit_run`] and not be used afterwards. NULL is ignored.
 */
void srb_fit_free(struct SrbFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRB_H */
