#ifndef CALBOOT_H
#define CALBOOT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CbStatus {
  CB_STATUS_OK = 0,
  CB_STATUS_NULL_POINTER = 1,
  CB_STATUS_INVALID_ARGUMENT = 2,
  CB_STATUS_DOMAIN = 3,
  CB_STATUS_RANK_DEFICIENT = 4,
  CB_STATUS_NON_CONVERGENCE = 5,
  CB_STATUS_DEGENERATE = 6,
  CB_STATUS_UNSUPPORTED_PROFILE = 7,
  CB_STATUS_EMPTY_SAMPLE = 8,
  CB_STATUS_CONFIG = 9,
  CB_STATUS_PARSE = 10,
  CB_STATUS_IO = 11,
  CB_STATUS_SERIALIZE = 12,
  CB_STATUS_PANIC = 13,
} CbStatus;

/**
 * Opaque dataset handle.
 */
typedef struct CbDataset CbDataset;

/**
 * Opaque model handle.
 */
typedef struct CbModel CbModel;

/**
 * Opaque result of an RA-DR pipeline.
 */
typedef struct CbRefined CbRefined;

/**
 * RA tuning. Zero in any field selects the library default for the data.
 */
typedef struct CbRaParams {
  /**
   * Inner replicates `B` per iteration.
   */
  size_t inner_reps;
  /**
   * Step constant as a multiple of `n` (`c = d·n`).
   */
  double step_multiplier;
  /**
   * Iteration budget `T`.
   */
  size_t max_iter;
  size_t m_lower;
  size_t m_upper;
  double m_init;
} CbRaParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next library call on the same thread.
 */
const char *cb_last_error_message(void);

/**
 * Static description of a status code.
 */
const char *cb_status_name(enum CbStatus status);

double cb_norm_cdf(double x);

enum CbStatus cb_norm_quantile(double p, double *out);

enum CbStatus cb_chisq_cdf(double x, double df, double *out);

enum CbStatus cb_chisq_quantile(double p, double df, double *out);

/**
 * Scalar sample of `n` observations.
 */
enum CbStatus cb_dataset_new_scalar(const double *y, size_t n, struct CbDataset **out);

/**
 * Regression data: `x` is `n × p` in column-major order, `y` has length `n`.
 */
enum CbStatus cb_dataset_new_regression(const double *x,
                                        size_t n,
                                        size_t p,
                                        const double *y,
                                        struct CbDataset **out);

size_t cb_dataset_n(const struct CbDataset *data);

void cb_dataset_free(struct CbDataset *data);

/**
 * Gaussian mean with known variance.
 */
enum CbStatus cb_model_gaussian_mean(double variance, struct CbModel **out);

/**
 * Linear regression with known noise standard deviation.
 */
enum CbStatus cb_model_linreg_known(double sigma, struct CbModel **out);

/**
 * Linear regression with unknown noise level.
 */
enum CbStatus cb_model_linreg_unknown(struct CbModel **out);

/**
 * Lasso with penalty `lambda` and plug-in noise variance `sigma2`.
 */
enum CbStatus cb_model_lasso(double lambda, double sigma2, struct CbModel **out);

/**
 * Von Mises location with known concentration.
 */
enum CbStatus cb_model_von_mises(double kappa, struct CbModel **out);

void cb_model_free(struct CbModel *model);

/**
 * Minimizer of the model loss; `out` must hold the parameter dimension
 * (1 for scalar models, `p` for regression).
 */
enum CbStatus cb_model_fit(const struct CbModel *model,
                           const struct CbDataset *data,
                           double *out,
                           size_t out_len);

/**
 * Default RA parameters (all zero: data-dependent library defaults).
 */
struct CbRaParams cb_ra_params_default(void);

/**
 * One RA run at level `alpha`; writes the calibrated resample size.
 * `assoc_index < 0` selects the joint association, otherwise the profile
 * association of that coordinate.
 */
enum CbStatus cb_ra_run(const struct CbModel *model,
                        const struct CbDataset *data,
                        int64_t assoc_index,
                        double alpha,
                        struct CbRaParams params,
                        uint64_t seed,
                        size_t *out_m_alpha);

/**
 * RA at each of `n_alphas` levels, pooled and refined by DR with `b_out`
 * selections (0 = pool size).
 */
enum CbStatus cb_ra_dr_pipeline(const struct CbModel *model,
                                const struct CbDataset *data,
                                int64_t assoc_index,
                                const double *alphas,
                                size_t n_alphas,
                                struct CbRaParams params,
                                size_t b_out,
                                uint64_t seed,
                                struct CbRefined **out);

/**
 * Number of refined draws.
 */
size_t cb_refined_len(const struct CbRefined *r);

/**
 * Parameter dimension of each draw.
 */
size_t cb_refined_dim(const struct CbRefined *r);

/**
 * KS distance of the refined contour values from uniform.
 */
double cb_refined_ks(const struct CbRefined *r);

/**
 * Calibrated `m` of the `k`-th RA run (in the order the levels were given).
 */
enum CbStatus cb_refined_m_alpha(const struct CbRefined *r, size_t k, size_t *out);

/**
 * Copy the draws into `out` (row-major, `len × dim` values).
 */
enum CbStatus cb_refined_thetas(const struct CbRefined *r, double *out, size_t out_len);

/**
 * Copy the contour values of the draws into `out` (`len` values).
 */
enum CbStatus cb_refined_u_values(const struct CbRefined *r, double *out, size_t out_len);

void cb_refined_free(struct CbRefined *r);

/**
 * Run a scenario from key/value config text (same format as `cb run
 * --config`). Files are written to the config's output directory when
 * `write_files` is nonzero. `out_report` receives the report JSON, to be
 * released with [`cb_string_free`].
 */
enum CbStatus cb_run_scenario(const char *config, int32_t write_files, char **out_report);

void cb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CALBOOT_H */
