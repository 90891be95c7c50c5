#ifndef NCLANGEVIN_H
#define NCLANGEVIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call.
 */
typedef enum NclStatus {
  NCL_STATUS_OK = 0,
  NCL_STATUS_NULL_POINTER = 1,
  NCL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Noise-corrected step size below `sigma2 / 2`.
   */
  NCL_STATUS_STEP_SIZE_CONDITION = 3,
  NCL_STATUS_DIMENSION_MISMATCH = 4,
  NCL_STATUS_SINGULAR = 5,
  NCL_STATUS_DIVERGENCE = 6,
  NCL_STATUS_IO = 7,
  NCL_STATUS_PARSE = 8,
  /**
   * An output buffer is too small.
   */
  NCL_STATUS_BUFFER_TOO_SMALL = 9,
  NCL_STATUS_PANIC = 10,
} NclStatus;

/**
 * Sampler variants accepted by [`ncl_run_chain`].
 */
typedef enum NclVariant {
  NCL_VARIANT_BASIC = 0,
  NCL_VARIANT_NOISE_CORRECTED = 1,
  NCL_VARIANT_HALF_DENOISE = 2,
} NclVariant;

/**
 * Opaque Gaussian mixture handle.
 */
typedef struct NclGmm NclGmm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *ncl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ncl_version(void);

/**
 * Builds a mixture of `k` isotropic kernels in `dim` dimensions.
 * `means` holds `k * dim` values, kernel by kernel.
 *
 * # Safety
 * `weights` and `variances` must point to `k` doubles, `means` to
 * `k * dim` doubles and `out` to writable storage for one handle.
 */
enum NclStatus ncl_gmm_create(size_t dim,
                              size_t k,
                              const double *weights,
                              const double *means,
                              const double *variances,
                              struct NclGmm **out);

/**
 * The 2D benchmark mixture with `kernels` kernels.
 *
 * # Safety
 * `out` must point to writable storage for one handle.
 */
enum NclStatus ncl_gmm_canonical(size_t kernels, struct NclGmm **out);

/**
 * Reads a model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable storage for one
 * handle.
 */
enum NclStatus ncl_gmm_load(const char *path, struct NclGmm **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void ncl_gmm_free(struct NclGmm *model);

/**
 * Dimension of the model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ncl_gmm_dim(const struct NclGmm *model);

/**
 * The model convolved with `N(0, sigma2 I)`, as a new handle.
 *
 * # Safety
 * `model` must be a live handle and `out` writable storage for one handle.
 */
enum NclStatus ncl_gmm_noisy(const struct NclGmm *model, double sigma2, struct NclGmm **out);

/**
 * Log density at `x`.
 *
 * # Safety
 * `x` must point to `dim` doubles and `out` to one writable double.
 */
enum NclStatus ncl_gmm_log_pdf(const struct NclGmm *model,
                               const double *x,
                               size_t dim,
                               double *out);

/**
 * Score `∇ log p(x)` written to `out` (`dim` values).
 *
 * # Safety
 * `x` and `out` must each point to `dim` doubles.
 */
enum NclStatus ncl_gmm_score(const struct NclGmm *model, const double *x, size_t dim, double *out);

/**
 * `n` exact draws, point by point, into `out` (`n * dim` values).
 *
 * # Safety
 * `out` must point to `out_len` writable doubles.
 */
enum NclStatus ncl_gmm_sample(const struct NclGmm *model,
                              size_t n,
                              uint64_t seed,
                              double *out,
                              size_t out_len);

/**
 * Posterior mean `x̃ + σ² Ψ(x̃)` with `noisy_model` the noisy-data density.
 *
 * # Safety
 * `x_noisy` and `out` must each point to `dim` doubles.
 */
enum NclStatus ncl_tweedie_denoise(const struct NclGmm *noisy_model,
                                   double sigma2,
                                   const double *x_noisy,
                                   size_t dim,
                                   double *out);

/**
 * Runs a chain from `N(0, I)` and writes the `n_steps + 1` states into
 * `out`. `variant` is an [`NclVariant`] value; `mu` is ignored for
 * half-denoising.
 *
 * # Safety
 * `out` must point to `out_len` writable doubles.
 */
enum NclStatus ncl_run_chain(const struct NclGmm *score_model,
                             int32_t variant,
                             double mu,
                             double sigma2,
                             size_t n_steps,
                             uint64_t seed,
                             double *out,
                             size_t out_len);

/**
 * Closed-form stationary covariance of the Gaussian iteration whose score
 * has covariance `sigma_score`, step `mu` and correction `sigma2`
 * (0 for plain Langevin). Writes `dim * dim` values, row-major.
 *
 * # Safety
 * `sigma_score` and `out` must each point to `dim * dim` doubles.
 */
enum NclStatus ncl_stationary_covariance(const double *sigma_score,
                                         size_t dim,
                                         double mu,
                                         double sigma2,
                                         double *out);

/**
 * Spectral norm of `I − mu · sigma_score⁻¹`.
 *
 * # Safety
 * `sigma_score` must point to `dim * dim` doubles and `out` to one double.
 */
enum NclStatus ncl_contraction(const double *sigma_score, size_t dim, double mu, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NCLANGEVIN_H */
