#ifndef BDPD_H
#define BDPD_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BdpdStatus {
  BDPD_STATUS_OK = 0,
  BDPD_STATUS_NULL_POINTER = 1,
  BDPD_STATUS_INVALID_INPUT = 2,
  BDPD_STATUS_EMPTY_DATA = 3,
  BDPD_STATUS_UNSUPPORTED = 4,
  /**
   * The numerics failed: quadrature, optimization or a singular matrix.
   */
  BDPD_STATUS_NUMERICAL = 5,
  BDPD_STATUS_BUFFER_TOO_SMALL = 6,
  BDPD_STATUS_PANIC = 7,
} BdpdStatus;

typedef enum BdpdFamilyKind {
  BDPD_FAMILY_KIND_EXPONENTIAL_SCALE = 0,
  /**
   * Scale of a normal with known mean `fixed`.
   */
  BDPD_FAMILY_KIND_NORMAL_SCALE = 1,
  /**
   * Mean of a normal with known standard deviation `fixed`.
   */
  BDPD_FAMILY_KIND_NORMAL_MEAN = 2,
  BDPD_FAMILY_KIND_NORMAL_LOCATION_SCALE = 3,
} BdpdFamilyKind;

/**
 * An owned copy of a dataset.
 */
typedef struct BdpdData BdpdData;

/**
 * The global minimizer of one fit.
 */
typedef struct BdpdFit BdpdFit;

typedef struct BdpdFamily {
  enum BdpdFamilyKind kind;
  /**
   * Known mean or standard deviation; ignored by the other families.
   */
  double fixed;
} BdpdFamily;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *bdpd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bdpd_version(void);

/**
 * Copies `len` observations into a new handle.
 *
 * # Safety
 * `values` must point to `len` readable doubles and `out` must be writable.
 */
enum BdpdStatus bdpd_data_new(const double *values, uintptr_t len, struct BdpdData **out);

/**
 * # Safety
 * `data` must come from [`bdpd_data_new`] and not be used afterwards. Null is ignored.
 */
void bdpd_data_free(struct BdpdData *data);

uintptr_t bdpd_family_dim(struct BdpdFamily family);

/**
 * Sample objective at `theta`.
 *
 * # Safety
 * `data` must be a live handle, `theta` must hold `dim` doubles and `out` must be writable.
 */
enum BdpdStatus bdpd_objective(const struct BdpdData *data,
                               struct BdpdFamily family,
                               double alpha,
                               double lambda,
                               const double *theta,
                               uintptr_t dim,
                               double *out);

/**
 * Gradient of the sample objective at `theta`.
 *
 * # Safety
 * As for [`bdpd_objective`]; `out` must hold `cap` doubles.
 */
enum BdpdStatus bdpd_gradient(const struct BdpdData *data,
                              struct BdpdFamily family,
                              double alpha,
                              double lambda,
                              const double *theta,
                              uintptr_t dim,
                              double *out,
                              uintptr_t cap,
                              uintptr_t *out_len);

/**
 * Multistart global fit at one `(alpha, lambda)`.
 *
 * # Safety
 * `data` must be a live handle and `out` writable.
 */
enum BdpdStatus bdpd_fit(const struct BdpdData *data,
                         struct BdpdFamily family,
                         double alpha,
                         double lambda,
                         uint64_t seed,
                         struct BdpdFit **out);

/**
 * # Safety
 * `fit` must come from [`bdpd_fit`] and not be used afterwards. Null is ignored.
 */
void bdpd_fit_free(struct BdpdFit *fit);

/**
 * # Safety
 * `fit` must be a live handle; `out` must hold `cap` doubles.
 */
enum BdpdStatus bdpd_fit_theta(const struct BdpdFit *fit,
                               double *out,
                               uintptr_t cap,
                               uintptr_t *out_len);

/**
 * Objective value, gradient norm and convergence flag of a fit.
 *
 * # Safety
 * `fit` must be a live handle; each output pointer may be null to skip it.
 */
enum BdpdStatus bdpd_fit_summary(const struct BdpdFit *fit,
                                 double *objective,
                                 double *gradient_norm,
                                 bool *converged);

/**
 * Chain estimates over `lambdas` (descending from 1 to 0), row-major with
 * one row of `dim` values per grid point.
 *
 * # Safety
 * `lambdas` must hold `n_lambdas` doubles; `out` must hold `cap` doubles.
 */
enum BdpdStatus bdpd_chain(const struct BdpdData *data,
                           struct BdpdFamily family,
                           double alpha,
                           const double *lambdas,
                           uintptr_t n_lambdas,
                           uint64_t seed,
                           double *out,
                           uintptr_t cap,
                           uintptr_t *out_len);

/**
 * Sandwich variance `V` at `theta`, row-major `dim × dim`, and its determinant.
 *
 * # Safety
 * As for [`bdpd_gradient`]; `det` may be null.
 */
enum BdpdStatus bdpd_sandwich(const struct BdpdData *data,
                              struct BdpdFamily family,
                              double alpha,
                              double lambda,
                              const double *theta,
                              uintptr_t dim,
                              double *out,
                              uintptr_t cap,
                              uintptr_t *out_len,
                              double *det);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BDPD_H */
