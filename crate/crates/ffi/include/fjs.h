#ifndef FJS_H
#define FJS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum FjsStatus {
  FJS_STATUS_OK = 0,
  FJS_STATUS_NULL_POINTER = 1,
  FJS_STATUS_INVALID_ARGUMENT = 2,
  FJS_STATUS_CONFIG = 3,
  FJS_STATUS_NUMERICAL = 4,
  FJS_STATUS_IO = 5,
  FJS_STATUS_THEORY = 6,
  FJS_STATUS_PANIC = 7,
} FjsStatus;

/**
 * Opaque set of (x, y) samples.
 */
typedef struct FjsDataset FjsDataset;

/**
 * Opaque trained Gaussian predictor.
 */
typedef struct FjsModel FjsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *fjs_last_error(void);

/**
 * Samples the default benchmark source domain.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FjsStatus fjs_dataset_sample_source(uint64_t seed, struct FjsDataset **out);

/**
 * Samples `n` points of the benchmark target domain.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FjsStatus fjs_dataset_sample_target(size_t n, uint64_t seed, struct FjsDataset **out);

/**
 * # Safety
 * `ds` must be a live dataset handle and `out` valid for writes.
 */
enum FjsStatus fjs_dataset_len(const struct FjsDataset *ds, size_t *out);

/**
 * Reads sample `index`.
 *
 * # Safety
 * `ds` must be a live dataset handle; `x` and `y` valid for writes.
 */
enum FjsStatus fjs_dataset_get(const struct FjsDataset *ds, size_t index, double *x, double *y);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void fjs_dataset_free(struct FjsDataset *ds);

/**
 * Trains `method` (for example `"source_only"` or `"jiada"`) with default
 * settings and `epochs` passes over the source. `target` supplies unlabeled
 * target features, and labels for `"target_only"`.
 *
 * # Safety
 * `method` must be a NUL-terminated string; `source` and `target` live
 * dataset handles; `out` valid for writes.
 */
enum FjsStatus fjs_model_train(const char *method,
                               const struct FjsDataset *source,
                               const struct FjsDataset *target,
                               size_t epochs,
                               uint64_t seed,
                               struct FjsModel **out);

/**
 * Predictive mean and standard deviation at `x`.
 *
 * # Safety
 * `model` must be a live model handle; `mu` and `sigma` valid for writes.
 */
enum FjsStatus fjs_model_predict(const struct FjsModel *model, double x, double *mu, double *sigma);

/**
 * Mean Gaussian negative log-likelihood of `model` on `data`.
 *
 * # Safety
 * `model` and `data` must be live handles; `out` valid for writes.
 */
enum FjsStatus fjs_model_nll(const struct FjsModel *model,
                             const struct FjsDataset *data,
                             double *out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void fjs_model_free(struct FjsModel *model);

/**
 * Expected negative log-likelihood of the optimal predictor on the benchmark target.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FjsStatus fjs_analytic_target_nll(double *out);

/**
 * Minimum of the discriminative importance objective over `w` for two
 * distributions of length `n`, written to `value`; the minimiser goes to
 * `w_star` when it is not null.
 *
 * # Safety
 * `p` and `q` must hold `n` values; `w_star` must be null or hold `n` values;
 * `value` must be valid for writes.
 */
enum FjsStatus fjs_optimal_importance(const double *p,
                                      const double *q,
                                      size_t n,
                                      double *w_star,
                                      double *value);

/**
 * Runs `trials` random instances of theorem suite `which` (1 or 2). A found
 * counterexample returns [`FjsStatus::Theory`].
 *
 * # Safety
 * `checked` must be valid for writes.
 */
enum FjsStatus fjs_verify_theorem(uint32_t which, size_t trials, uint64_t seed, size_t *checked);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FJS_H */
