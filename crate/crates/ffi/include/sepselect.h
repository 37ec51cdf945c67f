#ifndef SEPSELECT_H
#define SEPSELECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SepselectVariant {
  SEPSELECT_VARIANT_FULL = 0,
  SEPSELECT_VARIANT_NO_DIR_WITHIN = 1,
  SEPSELECT_VARIANT_NO_DIR_BETWEEN = 2,
  SEPSELECT_VARIANT_DISTANCE_ONLY = 3,
} SepselectVariant;

typedef enum SepselectStatus {
  SEPSELECT_STATUS_OK = 0,
  SEPSELECT_STATUS_NULL_POINTER = 1,
  SEPSELECT_STATUS_INVALID_ARGUMENT = 2,
  SEPSELECT_STATUS_IO = 3,
  SEPSELECT_STATUS_PARSE = 4,
  SEPSELECT_STATUS_DEGENERATE = 5,
  SEPSELECT_STATUS_PANIC = 6,
} SepselectStatus;

/**
 * Opaque dataset handle with its class partition.
 */
typedef struct SepselectDataset SepselectDataset;

/**
 * Opaque selection trace handle.
 */
typedef struct SepselectTrace SepselectTrace;

typedef struct SepselectParams {
  double alpha;
  double beta;
  enum SepselectVariant variant;
  double eps_norm;
  double eps_div;
} SepselectParams;

typedef struct SepselectScore {
  double theta_dis;
  double theta_dir;
  double lambda_dis;
  double lambda_dir;
  double sep;
} SepselectScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *sepselect_last_error(void);

/**
 * Default parameters: alpha = beta = 1, full criterion, 1e-12 guards.
 */
struct SepselectParams sepselect_params_default(void);

/**
 * Loads a CSV file. `label` is a header name or `#index`.
 *
 * # Safety
 * `path` and `label` must be NUL-terminated strings; `out` must be writable.
 */
enum SepselectStatus sepselect_dataset_load_csv(const char *path,
                                                const char *label,
                                                bool has_header,
                                                bool normalize,
                                                struct SepselectDataset **out);

/**
 * Builds a dataset from a row-major `n x m` matrix and integer class labels.
 *
 * # Safety
 * `features` must point to `n * m` doubles and `labels` to `n` values;
 * `out` must be writable.
 */
enum SepselectStatus sepselect_dataset_from_matrix(const double *features,
                                                   size_t n,
                                                   size_t m,
                                                   const uint32_t *labels,
                                                   bool normalize,
                                                   struct SepselectDataset **out);

/**
 * # Safety
 * `ds` must be NULL or a handle from this library that was not yet freed.
 */
void sepselect_dataset_free(struct SepselectDataset *ds);

/**
 * # Safety
 * `ds` must be a live dataset handle; output pointers must be writable.
 */
enum SepselectStatus sepselect_dataset_shape(const struct SepselectDataset *ds,
                                             size_t *n,
                                             size_t *m,
                                             size_t *p);

/**
 * Criterion on the given feature subset (an empty subset scores zero).
 *
 * # Safety
 * `ds` must be a live handle, `indices` must point to `len` values, `params`
 * must be readable and `out` writable.
 */
enum SepselectStatus sepselect_separability(const struct SepselectDataset *ds,
                                            const size_t *indices,
                                            size_t len,
                                            const struct SepselectParams *params,
                                            struct SepselectScore *out);

/**
 * Greedy selection of `k` features. `workers = 0` uses all cores.
 *
 * # Safety
 * `ds` must be a live handle, `params` readable and `out` writable.
 */
enum SepselectStatus sepselect_select(const struct SepselectDataset *ds,
                                      size_t k,
                                      const struct SepselectParams *params,
                                      size_t workers,
                                      struct SepselectTrace **out);

/**
 * Number of steps in a trace; 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live trace handle.
 */
size_t sepselect_trace_len(const struct SepselectTrace *trace);

/**
 * Step `step` (0-based) of a trace. Any output pointer may be NULL.
 *
 * # Safety
 * `trace` must be a live handle; non-NULL outputs must be writable.
 */
enum SepselectStatus sepselect_trace_step(const struct SepselectTrace *trace,
                                          size_t step,
                                          size_t *feature,
                                          double *gain,
                                          struct SepselectScore *score);

/**
 * Copies up to `cap` selected feature indices into `out`, in selection order.
 *
 * # Safety
 * `trace` must be a live handle and `out` must have room for `cap` values.
 */
enum SepselectStatus sepselect_trace_features(const struct SepselectTrace *trace,
                                              size_t *out,
                                              size_t cap);

/**
 * # Safety
 * `trace` must be NULL or a handle from this library that was not yet freed.
 */
void sepselect_trace_free(struct SepselectTrace *trace);

/**
 * Pooled kNN accuracy with stratified folds.
 *
 * # Safety
 * `ds` must be a live handle, `indices` must point to `len` values and
 * `out` must be writable.
 */
enum SepselectStatus sepselect_knn_accuracy(const struct SepselectDataset *ds,
                                            const size_t *indices,
                                            size_t len,
                                            size_t knn_k,
                                            size_t folds,
                                            uint64_t seed,
                                            double *out);

/**
 * Normalized mutual information of two labelings of equal length.
 *
 * # Safety
 * `labels` and `clusters` must point to `len` values; `out` must be writable.
 */
enum SepselectStatus sepselect_nmi(const size_t *labels,
                                   const size_t *clusters,
                                   size_t len,
                                   double *out);

/**
 * Nemenyi critical difference for `s` algorithms over `n` datasets.
 *
 * # Safety
 * `out` must be writable.
 */
enum SepselectStatus sepselect_nemenyi_cd(size_t s, size_t n, double q_alpha, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEPSELECT_H */
