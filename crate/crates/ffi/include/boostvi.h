#ifndef BOOSTVI_H
#define BOOSTVI_H

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum BvStatus {
  BV_STATUS_OK = 0,
  BV_STATUS_NULL_POINTER = 1,
  BV_STATUS_INVALID_ARGUMENT = 2,
  BV_STATUS_CONFIG = 3,
  BV_STATUS_NUMERIC = 4,
  BV_STATUS_SOLVER = 5,
  BV_STATUS_IO = 6,
  BV_STATUS_OUT_OF_RANGE = 7,
  BV_STATUS_PANIC = 8,
} BvStatus;

/**
 * Step rule of a boosting run.
 */
typedef enum BvAlgorithm {
  BV_ALGORITHM_FW_FIXED = 0,
  BV_ALGORITHM_FW_LINESEARCH = 1,
  BV_ALGORITHM_NORM_CORRECTIVE = 2,
  BV_ALGORITHM_FULLY_CORRECTIVE = 3,
} BvAlgorithm;

/**
 * Atom family: support box, σ range and mean quantization.
 */
typedef struct BvFamily BvFamily;

/**
 * Mixture of truncated Gaussian atoms.
 */
typedef struct BvMixture BvMixture;

/**
 * Trace and final mixture of a boosting run.
 */
typedef struct BvRunResult BvRunResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next call into the library from the same thread.
 */
const char *bv_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bv_version(void);

/**
 * Creates an atom family on the box [lower, upper] of dimension `dim`.
 *
 * # Safety
 * `lower` and `upper` must point to `dim` values; `out` must be writable.
 */
enum BvStatus bv_family_new(size_t dim,
                            const double *lower,
                            const double *upper,
                            double sigma_min,
                            double sigma_max,
                            double mean_stride,
                            struct BvFamily **out);

/**
 * # Safety
 * `family` must come from [`bv_family_new`] and not be used afterwards. Null is ignored.
 */
void bv_family_free(struct BvFamily *family);

/**
 * Smoothness constant L = 1/ε and curvature bound of the family.
 *
 * # Safety
 * `family` must be a live handle; the outputs must be writable.
 */
enum BvStatus bv_family_constants(const struct BvFamily *family,
                                  double *l_smooth,
                                  double *curvature_bound);

/**
 * Creates a mixture of `n` atoms of `family`. `means` is row-major n × dim;
 * means and σ are projected into the family.
 *
 * # Safety
 * `means` must hold n·dim values, `sigmas` and `weights` n values each.
 */
enum BvStatus bv_mixture_new(const struct BvFamily *family,
                             size_t n,
                             const double *means,
                             const double *sigmas,
                             const double *weights,
                             struct BvMixture **out);

/**
 * # Safety
 * `mixture` must come from this library and not be used afterwards. Null is ignored.
 */
void bv_mixture_free(struct BvMixture *mixture);

/**
 * Number of atoms, or 0 for a null handle.
 *
 * # Safety
 * `mixture` must be null or a live handle.
 */
size_t bv_mixture_len(const struct BvMixture *mixture);

/**
 * Copies the mixture weights into `weights`, which has room for `capacity` values.
 *
 * # Safety
 * `mixture` must be a live handle and `weights` writable for `capacity` values.
 */
enum BvStatus bv_mixture_weights(const struct BvMixture *mixture, double *weights, size_t capacity);

/**
 * log q(z) for a point of the mixture's dimension.
 *
 * # Safety
 * `z` must hold `dim` values and `out` must be writable.
 */
enum BvStatus bv_mixture_log_pdf(const struct BvMixture *mixture,
                                 const double *z,
                                 size_t dim,
                                 double *out);

/**
 * Draws `n` samples into `out` (row-major n × dim) from a seeded stream.
 *
 * # Safety
 * `out` must be writable for n·dim values.
 */
enum BvStatus bv_mixture_sample(const struct BvMixture *mixture,
                                size_t n,
                                uint64_t seed,
                                double *out);

/**
 * Boosts a mixture towards a Gaussian-mixture target truncated to the
 * family's box, using the exhaustive grid oracle (d ≤ 2). `means` is
 * row-major n_components × dim. `curvature` ≤ 0 selects the family bound.
 *
 * # Safety
 * The component arrays must hold the stated number of values and `out` must be writable.
 */
enum BvStatus bv_run_gauss_mix(const struct BvFamily *family,
                               size_t n_components,
                               const double *weights,
                               const double *means,
                               const double *sigmas,
                               enum BvAlgorithm algorithm,
                               size_t iterations,
                               size_t grid_means,
                               size_t grid_sigmas,
                               double curvature,
                               struct BvRunResult **out);

/**
 * Runs an experiment config file as the `boostvi run` command would, without
 * writing artifacts.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum BvStatus bv_run_config_file(const char *path, struct BvRunResult **out);

/**
 * # Safety
 * `result` must come from this library and not be used afterwards. Null is ignored.
 */
void bv_result_free(struct BvRunResult *result);

/**
 * Number of trace rows (the initial row plus one per completed iteration), or 0 for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t bv_result_len(const struct BvRunResult *result);

/**
 * Objective value and its standard error at trace row `row`.
 *
 * # Safety
 * `result` must be a live handle and the outputs writable.
 */
enum BvStatus bv_result_objective(const struct BvRunResult *result,
                                  size_t row,
                                  double *value,
                                  double *stderr);

/**
 * A copy of the final mixture, released with [`bv_mixture_free`].
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum BvStatus bv_result_mixture(const struct BvRunResult *result, struct BvMixture **out);

/**
 * The trace as CSV, released with [`bv_string_free`].
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum BvStatus bv_result_trace_csv(const struct BvRunResult *result, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void bv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOOSTVI_H */
