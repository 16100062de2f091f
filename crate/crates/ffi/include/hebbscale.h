#ifndef HEBBSCALE_H
#define HEBBSCALE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Largest dimension whose census fits in 64-bit counts.
 */
#define HS_CENSUS_MAX_N 40

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_ARGUMENT = 2,
  HS_STATUS_NOT_CONVERGED = 3,
  HS_STATUS_INSUFFICIENT_DATA = 4,
  HS_STATUS_OVERFLOW = 5,
  HS_STATUS_NUMERICAL = 6,
  HS_STATUS_PANIC = 7,
} HsStatus;

/**
 * Gradient mean and spread on a grid of overlaps.
 */
typedef struct HsGradientStats HsGradientStats;

/**
 * Input model: dimensions, latent distribution and mixing directions.
 */
typedef struct HsSource HsSource;

/**
 * Outcome of one learning run.
 */
typedef struct HsRunResult {
  /**
   * First step with overlap at or above the target; valid if `converged`.
   */
  uint64_t crossing;
  uint64_t steps;
  double final_overlap;
  bool converged;
} HsRunResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *hs_last_error(void);

/**
 * Library version as a static string.
 */
const char *hs_version(void);

/**
 * Counts of minima, maxima and saddles on the `n`-sphere.
 * Returns `Overflow` for `n > HS_CENSUS_MAX_N`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
enum HsStatus hs_census(uint32_t n, uint64_t *minima, uint64_t *maxima, uint64_t *saddles);

/**
 * Predicted largest overlap of a random direction with `k` features.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
enum HsStatus hs_predicted_max_overlap(uint64_t n, uint64_t k, double *result);

/**
 * Monte-Carlo mean and standard deviation of the largest overlap.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
enum HsStatus hs_measured_max_overlap(uint64_t n,
                                      uint64_t k,
                                      uint64_t trials,
                                      uint64_t seed,
                                      double *mean,
                                      double *std);

/**
 * Creates a source with `n` inputs and `k` features. `seed` fixes the mixing
 * directions when `k > n`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
enum HsStatus hs_source_new(uint64_t n,
                            uint64_t k,
                            const char *distribution,
                            uint64_t seed,
                            struct HsSource **source);

/**
 * Releases a source. Null is ignored.
 *
 * # Safety
 * `source` must come from [`hs_source_new`] and not be used afterwards.
 */
void hs_source_free(struct HsSource *source);

/**
 * Number of inputs of `source`, or 0 for null.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
uint64_t hs_source_inputs(const struct HsSource *source);

/**
 * Draws `count` input vectors into `buffer`, row-major, which must hold
 * `count * n` doubles (`len` is its length in doubles).
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
enum HsStatus hs_source_sample(const struct HsSource *source,
                               uint64_t count,
                               uint64_t seed,
                               double *buffer,
                               uint64_t len);

/**
 * Gradient statistics on `points` log-spaced overlaps in `[lo, hi]`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
enum HsStatus hs_gradstats_new(const char *distribution,
                               double threshold,
                               double lo,
                               double hi,
                               uint64_t points,
                               uint64_t samples,
                               uint64_t seed,
                               struct HsGradientStats **stats);

/**
 * Releases gradient statistics. Null is ignored.
 *
 * # Safety
 * `stats` must come from [`hs_gradstats_new`] and not be used afterwards.
 */
void hs_gradstats_free(struct HsGradientStats *stats);

/**
 * Number of grid points, or 0 for null.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
uint64_t hs_gradstats_len(const struct HsGradientStats *stats);

/**
 * Row `index` of the statistics: overlap, mean gradient, its standard
 * error, and gradient standard deviation.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
enum HsStatus hs_gradstats_row(const struct HsGradientStats *stats,
                               uint64_t index,
                               double *d,
                               double *mu,
                               double *mu_se,
                               double *sigma);

/**
 * Predicted number of steps from overlap `d0` to `target` at input dimension `n`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
enum HsStatus hs_predict_time(const struct HsGradientStats *stats,
                              uint64_t n,
                              double d0,
                              double target,
                              double *result);

/**
 * Optimal learning rate at overlap `d` and input dimension `n`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
enum HsStatus hs_adaptive_eta(const struct HsGradientStats *stats,
                              double d,
                              uint64_t n,
                              double *result);

/**
 * Runs online learning from a random start until the overlap reaches
 * `target` or `max_steps` pass. With `stats` null the rate is fixed at
 * `eta`; otherwise it is adaptive and `eta` is ignored. A run that does not
 * converge still fills `result` and returns `NotConverged`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes
 * described above; handles must be live.
 */
enum HsStatus hs_simulate(const struct HsSource *source,
                          const struct HsGradientStats *stats,
                          double eta,
                          double target,
                          uint64_t max_steps,
                          uint64_t seed,
                          struct HsRunResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEBBSCALE_H */
