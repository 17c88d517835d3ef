#ifndef SUBDIFF_H
#define SUBDIFF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum {
  SD_STATUS_OK = 0,
  SD_STATUS_NULL_POINTER = 1,
  SD_STATUS_INVALID_ARGUMENT = 2,
  SD_STATUS_NUMERIC = 3,
  SD_STATUS_PANIC = 4,
} SdStatus;

typedef enum {
  SD_BOUNDARY_PINNED = 0,
  SD_BOUNDARY_PERIODIC = 1,
} SdBoundary;

typedef enum {
  SD_REGIME_VARIANCE_COLLAPSE = 0,
  SD_REGIME_BOUNDED_VARIANCE = 1,
  SD_REGIME_LOG_OR_SUBDIFFUSIVE = 2,
  SD_REGIME_SUBDIFFUSIVE = 3,
  SD_REGIME_DIFFUSIVE = 4,
} SdRegime;

/**
 * Opaque model handle.
 */
typedef struct SdModel SdModel;

/**
 * Opaque handle to a finished MCMC run.
 */
typedef struct SdRun SdRun;

/**
 * Model parameters. `gamma = 2` selects the quadratic potential.
 */
typedef struct {
  uint32_t t;
  size_t n_per_unit;
  size_t dim;
  double alpha;
  double gamma;
  double xi;
  double zeta;
  SdBoundary boundary;
} SdModelParams;

/**
 * Sampler settings; zero `shift_stride` means one unit of time.
 */
typedef struct {
  size_t sweeps;
  size_t burn_in;
  double proposal_scale;
  size_t shift_stride;
  size_t chains;
  size_t batches;
  uint64_t seed;
} SdMcmcParams;

typedef struct {
  double mean;
  double std_error;
  double n_effective;
  double iat;
} SdEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error of this thread into `buf` (NUL-terminated, truncated
 * to `len`). Returns the full message length without the NUL, or 0 if none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t sd_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sd_version(void);

/**
 * # Safety
 * `params` must be valid; `out` must be writable. Free with [`sd_model_free`].
 */
SdStatus sd_model_new(const SdModelParams *params, SdModel **out);

/**
 * # Safety
 * `model` must come from [`sd_model_new`] and not be used afterwards.
 */
void sd_model_free(SdModel *model);

/**
 * Number of grid points `N + 1`; a path has this many points.
 *
 * # Safety
 * `model` must be a live handle or null (returns 0).
 */
size_t sd_model_point_count(const SdModel *model);

/**
 * Energy of a path given as `point_count * dim` coordinates, point-major.
 *
 * # Safety
 * `coords` must point to `len` doubles; `out` must be writable.
 */
SdStatus sd_model_energy(const SdModel *model, const double *coords, size_t len, double *out);

/**
 * Exact `E|x_n − x_m|²` (quadratic potential only).
 *
 * # Safety
 * `out` must be writable.
 */
SdStatus sd_exact_sq_increment(const SdModel *model, size_t m, size_t n, double *out);

/**
 * Exact mean squared displacement over the horizon.
 *
 * # Safety
 * `out` must be writable.
 */
SdStatus sd_exact_msd(const SdModel *model, double *out);

/**
 * Runs the sampler with the default observables. Free with [`sd_run_free`].
 *
 * # Safety
 * Pointers must be valid; `out` must be writable.
 */
SdStatus sd_sample(const SdModel *model, const SdMcmcParams *params, SdRun **out);

/**
 * # Safety
 * `run` must come from [`sd_sample`] and not be used afterwards.
 */
void sd_run_free(SdRun *run);

/**
 * # Safety
 * `run` must be a live handle or null (returns 0).
 */
size_t sd_run_observable_count(const SdRun *run);

/**
 * Label of observable `index`, owned by the run handle.
 *
 * # Safety
 * `run` must be a live handle. Returns null when out of range.
 */
const char *sd_run_label(const SdRun *run, size_t index);

/**
 * # Safety
 * `out` must be writable.
 */
SdStatus sd_run_estimate(const SdRun *run, size_t index, SdEstimate *out);

/**
 * Regime of `(gamma, xi)`, with `gamma` in (0, 2).
 *
 * # Safety
 * `out` must be writable.
 */
SdStatus sd_regime(double gamma, double xi, SdRegime *out);

/**
 * `n`-th iterate of `x ↦ c + d x` from 1, with its distance to the fixed point.
 *
 * # Safety
 * `value` and `error` must be writable.
 */
SdStatus sd_fixed_point_iterate(double c, double d, uint32_t n, double *value, double *error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBDIFF_H */
