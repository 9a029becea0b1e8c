#ifndef FCOPULA_H
#define FCOPULA_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FcStatus {
  FC_STATUS_OK = 0,
  FC_STATUS_NULL_POINTER = 1,
  FC_STATUS_DOMAIN = 2,
  FC_STATUS_NUMERICAL = 3,
  FC_STATUS_FACTORIZATION = 4,
  FC_STATUS_DATA = 5,
  FC_STATUS_FIT = 6,
  FC_STATUS_CONFIG = 7,
  FC_STATUS_IO = 8,
  FC_STATUS_PARSE = 9,
  FC_STATUS_PANIC = 10,
} FcStatus;

/**
 * Factor rate and stationary correlation of the latent Gaussian field.
 */
typedef struct FcParams FcParams;

/**
 * Simulated replicates, stored row-major as `n_reps` rows of `n_sites`.
 */
typedef struct FcSimulation FcSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parameters with exponential correlation exp(-h/range).
 *
 * # Safety
 * `out_params` must be valid for a pointer write.
 */
enum FcStatus fc_params_new_exponential(double rate, double range, struct FcParams **out_params);

/**
 * Parameters with Matérn correlation of smoothness `nu`.
 *
 * # Safety
 * `out_params` must be valid for a pointer write.
 */
enum FcStatus fc_params_new_matern(double rate,
                                   double range,
                                   double nu,
                                   struct FcParams **out_params);

/**
 * Releases a handle from `fc_params_new_*`. Null is ignored.
 *
 * # Safety
 * `params` must come from this library and not be freed twice.
 */
void fc_params_free(struct FcParams *params);

/**
 * # Safety
 * `params` must be a live handle or null (null yields NaN).
 */
double fc_params_rate(const struct FcParams *params);

/**
 * # Safety
 * `params` must be a live handle or null (null yields NaN).
 */
double fc_params_range(const struct FcParams *params);

/**
 * Limiting tail dependence coefficient at distance `h`.
 *
 * # Safety
 * `params` must be a live handle and `out_chi` valid for a write.
 */
enum FcStatus fc_chi_limit(const struct FcParams *params, double h, double *out_chi);

/**
 * Tail dependence coefficient at level `u` and distance `h`.
 *
 * # Safety
 * `params` must be a live handle and `out_chi` valid for a write.
 */
enum FcStatus fc_chi_u(const struct FcParams *params, double h, double u, double *out_chi);

/**
 * Joint distribution function of the latent W at `w`, for `n` sites.
 * Lattice integration uses `qmc_points` points and `qmc_shifts` random
 * shifts drawn from `seed`; `out_error` (nullable) receives its error estimate.
 *
 * # Safety
 * `xs`, `ys` and `w` must hold `n` values; outputs must be valid for writes.
 */
enum FcStatus fc_joint_cdf(const struct FcParams *params,
                           const double *xs,
                           const double *ys,
                           const double *w,
                           size_t n,
                           size_t qmc_points,
                           size_t qmc_shifts,
                           uint64_t seed,
                           double *out_value,
                           double *out_error);

/**
 * Log joint density of the latent W at `w`, for `n` sites.
 *
 * # Safety
 * `xs`, `ys` and `w` must hold `n` values; `out_value` valid for a write.
 */
enum FcStatus fc_joint_log_density(const struct FcParams *params,
                                   const double *xs,
                                   const double *ys,
                                   const double *w,
                                   size_t n,
                                   double *out_value);

/**
 * Simulates `n_reps` replicates of W at `n` sites.
 *
 * # Safety
 * `xs` and `ys` must hold `n` values; `out_sim` valid for a pointer write.
 */
enum FcStatus fc_simulate(const struct FcParams *params,
                          const double *xs,
                          const double *ys,
                          size_t n,
                          size_t n_reps,
                          uint64_t seed,
                          struct FcSimulation **out_sim);

/**
 * Borrowed view of the simulated values (`n_reps * n_sites`, row-major).
 * Valid until the handle is freed. Null handles yield null and length 0.
 *
 * # Safety
 * `sim` must be a live handle or null; `out_len` valid for a write or null.
 */
const double *fc_simulation_values(const struct FcSimulation *sim, size_t *out_len);

/**
 * Releases a handle from `fc_simulate`. Null is ignored.
 *
 * # Safety
 * `sim` must come from this library and not be freed twice.
 */
void fc_simulation_free(struct FcSimulation *sim);

/**
 * Joint return period, in years, of every site exceeding level `u`.
 * `out_years` is +inf when no simulated replicate exceeded; `out_p_hat`
 * (nullable) receives the exceedance probability per replicate.
 *
 * # Safety
 * `xs` and `ys` must hold `n` values; outputs must be valid for writes.
 */
enum FcStatus fc_return_period(const struct FcParams *params,
                               const double *xs,
                               const double *ys,
                               size_t n,
                               double u,
                               size_t n_sims,
                               double replicates_per_year,
                               uint64_t seed,
                               double *out_years,
                               double *out_p_hat);

/**
 * Message of the last failed call on this thread, or null after a
 * success. Owned by the library; valid until the next call on this thread.
 */
const char *fc_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FCOPULA_H */
