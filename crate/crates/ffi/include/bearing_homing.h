#ifndef BEARING_HOMING_H
#define BEARING_HOMING_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BhStatus {
  BH_STATUS_OK = 0,
  BH_STATUS_NULL_POINTER = 1,
  BH_STATUS_INVALID_ARGUMENT = 2,
  BH_STATUS_INVALID_SCENARIO = 3,
  BH_STATUS_NEAR_HOME_SINGULARITY = 4,
  BH_STATUS_DEGENERATE_GEOMETRY = 5,
  BH_STATUS_ILL_CONDITIONED = 6,
  BH_STATUS_IO = 7,
  BH_STATUS_PANIC = 8,
} BhStatus;

/**
 * A validated scenario.
 */
typedef struct BhScenario BhScenario;

/**
 * One simulated replicate.
 */
typedef struct BhTrajectory BhTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into this library from the same thread.
 */
const char *bh_last_error_message(void);

/**
 * Home distance `D*` of a landmark seen at bearing `beta` from the pose
 * `(r, theta, alpha)`, given its home bearing `beta_star`.
 *
 * # Safety
 * `out` must be a valid pointer to a writable `double`.
 */
enum BhStatus bh_landmark_distance(double r,
                                   double theta,
                                   double alpha,
                                   double beta,
                                   double beta_star,
                                   double *out);

/**
 * Homing law `ω = π − wrap(α̂ − θ̂)`. A non-positive `omega_limit` means no
 * saturation.
 */
double bh_homing_omega(double alpha_hat, double theta_hat, double omega_limit);

/**
 * Numeric rank of the observability matrix at the pose `(r, theta, alpha)`
 * for `q` landmarks given by home bearings and home distances. Bearings are
 * computed from the geometry.
 *
 * # Safety
 * `beta_star` and `d_star` must point to `q` doubles; `rank_out` must be
 * writable.
 */
enum BhStatus bh_observability_rank(const double *beta_star,
                                    const double *d_star,
                                    size_t q,
                                    double r,
                                    double theta,
                                    double alpha,
                                    size_t *rank_out);

/**
 * Parses and validates a scenario from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable. The handle
 * written to `out` must be released with [`bh_scenario_free`].
 */
enum BhStatus bh_scenario_from_toml(const char *toml, struct BhScenario **out);

/**
 * # Safety
 * `sc` must be null or a handle from [`bh_scenario_from_toml`] not yet freed.
 */
void bh_scenario_free(struct BhScenario *sc);

/**
 * # Safety
 * `sc` must be a live scenario handle.
 */
size_t bh_scenario_landmark_count(const struct BhScenario *sc);

/**
 * Number of filters configured; valid `filter_index` values are below it.
 *
 * # Safety
 * `sc` must be a live scenario handle.
 */
size_t bh_scenario_filter_count(const struct BhScenario *sc);

/**
 * Simulates one replicate. A run aborted by a filter singularity still
 * yields a trajectory; see [`bh_trajectory_failed`].
 *
 * # Safety
 * `sc` must be a live scenario handle and `out` writable. The handle written
 * to `out` must be released with [`bh_trajectory_free`].
 */
enum BhStatus bh_run_replicate(const struct BhScenario *sc,
                               size_t filter_index,
                               uint64_t seed,
                               struct BhTrajectory **out);

/**
 * # Safety
 * `t` must be null or a handle from [`bh_run_replicate`] not yet freed.
 */
void bh_trajectory_free(struct BhTrajectory *t);

/**
 * Number of records.
 *
 * # Safety
 * `t` must be a live trajectory handle.
 */
size_t bh_trajectory_len(const struct BhTrajectory *t);

/**
 * Length of the truth and estimate vectors of each record.
 *
 * # Safety
 * `t` must be a live trajectory handle.
 */
size_t bh_trajectory_dim(const struct BhTrajectory *t);

/**
 * 1 if the replicate was aborted, 0 otherwise (also for a null handle).
 *
 * # Safety
 * `t` must be a live trajectory handle.
 */
int32_t bh_trajectory_failed(const struct BhTrajectory *t);

/**
 * Copies record `k` into `truth` and `estimate`, each of length `len`
 * (must equal [`bh_trajectory_dim`]).
 *
 * # Safety
 * `t` must be a live trajectory handle; `truth` and `estimate` must point to
 * `len` writable doubles.
 */
enum BhStatus bh_trajectory_record(const struct BhTrajectory *t,
                                   size_t k,
                                   double *truth,
                                   double *estimate,
                                   size_t len);

/**
 * Per-component RMSE into `out` (length [`bh_trajectory_dim`]).
 *
 * # Safety
 * `t` must be a live trajectory handle; `out` must point to `len` writable
 * doubles.
 */
enum BhStatus bh_trajectory_rmse(const struct BhTrajectory *t, double *out, size_t len);

/**
 * Writes the trajectory CSV to `path`.
 *
 * # Safety
 * `t` must be a live trajectory handle and `path` a NUL-terminated string.
 */
enum BhStatus bh_trajectory_write_csv(const struct BhTrajectory *t, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BEARING_HOMING_H */
