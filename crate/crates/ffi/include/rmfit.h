#ifndef RMFIT_H
#define RMFIT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RmfitStatus {
  RMFIT_STATUS_OK = 0,
  RMFIT_STATUS_NULL_POINTER = 1,
  RMFIT_STATUS_INVALID_ARGUMENT = 2,
  RMFIT_STATUS_MODE_MISMATCH = 3,
  RMFIT_STATUS_GRID_MISMATCH = 4,
  RMFIT_STATUS_SINGULAR_MATRIX = 5,
  RMFIT_STATUS_RESTART_OUTSIDE_REGION = 6,
  RMFIT_STATUS_TRUNCATION_STORM = 7,
  RMFIT_STATUS_NOT_CONVERGED = 8,
  RMFIT_STATUS_PANIC = 9,
} RmfitStatus;

typedef enum RmfitPotential {
  /**
   * `V(u) = u²/2 + u⁴/4`.
   */
  RMFIT_POTENTIAL_QUARTIC = 0,
  /**
   * `V(u) = (4 - u²)²/4`.
   */
  RMFIT_POTENTIAL_DOUBLE_WELL = 1,
} RmfitPotential;

typedef enum RmfitPolicyKind {
  RMFIT_POLICY_KIND_FIXED = 0,
  RMFIT_POLICY_KIND_EXPANDING = 1,
} RmfitPolicyKind;

typedef enum RmfitRegionShape {
  /**
   * Open interval `(lo - growth k, hi + growth k)`; scalar problems.
   */
  RMFIT_REGION_SHAPE_INTERVAL = 0,
  /**
   * `‖x‖_{H¹} <= radius + growth k`; path problems.
   */
  RMFIT_REGION_SHAPE_H1_BALL = 1,
} RmfitRegionShape;

/**
 * Problem definition (potential, ε, grid and boundary values).
 */
typedef struct RmfitProblem RmfitProblem;

/**
 * Result of a Robbins–Monro run.
 */
typedef struct RmfitRun RmfitRun;

/**
 * Seeded Gaussian sampler matched to a problem.
 */
typedef struct RmfitSampler RmfitSampler;

/**
 * Trust-region family. Fields not used by `shape` are ignored.
 */
typedef struct RmfitRegion {
  enum RmfitRegionShape shape;
  double lo;
  double hi;
  double radius;
  double growth;
} RmfitRegion;

/**
 * Step sizes `a_n = a0 / (n + n0)^gamma`.
 */
typedef struct RmfitSchedule {
  double a0;
  double n0;
  double gamma;
} RmfitSchedule;

/**
 * One thinned trace row.
 */
typedef struct RmfitRecord {
  size_t n;
  size_t sigma;
  double step_size;
  bool truncated;
  bool non_finite;
  double norm_x;
} RmfitRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread; empty after a
 * successful call. Valid until the next `rmfit_*` call on the same thread.
 */
const char *rmfit_last_error(void);

enum RmfitStatus rmfit_problem_new_scalar(enum RmfitPotential potential_kind,
                                          double epsilon,
                                          struct RmfitProblem **out);

/**
 * Path problem on a grid with `n_interior` interior nodes, reference mean
 * the linear interpolant of `m_minus` and `m_plus`.
 */
enum RmfitStatus rmfit_problem_new_path(enum RmfitPotential potential_kind,
                                        double epsilon,
                                        size_t n_interior,
                                        double m_minus,
                                        double m_plus,
                                        struct RmfitProblem **out);

void rmfit_problem_free(struct RmfitProblem *problem);

/**
 * Length of state vectors for this problem (1 for scalar problems).
 */
size_t rmfit_problem_state_len(const struct RmfitProblem *problem);

enum RmfitStatus rmfit_sampler_new(const struct RmfitProblem *problem,
                                   uint64_t seed,
                                   struct RmfitSampler **out);

void rmfit_sampler_free(struct RmfitSampler *sampler);

/**
 * Writes the drift `f(x)` to `out`.
 */
enum RmfitStatus rmfit_drift(const struct RmfitProblem *problem,
                             const double *x,
                             size_t len,
                             double *out);

/**
 * Writes one noisy evaluation `F(x, ξ)` to `out`, advancing the sampler.
 */
enum RmfitStatus rmfit_noisy_oracle(const struct RmfitProblem *problem,
                                    struct RmfitSampler *sampler,
                                    const double *x,
                                    size_t len,
                                    double *out);

/**
 * Newton solve for a root of the drift of a path problem. `x_init` may be
 * null to start from zero. On `NotConverged` the outputs still hold the last
 * iterate and its residual.
 */
enum RmfitStatus rmfit_bvp_solve(const struct RmfitProblem *problem,
                                 const double *x_init,
                                 size_t len,
                                 double tol,
                                 size_t max_iters,
                                 double *x_out,
                                 double *residual_out,
                                 size_t *iterations_out);

/**
 * The `k` smallest eigenvalues (ascending) of the second variation at `x`.
 */
enum RmfitStatus rmfit_schrodinger_eigs(const struct RmfitProblem *problem,
                                        const double *x,
                                        size_t len,
                                        size_t k,
                                        double *eigenvalues_out);

/**
 * Truncated Robbins–Monro from `x0` (or from `restart` when `x0` is null).
 * Keeps every `record_every`-th trace row plus the last one.
 */
enum RmfitStatus rmfit_run(const struct RmfitProblem *problem,
                           enum RmfitPolicyKind policy,
                           const struct RmfitRegion *region,
                           const double *restart,
                           const double *x0,
                           size_t len,
                           const struct RmfitSchedule *schedule,
                           size_t n_iters,
                           uint64_t seed,
                           size_t record_every,
                           size_t sigma_cap,
                           struct RmfitRun **out);

void rmfit_run_free(struct RmfitRun *run);

enum RmfitStatus rmfit_run_final_state(const struct RmfitRun *run, double *out, size_t len);

size_t rmfit_run_truncations(const struct RmfitRun *run);

size_t rmfit_run_iterations(const struct RmfitRun *run);

size_t rmfit_run_record_count(const struct RmfitRun *run);

enum RmfitStatus rmfit_run_record(const struct RmfitRun *run,
                                  size_t index,
                                  struct RmfitRecord *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RMFIT_H */
