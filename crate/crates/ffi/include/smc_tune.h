#ifndef SMC_TUNE_H
#define SMC_TUNE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum SmcStatus {
  SMC_STATUS_OK = 0,
  SMC_STATUS_NULL_POINTER = 1,
  SMC_STATUS_INVALID_ARGUMENT = 2,
  SMC_STATUS_INVALID_SCHEDULE = 3,
  SMC_STATUS_NO_FEASIBLE_POINT = 4,
  SMC_STATUS_BRACKET_NOT_FOUND = 5,
  SMC_STATUS_COLLAPSE = 6,
  SMC_STATUS_IO = 7,
  SMC_STATUS_PARSE = 8,
  SMC_STATUS_ALL_REPLICATIONS_FAILED = 9,
  SMC_STATUS_PANIC = 10,
} SmcStatus;

typedef enum SmcKernel {
  SMC_KERNEL_LMC = 0,
  SMC_KERNEL_KLMC = 1,
  SMC_KERNEL_MALA = 2,
} SmcKernel;

typedef enum SmcBackward {
  SMC_BACKWARD_TIME_CORRECT_FORWARD = 0,
  SMC_BACKWARD_FORWARD = 1,
  SMC_BACKWARD_DETAILED_BALANCE = 2,
} SmcBackward;

typedef enum SmcSchedule {
  SMC_SCHEDULE_LINEAR = 0,
  SMC_SCHEDULE_QUADRATIC = 1,
} SmcSchedule;

/**
 * Opaque result of one run.
 */
typedef struct SmcResult SmcResult;

/**
 * Opaque target density.
 */
typedef struct SmcTarget SmcTarget;

/**
 * Settings for [`smc_run`]. Start from [`smc_run_options_default`].
 */
typedef struct SmcRunOptions {
  enum SmcKernel kernel;
  /**
   * Ignored for KLMC; MALA requires `DETAILED_BALANCE`.
   */
  enum SmcBackward backward;
  enum SmcSchedule schedule;
  size_t steps;
  size_t particles;
  uint64_t seed;
  /**
   * Nonzero tunes the kernel at every step; zero uses `h` and `rho`.
   */
  int32_t adaptive;
  double h;
  double rho;
  double resample_threshold;
} SmcRunOptions;

/**
 * Objective callback for [`smc_minimize`]: returns `f(x)`; NaN and `+inf`
 * mark infeasible points.
 */
typedef double (*SmcObjectiveFn)(double x, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *smc_last_error_message(void);

void smc_clear_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *smc_version(void);

/**
 * `N(mean·1_dim, I)`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SmcStatus smc_target_gaussian(size_t dim, double mean, struct SmcTarget **out);

/**
 * Neal's funnel in `dim ≥ 2` dimensions.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SmcStatus smc_target_funnel(size_t dim, struct SmcTarget **out);

/**
 * Logistic regression on a CSV file whose last column holds the labels.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SmcStatus smc_target_logistic_csv(const char *path, struct SmcTarget **out);

/**
 * Logistic regression on a synthetic dataset; `dim = features + 1`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SmcStatus smc_target_logistic_synthetic(size_t rows,
                                             size_t features,
                                             uint64_t seed,
                                             struct SmcTarget **out);

/**
 * Dimension of a target; 0 for a null handle.
 *
 * # Safety
 * `target` must be null or a live handle.
 */
size_t smc_target_dim(const struct SmcTarget *target);

/**
 * Unnormalized log density of the target at `x[0..len]`.
 *
 * # Safety
 * `target` must be a live handle, `x` must point to `len` doubles and `out`
 * to one writable double.
 */
enum SmcStatus smc_target_log_density(const struct SmcTarget *target,
                                      const double *x,
                                      size_t len,
                                      double *out);

/**
 * # Safety
 * `target` must be null or a handle not yet freed.
 */
void smc_target_free(struct SmcTarget *target);

/**
 * Adaptive LMC with the time-correct forward potential, quadratic schedule,
 * 64 steps, 1024 particles.
 */
struct SmcRunOptions smc_run_options_default(void);

/**
 * Runs SMC on `target`; writes a result handle to `out`.
 *
 * # Safety
 * `target` must be a live handle, `options` null (defaults) or valid, and
 * `out` a valid pointer.
 */
enum SmcStatus smc_run(const struct SmcTarget *target,
                       const struct SmcRunOptions *options,
                       struct SmcResult **out);

/**
 * `log Ẑ`; NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double smc_result_log_z(const struct SmcResult *result);

/**
 * Number of SMC steps `T`.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t smc_result_steps(const struct SmcResult *result);

/**
 * Total objective evaluations spent on tuning.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t smc_result_evaluations(const struct SmcResult *result);

/**
 * Step size and refreshment rate used at step `t` (1-based). `rho` is set
 * to NaN for kernels without momentum; either output may be null.
 *
 * # Safety
 * `result` must be a live handle; non-null outputs must be writable.
 */
enum SmcStatus smc_result_step(const struct SmcResult *result, size_t t, double *h, double *rho);

/**
 * Per-step diagnostics as a JSON string; free it with [`smc_string_free`].
 *
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum SmcStatus smc_result_to_json(const struct SmcResult *result, char **out);

/**
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void smc_result_free(struct SmcResult *result);

/**
 * Runs a replicated experiment described by a flat JSON config and writes
 * its summary and diagnostics as JSON to `out`.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SmcStatus smc_experiment_run_json(const char *config_json, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void smc_string_free(char *s);

/**
 * Minimizes a one-dimensional objective from `x0` by feasibility back-off,
 * bracketing and golden-section search. Writes the minimizer and the number
 * of distinct objective evaluations.
 *
 * # Safety
 * `f` must be safe to call with `user_data`; `x_out` must be writable and
 * `evaluations_out` null or writable.
 */
enum SmcStatus smc_minimize(SmcObjectiveFn f,
                            void *user_data,
                            double x0,
                            double c,
                            double r,
                            double epsilon,
                            double delta,
                            double *x_out,
                            size_t *evaluations_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMC_TUNE_H */
