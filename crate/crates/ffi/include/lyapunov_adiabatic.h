/* C interface to the lyapunov-adiabatic simulation engine. */

#ifndef LYAPUNOV_ADIABATIC_H
#define LYAPUNOV_ADIABATIC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LaStatus {
  LA_STATUS_OK = 0,
  LA_STATUS_NULL_POINTER = 1,
  LA_STATUS_INVALID_UTF8 = 2,
  LA_STATUS_INVALID_SCENARIO = 3,
  LA_STATUS_NUMERICAL = 4,
  LA_STATUS_IO = 5,
  LA_STATUS_OUT_OF_RANGE = 6,
  LA_STATUS_PANIC = 7,
} LaStatus;

/**
 * Completed run: trajectory, per-sample diagnostics and summary.
 */
typedef struct LaRun LaRun;

/**
 * Parsed, validated scenario.
 */
typedef struct LaScenario LaScenario;

/**
 * One recorded sample.
 */
typedef struct LaSample {
  double t;
  double fidelity;
  double lyapunov;
  double gap;
  double nonlinear;
  double tunneling;
  bool regularized;
  bool clamped;
} LaSample;

typedef struct LaSummary {
  size_t samples;
  double min_fidelity;
  double mean_fidelity;
  double final_fidelity;
  double min_gap;
  double regularized_fraction;
  double clamped_fraction;
  double max_norm_drift;
} LaSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *la_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *la_version(void);

/**
 * Parses a scenario JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LaStatus la_scenario_parse(const char *json, struct LaScenario **out);

/**
 * Loads a built-in preset by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LaStatus la_scenario_preset(const char *name, struct LaScenario **out);

/**
 * Fully defaulted scenario as JSON; release with [`la_string_free`].
 *
 * # Safety
 * `scenario` must come from this library and `out` be a valid pointer.
 */
enum LaStatus la_scenario_to_json(const struct LaScenario *scenario, char **out);

/**
 * # Safety
 * `scenario` must be null or come from this library, and not be used again.
 */
void la_scenario_free(struct LaScenario *scenario);

/**
 * Integrates a scenario. Any sweep in the scenario is ignored.
 *
 * # Safety
 * `scenario` must come from this library and `out` be a valid pointer.
 */
enum LaStatus la_run(const struct LaScenario *scenario, struct LaRun **out);

/**
 * # Safety
 * `run` must be null or come from this library, and not be used again.
 */
void la_run_free(struct LaRun *run);

/**
 * Number of recorded samples.
 *
 * # Safety
 * `run` must come from this library and `out` be a valid pointer.
 */
enum LaStatus la_run_len(const struct LaRun *run, size_t *out);

/**
 * Number of control fields per sample.
 *
 * # Safety
 * `run` must come from this library and `out` be a valid pointer.
 */
enum LaStatus la_run_field_count(const struct LaRun *run, size_t *out);

/**
 * # Safety
 * `run` must come from this library and `out` be a valid pointer.
 */
enum LaStatus la_run_sample(const struct LaRun *run, size_t index, struct LaSample *out);

/**
 * Copies the control fields of sample `index` into `buf`, which must hold
 * at least [`la_run_field_count`] values.
 *
 * # Safety
 * `run` must come from this library and `buf` point to `len` writable doubles.
 */
enum LaStatus la_run_fields(const struct LaRun *run, size_t index, double *buf, size_t len);

/**
 * # Safety
 * `run` must come from this library and `out` be a valid pointer.
 */
enum LaStatus la_run_summary(const struct LaRun *run, struct LaSummary *out);

/**
 * Writes the run's output files into `dir`, creating it if needed.
 *
 * # Safety
 * `run` must come from this library and `dir` be a NUL-terminated path.
 */
enum LaStatus la_run_write(const struct LaRun *run, const char *dir);

/**
 * Exact uncontrolled ground-state fidelity of the rotating-field model.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LaStatus la_rabi_oracle(double mu_b0, double theta, double omega, double t, double *out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not used again.
 */
void la_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LYAPUNOV_ADIABATIC_H */
