#ifndef GEOFLOW_H
#define GEOFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum GfStatus {
  GF_STATUS_OK = 0,
  GF_STATUS_NULL_POINTER = 1,
  GF_STATUS_INVALID_INPUT = 2,
  GF_STATUS_OBSTRUCTION = 3,
  GF_STATUS_REALITY = 4,
  GF_STATUS_INTEGRATION = 5,
  GF_STATUS_METRIC = 6,
  GF_STATUS_PANIC = 7,
} GfStatus;

// Cascade outcome as seen from C.
typedef enum GfVerdict {
  GF_VERDICT_INTEGRAL_FOUND = 0,
  GF_VERDICT_OBSTRUCTION_HIT = 1,
  GF_VERDICT_REALITY_FAILED = 2,
} GfVerdict;

// Result of a cascade run.
typedef struct GfCascadeReport GfCascadeReport;

// A truncated Fourier series on a torus.
typedef struct GfField GfField;

// A uniformly sampled trajectory.
typedef struct GfTrajectory GfTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gf_version(void);

// Message of the last failure on this thread, or NULL. Free with [`gf_string_free`].
char *gf_last_error_message(void);

// Release a string returned by this library.
//
// # Safety
// `s` must be NULL or a pointer obtained from this library, freed once.
void gf_string_free(char *s);

// Parse a field from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum GfStatus gf_field_from_json(const char *json, struct GfField **out);

// `mean + amp · cos(2πk x/Lx + 2πl y/Ly)` on a lattice with the given band limit.
//
// # Safety
// `out` must be writable.
enum GfStatus gf_field_cosine(double lx,
                              double ly,
                              uint32_t band,
                              int32_t k,
                              int32_t l,
                              double amp,
                              double mean,
                              struct GfField **out);

// Sum of two fields on the same torus.
//
// # Safety
// `a`, `b` must be live field handles and `out` writable.
enum GfStatus gf_field_add(const struct GfField *a, const struct GfField *b, struct GfField **out);

// Value at `(x, y)`.
//
// # Safety
// `field` must be live; `re`, `im` writable.
enum GfStatus gf_field_evaluate(const struct GfField *field,
                                double x,
                                double y,
                                double *re,
                                double *im);

// JSON form of a field. Free with [`gf_string_free`].
//
// # Safety
// `field` must be live and `out` writable.
enum GfStatus gf_field_to_json(const struct GfField *field, char **out);

// # Safety
// `field` must be NULL or a live handle, freed once.
void gf_field_free(struct GfField *field);

// Run the cascade of degree `k` at energy `energy` with leading coefficient
// `a_re + i a_im` and default options.
//
// # Safety
// `metric` must be live and `out` writable.
enum GfStatus gf_cascade_run(const struct GfField *metric,
                             uintptr_t k,
                             double energy,
                             double a_re,
                             double a_im,
                             struct GfCascadeReport **out);

// Verdict of a cascade; `step` receives the obstructed index when relevant.
//
// # Safety
// `report` must be live; `verdict`, `step` writable.
enum GfStatus gf_cascade_verdict(const struct GfCascadeReport *report,
                                 enum GfVerdict *verdict,
                                 uintptr_t *step);

// Grid sup-norm of the closing residual, or a negative value when the
// cascade stopped early.
//
// # Safety
// `report` must be live.
double gf_cascade_closing_norm(const struct GfCascadeReport *report);

// Coefficient `a_n` of the cascade as a new field handle.
//
// # Safety
// `report` must be live and `out` writable.
enum GfStatus gf_cascade_coefficient(const struct GfCascadeReport *report,
                                     uintptr_t n,
                                     struct GfField **out);

// JSON report. Free with [`gf_string_free`].
//
// # Safety
// `report` must be live and `out` writable.
enum GfStatus gf_cascade_report_json(const struct GfCascadeReport *report, char **out);

// # Safety
// `report` must be NULL or a live handle, freed once.
void gf_cascade_report_free(struct GfCascadeReport *report);

// Integrate the geodesic flow of `metric` (magnetic when `field` is not NULL)
// from `state = [x, y, px, py]` over `[0, duration]`.
//
// # Safety
// `metric` must be live, `field` NULL or live, `state` four readable doubles,
// `out` writable.
enum GfStatus gf_simulate(const struct GfField *metric,
                          const struct GfField *field,
                          const double *state,
                          double duration,
                          double rtol,
                          double atol,
                          uintptr_t samples,
                          struct GfTrajectory **out);

// Number of samples, or 0 for NULL.
//
// # Safety
// `traj` must be NULL or live.
uintptr_t gf_trajectory_len(const struct GfTrajectory *traj);

// Sample `i` as `[t, x, y, px, py, H]`.
//
// # Safety
// `traj` must be live and `row` six writable doubles.
enum GfStatus gf_trajectory_sample(const struct GfTrajectory *traj, uintptr_t i, double *row);

// `max |H(t) − H(0)|` over the samples, or NaN for NULL.
//
// # Safety
// `traj` must be NULL or live.
double gf_trajectory_energy_drift(const struct GfTrajectory *traj);

// CSV text of the trajectory. Free with [`gf_string_free`].
//
// # Safety
// `traj` must be live and `out` writable.
enum GfStatus gf_trajectory_csv(const struct GfTrajectory *traj, char **out);

// # Safety
// `traj` must be NULL or a live handle, freed once.
void gf_trajectory_free(struct GfTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOFLOW_H */
