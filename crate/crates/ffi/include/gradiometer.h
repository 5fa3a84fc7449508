#ifndef GRADIOMETER_H
#define GRADIOMETER_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status of an FFI call.
 */
typedef enum GradiometerStatus {
  GRADIOMETER_STATUS_OK = 0,
  GRADIOMETER_STATUS_NULL_POINTER = -1,
  GRADIOMETER_STATUS_INVALID_ARGUMENT = -2,
  GRADIOMETER_STATUS_CONFIG_ERROR = -3,
  GRADIOMETER_STATUS_IO_ERROR = -4,
  GRADIOMETER_STATUS_FIT_FAILED = -5,
  GRADIOMETER_STATUS_INSUFFICIENT_DATA = -6,
} GradiometerStatus;

/**
 * Opaque physics configuration handle.
 */
typedef struct GradiometerPhysics GradiometerPhysics;

/**
 * Flat ellipse-fit result.
 */
typedef struct GradiometerEllipseFit {
  double x_amplitude;
  double x_center;
  double y_amplitude;
  double y_center;
  /**
   * Differential phase, rad, in (0, pi).
   */
  double phi;
  /**
   * 1-sigma phase uncertainty, rad.
   */
  double dphi;
  /**
   * Per-coordinate residual RMS.
   */
  double rms;
  uint64_t n_points;
  /**
   * 1 when the geometric refinement converged.
   */
  int converged;
} GradiometerEllipseFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gradiometer_version(void);

/**
 * Message of the most recent error on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *gradiometer_last_error_message(void);

/**
 * New handle with the default instrument parameters.
 */
struct GradiometerPhysics *gradiometer_physics_new(void);

/**
 * Releases a physics handle. NULL is a no-op.
 *
 * # Safety
 * `handle` must come from `gradiometer_physics_new` and must not be used
 * after this call.
 */
void gradiometer_physics_free(struct GradiometerPhysics *handle);

/**
 * Sets one named physics field (keys match the config-file keys).
 *
 * # Safety
 * `handle` must come from `gradiometer_physics_new`; `key` must be a valid
 * NUL-terminated string.
 */
enum GradiometerStatus gradiometer_physics_set(struct GradiometerPhysics *handle,
                                               const char *key,
                                               double value);

/**
 * Reads one named physics field.
 *
 * # Safety
 * Pointer contracts as for `gradiometer_physics_set`; `out` must be valid.
 */
enum GradiometerStatus gradiometer_physics_get(struct GradiometerPhysics *handle,
                                               const char *key,
                                               double *out);

/**
 * Checks the structural invariants of the configuration.
 *
 * # Safety
 * `handle` must come from `gradiometer_physics_new`.
 */
enum GradiometerStatus gradiometer_physics_validate(const struct GradiometerPhysics *handle);

/**
 * Gravity gradient from a differential phase, s^-2, with a caller-supplied
 * source-mass correction.
 *
 * # Safety
 * `handle` must come from `gradiometer_physics_new`; `out` must be valid.
 */
enum GradiometerStatus gradiometer_physics_gradient_from_phase(const struct GradiometerPhysics *handle,
                                                               double phi,
                                                               double mass_correction,
                                                               double *out);

/**
 * First-order light-shifted Raman resonance `f0 + C_M I_M + C_S I_S`, Hz.
 */
double gradiometer_raman_resonance(double f0, double c_m, double c_s, double i_m, double i_s);

/**
 * Fringe-averaged quantum projection noise.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GradiometerStatus gradiometer_qpn_rms(double amplitude,
                                           double center,
                                           uint64_t atoms,
                                           double *out);

/**
 * Detection-noise variance at one normalized population.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GradiometerStatus gradiometer_detection_noise_at(double x,
                                                      uint64_t atoms,
                                                      double dn1_sq,
                                                      double dn2_sq,
                                                      double *out);

/**
 * Analytic area of a Gaussian-times-quartic detection peak; `a2` and `a4`
 * are the even polynomial coefficients.
 */
double gradiometer_peak_area(double height, double sigma, double a2, double a4);

/**
 * Fits the fringe ellipse to `len` (x, y) pairs.
 *
 * `bootstrap_resamples = 0` selects the linearized phase uncertainty.
 *
 * # Safety
 * `xs` and `ys` must point to `len` readable doubles; `out` must be valid.
 */
enum GradiometerStatus gradiometer_fit_ellipse(const double *xs,
                                               const double *ys,
                                               uintptr_t len,
                                               int refine,
                                               uint32_t bootstrap_resamples,
                                               uint64_t seed,
                                               struct GradiometerEllipseFit *out);

/**
 * Allan deviation of a uniformly spaced series over the octave tau grid.
 *
 * Fills up to `capacity` bins and stores the bin count in `written`; the
 * full grid has floor(log2(len/2)) + 1 bins.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `taus`, `sigmas`, `counts`
 * must each hold `capacity` writable elements; `written` must be valid.
 */
enum GradiometerStatus gradiometer_allan_deviation(const double *values,
                                                   uintptr_t len,
                                                   double dt,
                                                   int overlapping,
                                                   double *taus,
                                                   double *sigmas,
                                                   uint64_t *counts,
                                                   uintptr_t capacity,
                                                   uintptr_t *written);

/**
 * Runs a full simulation from a TOML configuration string and writes the
 * shot records as CSV (with a manifest JSON next to it).
 *
 * # Safety
 * Both arguments must be valid NUL-terminated strings.
 */
enum GradiometerStatus gradiometer_simulate_to_csv(const char *config_toml,
                                                   const char *out_csv_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRADIOMETER_H */
