#ifndef MIRRORFIX_H
#define MIRRORFIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum MfxStatus {
  MFX_STATUS_OK = 0,
  MFX_STATUS_NULL_POINTER = 1,
  MFX_STATUS_INVALID_ARGUMENT = 2,
  MFX_STATUS_IO = 3,
  MFX_STATUS_PARSE = 4,
  MFX_STATUS_DEGENERATE_GEOMETRY = 5,
  MFX_STATUS_SINGULAR_MATRIX = 6,
  MFX_STATUS_NOT_CONVERGED = 7,
  MFX_STATUS_UNDERDETERMINED = 8,
  MFX_STATUS_MISSING_DATA = 9,
  MFX_STATUS_OUT_OF_RANGE = 10,
  MFX_STATUS_PANIC = 11,
} MfxStatus;

/**
 * Scatter-delay handling for [`mfx_solve_position`].
 */
typedef enum MfxTsMode {
  /**
   * Remove `t_s` from scattered rows; all rows share one clock.
   */
  MFX_TS_MODE_KNOWN = 0,
  /**
   * Estimate separate direct and scattered clock biases.
   */
  MFX_TS_MODE_JOINT = 1,
} MfxTsMode;

/**
 * Opaque measurement set.
 */
typedef struct MfxMeasurementSet MfxMeasurementSet;

/**
 * Opaque scenario.
 */
typedef struct MfxScenario MfxScenario;

/**
 * One measurement row. `path_class` is `'D'`, `'S'` or `'U'`.
 */
typedef struct MfxMeasurement {
  int64_t epoch_ms;
  uint32_t svid;
  double cn0;
  double pseudorange;
  double adr;
  bool adr_valid;
  char path_class;
} MfxMeasurement;

typedef struct MfxVec3 {
  double x;
  double y;
  double z;
} MfxVec3;

typedef struct MfxSatellite {
  uint32_t svid;
  struct MfxVec3 position;
} MfxSatellite;

typedef struct MfxPositionSolution {
  struct MfxVec3 position;
  bool has_clock_bias_direct;
  /**
   * Seconds.
   */
  double clock_bias_direct;
  bool has_clock_bias_scattered;
  /**
   * Seconds.
   */
  double clock_bias_scattered;
  uint32_t iterations;
  double residual_rms;
  double dop;
  uint32_t rows_used;
} MfxPositionSolution;

/**
 * Differenced pair; see the library's `PhasePair`. `e` is the unit vector
 * from the satellite toward the tag.
 */
typedef struct MfxPhasePair {
  uint32_t svid;
  double phi_direct;
  double phi_scattered;
  double delta_r_tag;
  int64_t delta_n;
  double wavelength;
  struct MfxVec3 e;
} MfxPhasePair;

typedef struct MfxBaseVector {
  struct MfxVec3 b;
  /**
   * Seconds.
   */
  double delta_t;
  uint32_t iterations;
  double residual_rms;
} MfxBaseVector;

typedef struct MfxDetection {
  bool detected;
  /**
   * NaN when not detected.
   */
  double gain_db;
  int64_t phase_ms;
  double score;
} MfxDetection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length plus one; pass a
 * null `buf` to query the size.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t mfx_last_error(char *buf, size_t len);

/**
 * Load a canonical measurement CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MfxStatus mfx_measurement_set_load_csv(const char *path, struct MfxMeasurementSet **out);

/**
 * Number of rows; 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t mfx_measurement_set_len(const struct MfxMeasurementSet *set);

/**
 * Row `index` in (epoch, svid, class) order.
 *
 * # Safety
 * `set` must be a live handle; `out` must be writable.
 */
enum MfxStatus mfx_measurement_set_get(const struct MfxMeasurementSet *set,
                                       size_t index,
                                       struct MfxMeasurement *out);

/**
 * # Safety
 * `set` must be null or a handle not yet freed.
 */
void mfx_measurement_set_free(struct MfxMeasurementSet *set);

/**
 * Load a scenario JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MfxStatus mfx_scenario_load(const char *path, struct MfxScenario **out);

/**
 * Generate the scenario's measurements into a new set handle.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum MfxStatus mfx_scenario_generate(const struct MfxScenario *scenario,
                                     struct MfxMeasurementSet **out);

/**
 * Tag position of a scenario.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum MfxStatus mfx_scenario_tag_position(const struct MfxScenario *scenario, struct MfxVec3 *out);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void mfx_scenario_free(struct MfxScenario *scenario);

/**
 * 10·log10|Γ|² for load and antenna impedances (ohms).
 *
 * # Safety
 * `out` must be writable.
 */
enum MfxStatus mfx_reflection_gain_db(double zl_re,
                                      double zl_im,
                                      double za_re,
                                      double za_im,
                                      double *out);

/**
 * Inductance resonating with `c` farads at `f_c` hertz.
 *
 * # Safety
 * `out` must be writable.
 */
enum MfxStatus mfx_solve_inductance(double f_c, double c, double *out);

/**
 * Linear noise figure.
 *
 * # Safety
 * `out` must be writable.
 */
enum MfxStatus mfx_noise_figure(double r,
                                double k_a,
                                double f_r0,
                                double r_nr,
                                double f,
                                double *out);

/**
 * Equivalent parallel capacitance of a packaged diode, farads.
 *
 * # Safety
 * `out` must be writable.
 */
enum MfxStatus mfx_equivalent_capacitance(double c_j,
                                          double c_p,
                                          double l_p,
                                          double r,
                                          double r_nr,
                                          double f_c,
                                          double *out);

/**
 * Virtual satellite `2·tag − real`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MfxStatus mfx_virtual_satellite(struct MfxVec3 real, struct MfxVec3 tag, struct MfxVec3 *out);

/**
 * Solve one epoch of `set` with C/N0 weights and default tolerances.
 *
 * # Safety
 * `set` must be a live handle, `satellites` must point to `n_satellites`
 * entries and `out` must be writable.
 */
enum MfxStatus mfx_solve_position(const struct MfxMeasurementSet *set,
                                  int64_t epoch_ms,
                                  const struct MfxSatellite *satellites,
                                  size_t n_satellites,
                                  struct MfxVec3 tag,
                                  enum MfxTsMode mode,
                                  double t_s,
                                  struct MfxPositionSolution *out);

/**
 * Gauss-Newton base-vector solve with equal weights and default tolerances.
 *
 * # Safety
 * `pairs` must point to `n_pairs` entries and `out` must be writable.
 */
enum MfxStatus mfx_solve_base_vector(const struct MfxPhasePair *pairs,
                                     size_t n_pairs,
                                     struct MfxVec3 b_init,
                                     struct MfxBaseVector *out);

/**
 * ON-OFF keying detection on one C/N0 series. When `labels` is not null it
 * receives `n` bytes, 1 for scattered and 0 for direct.
 *
 * # Safety
 * `epochs` and `cn0` must point to `n` values, `labels` must be null or
 * point to `n` writable bytes, and `out` must be writable.
 */
enum MfxStatus mfx_detect_pattern(const int64_t *epochs,
                                  const double *cn0,
                                  size_t n,
                                  int64_t period_ms,
                                  double duty,
                                  double threshold_db,
                                  double score_min,
                                  uint8_t *labels,
                                  struct MfxDetection *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIRRORFIX_H */
