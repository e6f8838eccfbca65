#ifndef CGOPTICS_H
#define CGOPTICS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CgoStatus {
  CGO_STATUS_OK = 0,
  CGO_STATUS_NULL_POINTER = 1,
  CGO_STATUS_INVALID_ARGUMENT = 2,
  // Bad scenario description, unknown name, unreadable file.
  CGO_STATUS_CONFIG = 3,
  // Failure of the numerics: caustic, positivity loss, gap collapse, ...
  CGO_STATUS_NUMERIC = 4,
  // Output buffer too small; the required length was written.
  CGO_STATUS_BUFFER_TOO_SMALL = 5,
  CGO_STATUS_PANIC = 6,
} CgoStatus;

// Beams of every component of a scenario.
typedef struct CgoBeams CgoBeams;

// Parsed scenario: system, domain and initial data.
typedef struct CgoScenario CgoScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads a bundled scenario by name or a TOML file by path.
//
// # Safety
// `name_or_path` must be a NUL-terminated string; `out` must be writable.
enum CgoStatus cgo_scenario_load(const char *name_or_path, struct CgoScenario **out);

// Parses a scenario from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum CgoStatus cgo_scenario_parse(const char *toml, struct CgoScenario **out);

// # Safety
// `scenario` must come from `cgo_scenario_load`/`cgo_scenario_parse` and not be freed twice.
void cgo_scenario_free(struct CgoScenario *scenario);

// Spatial dimension `d` and system size `N`.
//
// # Safety
// `scenario` must be a live handle; `dim` and `size` must be writable.
enum CgoStatus cgo_scenario_shape(const struct CgoScenario *scenario, size_t *dim, size_t *size);

// Writes 1 to `passed` if hermiticity, the spectral gap and the boundary speed condition hold.
//
// # Safety
// `scenario` must be a live handle; `passed` must be writable.
enum CgoStatus cgo_check_assumptions(const struct CgoScenario *scenario, int32_t *passed);

// Distinct eigenvalues of `A(t, x, ξ)` in increasing order with their multiplicities.
//
// `x` and `xi` hold `d` values each. At most `capacity` entries are written; `count` receives the
// number of distinct eigenvalues, and `BufferTooSmall` is returned if it exceeds `capacity`.
//
// # Safety
// `x`, `xi` must point to `d` doubles; `lambda` and `multiplicity` to `capacity` entries.
enum CgoStatus cgo_eigenvalues(const struct CgoScenario *scenario,
                               double t,
                               const double *x,
                               const double *xi,
                               double *lambda,
                               size_t *multiplicity,
                               size_t capacity,
                               size_t *count);

// Builds the beams of every component.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum CgoStatus cgo_beams_build(const struct CgoScenario *scenario, struct CgoBeams **out);

// # Safety
// `beams` must come from `cgo_beams_build` and not be freed twice.
void cgo_beams_free(struct CgoBeams *beams);

// Superposed field `v^ε(t, x)`; `re` and `im` receive `N` values each.
//
// # Safety
// `x` must point to `d` doubles, `re` and `im` to `N` doubles.
enum CgoStatus cgo_field_eval(const struct CgoBeams *beams,
                              double eps,
                              double t,
                              const double *x,
                              double *re,
                              double *im);

// Residual `L v^ε` at `(t, x)`; `re` and `im` receive `N` values each.
//
// # Safety
// `x` must point to `d` doubles, `re` and `im` to `N` doubles.
enum CgoStatus cgo_residual_eval(const struct CgoBeams *beams,
                                 double eps,
                                 double t,
                                 const double *x,
                                 double *re,
                                 double *im);

// System size `N` of the beams' system.
//
// # Safety
// `beams` must be a live handle.
size_t cgo_beams_size(const struct CgoBeams *beams);

// Copies the last error message of this thread, NUL-terminated, into `buf`.
//
// Returns the message length without the terminator; nothing is copied if `len` is too small.
//
// # Safety
// `buf` must point to `len` writable bytes or be null with `len == 0`.
size_t cgo_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CGOPTICS_H */
