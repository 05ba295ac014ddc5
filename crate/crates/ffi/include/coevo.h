#ifndef COEVO_H
#define COEVO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CoevoStatus {
  COEVO_STATUS_OK = 0,
  COEVO_STATUS_NULL_ARGUMENT = 1,
  COEVO_STATUS_INVALID_UTF8 = 2,
  COEVO_STATUS_IO = 3,
  COEVO_STATUS_INVALID_INSTANCE = 4,
  COEVO_STATUS_INVALID_ENCODING = 5,
  COEVO_STATUS_INVALID_SPEC = 6,
  COEVO_STATUS_CONFIG = 7,
  COEVO_STATUS_RUNTIME = 8,
  COEVO_STATUS_OVER_BUDGET = 9,
  COEVO_STATUS_PANIC = 10,
} CoevoStatus;

// A loaded benchmark instance.
typedef struct CoevoInstance CoevoInstance;

// A validated operator spec.
typedef struct CoevoSpec CoevoSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string.
// The pointer stays valid until the next library call on the same thread.
const char *coevo_last_error_message(void);

// Releases a string returned by the library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void coevo_string_free(char *s);

// Loads an instance. `format` may be null to infer it from the extension
// (`taillard`, `tsplib` or `cvrplib`).
//
// # Safety
// String arguments must be null or NUL-terminated; `out` must be writable.
enum CoevoStatus coevo_instance_load(const char *path,
                                     const char *format,
                                     const char *bks_registry,
                                     struct CoevoInstance **out);

// # Safety
// `inst` must be null or a handle from [`coevo_instance_load`] not yet freed.
void coevo_instance_free(struct CoevoInstance *inst);

// Length of a valid encoding for the instance.
//
// # Safety
// `inst` must be a live handle and `out_len` writable.
enum CoevoStatus coevo_instance_encoding_len(const struct CoevoInstance *inst, uintptr_t *out_len);

// Best-known cost of the instance.
//
// # Safety
// `inst` must be a live handle and `out` writable.
enum CoevoStatus coevo_instance_bks(const struct CoevoInstance *inst, double *out);

// Decodes and evaluates an encoding.
//
// # Safety
// `encoding` must point to `len` readable values; `out_cost` must be writable.
enum CoevoStatus coevo_instance_evaluate(const struct CoevoInstance *inst,
                                         const uint32_t *encoding,
                                         uintptr_t len,
                                         double *out_cost);

// Optimality gap in percent.
//
// # Safety
// `out` must be writable.
enum CoevoStatus coevo_gap(double cost, double bks, double *out);

// Validates a spec document for `domain` (`jssp`, `tsp` or `cvrp`).
// Violations are joined with newlines in the error message.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
enum CoevoStatus coevo_spec_validate(const char *json, const char *domain, struct CoevoSpec **out);

// # Safety
// `spec` must be null or a handle from [`coevo_spec_validate`] not yet freed.
void coevo_spec_free(struct CoevoSpec *spec);

// Canonical JSON of a validated spec. Free with [`coevo_string_free`].
//
// # Safety
// `spec` must be a live handle and `out` writable.
enum CoevoStatus coevo_spec_to_json(const struct CoevoSpec *spec, char **out);

// Unit-cost tree edit distance between two operator graphs.
//
// # Safety
// Both handles must be live and `out` writable.
enum CoevoStatus coevo_spec_tree_distance(const struct CoevoSpec *a,
                                          const struct CoevoSpec *b,
                                          uintptr_t *out);

// Runs a TOML configuration and returns the run summary as JSON. Relative
// paths resolve against `base_dir`, or the working directory when null.
//
// # Safety
// String arguments must be null or NUL-terminated; `out_summary` must be writable.
enum CoevoStatus coevo_run(const char *config_toml, const char *base_dir, char **out_summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COEVO_H */
