#ifndef FINPOT_H
#define FINPOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum FinpotStatus {
  FINPOT_STATUS_OK = 0,
  FINPOT_STATUS_NULL_POINTER = 1,
  FINPOT_STATUS_INVALID_UTF8 = 2,
  FINPOT_STATUS_MALFORMED_FILE = 3,
  /**
   * The description does not define a bounded operator of the class.
   */
  FINPOT_STATUS_VALIDATION = 4,
  FINPOT_STATUS_IO = 5,
  /**
   * A rank decision is ambiguous at the requested tolerance.
   */
  FINPOT_STATUS_DEGENERATE_TOLERANCE = 6,
  /**
   * Series or eigenvalue computation failed.
   */
  FINPOT_STATUS_NUMERICAL = 7,
  FINPOT_STATUS_INVALID_ARGUMENT = 8,
  /**
   * A Rust panic was caught at the boundary.
   */
  FINPOT_STATUS_PANIC = 9,
} FinpotStatus;

/**
 * Opaque operator handle.
 */
typedef struct FinpotOperator FinpotOperator;

typedef struct FinpotComplex {
  double re;
  double im;
} FinpotComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on the same thread.
 */
const char *finpot_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *finpot_version(void);

/**
 * Parses an operator file held in memory.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FinpotStatus finpot_operator_from_json(const char *json, struct FinpotOperator **out);

/**
 * Parses an operator file from disk.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FinpotStatus finpot_operator_from_file(const char *path, struct FinpotOperator **out);

/**
 * The worked example operator.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum FinpotStatus finpot_operator_worked_example(struct FinpotOperator **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `op` must come from this library and not be used afterwards.
 */
void finpot_operator_free(struct FinpotOperator *op);

/**
 * The adjoint as a new handle.
 *
 * # Safety
 * `op` must be a live handle and `out` a valid pointer.
 */
enum FinpotStatus finpot_operator_adjoint(const struct FinpotOperator *op,
                                          struct FinpotOperator **out);

/**
 * Canonical operator file text; release with [`finpot_string_free`].
 *
 * # Safety
 * `op` must be a live handle and `out` a valid pointer.
 */
enum FinpotStatus finpot_operator_to_json(const struct FinpotOperator *op, char **out);

/**
 * Global index `i(phi)`.
 *
 * # Safety
 * `op` must be a live handle and `out` a valid pointer.
 */
enum FinpotStatus finpot_index(const struct FinpotOperator *op, double tol, size_t *out);

/**
 * Trace of the operator restricted to its core.
 *
 * # Safety
 * `op` must be a live handle and `out` a valid pointer.
 */
enum FinpotStatus finpot_trace(const struct FinpotOperator *op,
                               double tol,
                               struct FinpotComplex *out);

/**
 * `Det(Id + phi)` computed as `det(I + B|W)`.
 *
 * # Safety
 * `op` must be a live handle and `out` a valid pointer.
 */
enum FinpotStatus finpot_det_id_plus(const struct FinpotOperator *op,
                                     double tol,
                                     struct FinpotComplex *out);

/**
 * Full analysis report as JSON; release with [`finpot_string_free`].
 *
 * # Safety
 * `op` must be a live handle and `out` a valid pointer.
 */
enum FinpotStatus finpot_analyze_json(const struct FinpotOperator *op, double tol, char **out);

/**
 * Runs the theorem suite; `passed` receives whether every check held.
 * `report_json` may be null; otherwise it receives the report, to be
 * released with [`finpot_string_free`].
 *
 * # Safety
 * `op` must be a live handle, `passed` a valid pointer, `report_json` null or
 * valid.
 */
enum FinpotStatus finpot_verify(const struct FinpotOperator *op,
                                double rank_tol,
                                double check_tol,
                                bool *passed,
                                char **report_json);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void finpot_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FINPOT_H */
