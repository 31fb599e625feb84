#ifndef TREESHIFT_H
#define TREESHIFT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  TS_STATUS_INVALID_UTF8 = 2,
  TS_STATUS_LENGTH_MISMATCH = 3,
  TS_STATUS_MALFORMED_SPEC = 4,
  TS_STATUS_BAD_PARAMS = 5,
  TS_STATUS_SUPPORT_OVERFLOW = 6,
  TS_STATUS_NOT_LEFT_INVERTIBLE = 7,
  TS_STATUS_CONFIG = 8,
  // The suite run completed but some checks failed; the report is still returned.
  TS_STATUS_CHECKS_FAILED = 9,
  TS_STATUS_OTHER = 10,
  TS_STATUS_PANIC = 11,
} TsStatus;

// A weighted shift on a truncated tree together with its kernel basis.
typedef struct TsShift TsShift;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds a named example (`T2`, `T4`, `UNILATERAL`, `RAYS`) truncated at `depth`.
// `params` may be null when `n_params` is 0. Free the handle with [`ts_shift_free`].
//
// # Safety
// `name` must be a NUL-terminated string, `params` must point to `n_params` doubles and
// `out` must be writable.
enum TsStatus ts_shift_from_example(const char *name,
                                    size_t depth,
                                    const double *params,
                                    size_t n_params,
                                    struct TsShift **out);

// Builds a shift from a JSON tree spec (`depth`, `root`, `edges` of `from`/`to`/`weight`).
//
// # Safety
// `json` must be a NUL-terminated string and `out` must be writable.
enum TsStatus ts_shift_from_spec_json(const char *json, struct TsShift **out);

// Releases a handle; null is ignored.
//
// # Safety
// `shift` must come from this library and not be used afterwards.
void ts_shift_free(struct TsShift *shift);

// Number of vertices, or 0 for a null handle.
//
// # Safety
// `shift` must be null or a live handle.
size_t ts_shift_vertex_count(const struct TsShift *shift);

// Truncation depth, or 0 for a null handle.
//
// # Safety
// `shift` must be null or a live handle.
size_t ts_shift_depth(const struct TsShift *shift);

// Dimension of the kernel basis, or 0 for a null handle.
//
// # Safety
// `shift` must be null or a live handle.
size_t ts_shift_kernel_dim(const struct TsShift *shift);

// `out = S input`; fails with `SUPPORT_OVERFLOW` if `input` reaches the last generation.
//
// # Safety
// `input` and `out` must point to `len` and `out_len` doubles; both lengths are `2 V`.
enum TsStatus ts_shift_apply(const struct TsShift *shift,
                             const double *input,
                             size_t len,
                             double *out,
                             size_t out_len);

// `out = S* input`.
//
// # Safety
// As for [`ts_shift_apply`].
enum TsStatus ts_shift_apply_adjoint(const struct TsShift *shift,
                                     const double *input,
                                     size_t len,
                                     double *out,
                                     size_t out_len);

// `out = L input` with `L = (S*S)^-1 S*`.
//
// # Safety
// As for [`ts_shift_apply`].
enum TsStatus ts_shift_left_inverse(const struct TsShift *shift,
                                    const double *input,
                                    size_t len,
                                    double *out,
                                    size_t out_len);

// `out` = orthogonal projection of `input` onto the kernel of `S*`.
//
// # Safety
// As for [`ts_shift_apply`].
enum TsStatus ts_shift_project_kernel(const struct TsShift *shift,
                                      const double *input,
                                      size_t len,
                                      double *out,
                                      size_t out_len);

// Model coefficients `P_E L^n input` for `n = 0..=n_max`, written row by row in kernel-basis
// coordinates: `out_len` must be `2 (n_max + 1) dim`.
//
// # Safety
// As for [`ts_shift_apply`].
enum TsStatus ts_analytic_coeffs(const struct TsShift *shift,
                                 const double *input,
                                 size_t len,
                                 size_t n_max,
                                 double *out,
                                 size_t out_len);

// Runs verification suites from a JSON run configuration and stores the JSON Lines report in
// `*report` (free it with [`ts_string_free`]). Returns `CHECKS_FAILED` when the report
// contains failures.
//
// # Safety
// `config_json` must be a NUL-terminated string and `report` must be writable.
enum TsStatus ts_run_suite(const char *config_json, char **report);

// Releases a string returned by this library; null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void ts_string_free(char *s);

// Message of the last failure on this thread, or null. Valid until the next failing call
// on the same thread.
const char *ts_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TREESHIFT_H */
