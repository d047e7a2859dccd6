#ifndef DRIFTCL_H
#define DRIFTCL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. Codes 2 to 8 match the process exit codes
// of the `driftcl` command line tool.
typedef enum DriftclStatus {
  DRIFTCL_STATUS_OK = 0,
  DRIFTCL_STATUS_CONFIG = 2,
  DRIFTCL_STATUS_INVALID_INPUT = 3,
  DRIFTCL_STATUS_FORMAT = 4,
  DRIFTCL_STATUS_IO = 5,
  DRIFTCL_STATUS_INSUFFICIENT_DATA = 6,
  DRIFTCL_STATUS_INCOMPATIBLE_RUNS = 7,
  DRIFTCL_STATUS_VERIFICATION = 8,
  DRIFTCL_STATUS_NULL_POINTER = 20,
  DRIFTCL_STATUS_INVALID_UTF8 = 21,
  DRIFTCL_STATUS_PANIC = 22,
} DriftclStatus;

// Opaque replay buffer handle.
typedef struct DriftclBuffer DriftclBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *driftcl_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *driftcl_version(void);

// Two-sample Kolmogorov-Smirnov statistic.
//
// # Safety
// `a` and `b` must point to `na` and `nb` readable doubles; `out` must be
// writable.
enum DriftclStatus driftcl_ks_statistic(const double *a,
                                        size_t na,
                                        const double *b,
                                        size_t nb,
                                        double *out);

// Asymptotic KS p-value for statistic `d` and sample sizes `n1`, `n2`.
double driftcl_ks_p_value(double d, size_t n1, size_t n2);

// Entropy in nats of `softmax(logits)`.
//
// # Safety
// `logits` must point to `k` readable doubles; `out` must be writable.
enum DriftclStatus driftcl_predictive_entropy(const double *logits, size_t k, double *out);

// Alignment efficiency of `(1 + alpha) g_new + (1 - alpha) g_old` with
// `g_new`. Zero-norm inputs yield `DRIFTCL_STATUS_INSUFFICIENT_DATA`.
//
// # Safety
// `g_old` and `g_new` must point to `len` readable doubles; `out` must be
// writable.
enum DriftclStatus driftcl_eta_align(const double *g_old,
                                     const double *g_new,
                                     size_t len,
                                     double alpha,
                                     double *out);

// Creates a reservoir buffer of `capacity` slots holding `dim`-dimensional
// samples.
//
// # Safety
// `out` must be writable; on success it receives a handle to release with
// `driftcl_buffer_free`.
enum DriftclStatus driftcl_buffer_new(size_t capacity,
                                      size_t dim,
                                      uint64_t seed,
                                      struct DriftclBuffer **out);

// Releases a buffer. Null is ignored.
//
// # Safety
// `buffer` must come from `driftcl_buffer_new` and not be used afterwards.
void driftcl_buffer_free(struct DriftclBuffer *buffer);

// Offers one sample to the reservoir. `out_slot` receives the slot written,
// or -1 when the sample was not kept.
//
// # Safety
// `features` must point to `dim` readable doubles (the buffer's dimension);
// `out_slot` must be writable.
enum DriftclStatus driftcl_buffer_offer(struct DriftclBuffer *buffer,
                                        uint64_t id,
                                        const double *features,
                                        size_t label,
                                        uint32_t drift_version,
                                        int64_t *out_slot);

// Removes every resident of `class`; `out_freed` receives how many slots
// were freed. The freed slots are remembered for `driftcl_buffer_resample`.
//
// # Safety
// `out_freed` must be writable.
enum DriftclStatus driftcl_buffer_flush(struct DriftclBuffer *buffer,
                                        size_t class_,
                                        size_t *out_freed);

// Refills the slots freed by the last flush of `class` with up to that many
// samples drawn uniformly from the `n` given ones (row-major `n x dim`
// features, one id per row). `out_placed` receives the number placed.
//
// # Safety
// `features` must hold `n * dim` doubles and `ids` `n` ids; `out_placed`
// must be writable.
enum DriftclStatus driftcl_buffer_resample(struct DriftclBuffer *buffer,
                                           size_t class_,
                                           const double *features,
                                           const uint64_t *ids,
                                           size_t n,
                                           uint32_t drift_version,
                                           size_t *out_placed);

// Occupied slots, or 0 for a null handle.
//
// # Safety
// `buffer` must be null or a live handle.
size_t driftcl_buffer_len(const struct DriftclBuffer *buffer);

// Residents of `class`, or 0 for a null handle.
//
// # Safety
// `buffer` must be null or a live handle.
size_t driftcl_buffer_class_count(const struct DriftclBuffer *buffer, size_t class_);

// Samples offered so far, or 0 for a null handle.
//
// # Safety
// `buffer` must be null or a live handle.
uint64_t driftcl_buffer_seen(const struct DriftclBuffer *buffer);

// Parses a run config, runs it (writing the usual artifacts under its
// output directory) and returns the run summary as JSON in `out_json`.
//
// # Safety
// `config_text` must be a NUL-terminated string; `out_json` must be
// writable and the returned string released with `driftcl_string_free`.
enum DriftclStatus driftcl_run_config(const char *config_text, char **out_json);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void driftcl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRIFTCL_H */
