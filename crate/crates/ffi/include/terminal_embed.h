#ifndef TERMINAL_EMBED_H
#define TERMINAL_EMBED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Values for [`TeConfig::distribution`].
typedef enum TeDistribution {
  TE_DISTRIBUTION_RADEMACHER = 0,
  TE_DISTRIBUTION_GAUSSIAN = 1,
} TeDistribution;

// Values for [`TeConfig::mode`].
typedef enum TeMode {
  TE_MODE_AUTO = 0,
  TE_MODE_SKETCH = 1,
  TE_MODE_EXACT = 2,
} TeMode;

typedef enum TeStatus {
  TE_STATUS_OK = 0,
  TE_STATUS_NULL_POINTER = 1,
  TE_STATUS_INVALID_ARGUMENT = 2,
  TE_STATUS_DIMENSION_MISMATCH = 3,
  TE_STATUS_DUPLICATE_POINT = 4,
  TE_STATUS_EMPTY_INPUT = 5,
  TE_STATUS_BUFFER_TOO_SMALL = 6,
  TE_STATUS_IO = 7,
  TE_STATUS_FORMAT = 8,
  TE_STATUS_PANIC = 9,
} TeStatus;

// Opaque embedder handle.
typedef struct TeEmbedder TeEmbedder;

// Build parameters. Start from [`te_config_default`].
typedef struct TeConfig {
  double epsilon;
  double constant;
  // A [`TeDistribution`] value.
  uint32_t distribution;
  // A [`TeMode`] value.
  uint32_t mode;
  uint64_t seed;
  size_t solver_max_iters;
  double solver_tol;
} TeConfig;

// Per-query solver diagnostics.
typedef struct TeDiagnostics {
  size_t anchor;
  double radius;
  double residual;
  size_t iterations;
  bool converged;
  bool member;
} TeDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default build parameters (epsilon 0.25, C 4, Rademacher, auto mode, seed 0).
struct TeConfig te_config_default(void);

// Builds an embedder over `n` points of dimension `d` stored row-major in
// `points`. `cfg` may be null for defaults. On success `*out` owns a new handle.
//
// # Safety
// `points` must reference `n * d` doubles and `out` must be writable.
enum TeStatus te_embedder_new(const double *points,
                              size_t n,
                              size_t d,
                              const struct TeConfig *cfg,
                              struct TeEmbedder **out);

// Loads a bundle directory written by [`te_embedder_save`] or `te build`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum TeStatus te_embedder_load(const char *path, struct TeEmbedder **out);

// Writes the embedder as a bundle directory.
//
// # Safety
// `e` must be a live handle and `path` a NUL-terminated string.
enum TeStatus te_embedder_save(const struct TeEmbedder *e, const char *path);

// Releases a handle; null is ignored.
//
// # Safety
// `e` must be null or a handle not yet freed.
void te_embedder_free(struct TeEmbedder *e);

// Dimension of the input space, 0 for a null handle.
//
// # Safety
// `e` must be null or a live handle.
size_t te_embedder_input_dim(const struct TeEmbedder *e);

// Length of every embedded vector, 0 for a null handle.
//
// # Safety
// `e` must be null or a live handle.
size_t te_embedder_output_dim(const struct TeEmbedder *e);

// # Safety
// `e` must be null or a live handle.
size_t te_embedder_num_points(const struct TeEmbedder *e);

// Whether the handle uses the exact small-n embedding instead of a sketch.
//
// # Safety
// `e` must be null or a live handle.
bool te_embedder_is_exact(const struct TeEmbedder *e);

// Embeds one query `u` of length `d` into `out` (length `out_len`, at least
// the output dimension). `diag` may be null.
//
// # Safety
// Pointers must reference buffers of the stated lengths.
enum TeStatus te_embedder_embed(const struct TeEmbedder *e,
                                const double *u,
                                size_t d,
                                double *out,
                                size_t out_len,
                                struct TeDiagnostics *diag);

// Embeds `count` row-major queries of dimension `d`. `out` receives
// `count * output_dim` doubles; `diags` may be null or hold `count` entries.
//
// # Safety
// Pointers must reference buffers of the stated lengths.
enum TeStatus te_embedder_embed_batch(const struct TeEmbedder *e,
                                      const double *queries,
                                      size_t count,
                                      size_t d,
                                      double *out,
                                      size_t out_len,
                                      struct TeDiagnostics *diags);

// Writes the image of terminal `i` (length output_dim) into `out`.
//
// # Safety
// `out` must reference `out_len` writable doubles.
enum TeStatus te_embedder_terminal(const struct TeEmbedder *e,
                                   size_t i,
                                   double *out,
                                   size_t out_len);

// Message for the last failure on this thread, or null if none. The pointer
// stays valid until the next failing call on the same thread.
const char *te_last_error_message(void);

// Static description of a status code.
const char *te_status_str(int32_t status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TERMINAL_EMBED_H */
