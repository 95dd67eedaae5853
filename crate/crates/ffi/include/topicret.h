#ifndef TOPICRET_H
#define TOPICRET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TrStatus {
  TR_STATUS_OK = 0,
  TR_STATUS_NULL_ARGUMENT = 1,
  TR_STATUS_INVALID_UTF8 = 2,
  TR_STATUS_IO = 3,
  TR_STATUS_FORMAT = 4,
  TR_STATUS_INCOMPATIBLE_ARTIFACTS = 5,
  TR_STATUS_SHAPE = 6,
  TR_STATUS_INVALID_K = 7,
  TR_STATUS_INVALID_SPACE = 8,
  TR_STATUS_CONFIG = 9,
  TR_STATUS_EMPTY_TEXT = 10,
  TR_STATUS_RUNTIME = 11,
  TR_STATUS_PANIC = 12,
} TrStatus;

/**
 * Opaque loaded artifact chain.
 */
typedef struct TrEngine TrEngine;

/**
 * Opaque ranked list returned by [`tr_engine_search`].
 */
typedef struct TrResults TrResults;

/**
 * Byte accounting of an index file.
 */
typedef struct TrSpaceStats {
  uint64_t payload_bytes;
  uint64_t metadata_bytes;
  uint64_t total_bytes;
  uint64_t embeddings_stored;
  uint64_t docs;
  double total_gib;
} TrSpaceStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *tr_last_error(void);

/**
 * MaxSim between `nq` query and `nd` document vectors, each `dim` floats, row-major.
 *
 * # Safety
 * `query` must point to `nq * dim` floats and `doc` to `nd * dim` floats.
 */
enum TrStatus tr_maxsim(const float *query,
                        size_t nq,
                        const float *doc,
                        size_t nd,
                        size_t dim,
                        double *out);

/**
 * MRR per GiB of index space.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum TrStatus tr_tradeoff(double mrr, double space_gib, double *out);

/**
 * Loads an index file and reports its space usage.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TrStatus tr_index_space(const char *path, struct TrSpaceStats *out);

/**
 * Opens the artifact chain described by a config file. `config_path` may be
 * null for defaults; a non-null `artifacts_dir` overrides the configured one.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be valid.
 */
enum TrStatus tr_engine_open(const char *config_path,
                             const char *artifacts_dir,
                             struct TrEngine **out);

/**
 * Ranks the indexed documents for `query_text`, keeping the best `k`.
 *
 * # Safety
 * `engine` must come from [`tr_engine_open`]; `query_text` must be NUL-terminated.
 */
enum TrStatus tr_engine_search(const struct TrEngine *engine,
                               const char *query_text,
                               size_t k,
                               struct TrResults **out);

/**
 * Number of documents in the index behind `engine`, 0 for null.
 *
 * # Safety
 * `engine` must be null or come from [`tr_engine_open`].
 */
size_t tr_engine_num_docs(const struct TrEngine *engine);

/**
 * # Safety
 * `engine` must be null or come from [`tr_engine_open`], and not be used afterwards.
 */
void tr_engine_free(struct TrEngine *engine);

/**
 * # Safety
 * `results` must be null or come from [`tr_engine_search`].
 */
size_t tr_results_len(const struct TrResults *results);

/**
 * Document id at `rank` (0-based), or null when out of range. Owned by `results`.
 *
 * # Safety
 * `results` must be null or come from [`tr_engine_search`].
 */
const char *tr_results_doc_id(const struct TrResults *results, size_t rank);

/**
 * Score at `rank` (0-based), NaN when out of range.
 *
 * # Safety
 * `results` must be null or come from [`tr_engine_search`].
 */
double tr_results_score(const struct TrResults *results, size_t rank);

/**
 * # Safety
 * `results` must be null or come from [`tr_engine_search`], and not be used afterwards.
 */
void tr_results_free(struct TrResults *results);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPICRET_H */
