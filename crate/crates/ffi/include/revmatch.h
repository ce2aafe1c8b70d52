#ifndef REVMATCH_H
#define REVMATCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. `RM_STATUS_OK` is 0.
 */
typedef enum RmStatus {
  RM_STATUS_OK = 0,
  /**
   * Malformed input file.
   */
  RM_STATUS_SCHEMA = 1,
  /**
   * Input references an unknown id.
   */
  RM_STATUS_REFERENCE = 2,
  /**
   * Invalid configuration or argument value.
   */
  RM_STATUS_CONFIG = 3,
  /**
   * Solver or other runtime failure.
   */
  RM_STATUS_RUNTIME = 4,
  RM_STATUS_NULL_ARGUMENT = 5,
  RM_STATUS_INVALID_UTF8 = 6,
  RM_STATUS_OUT_OF_RANGE = 7,
  RM_STATUS_PANIC = 8,
} RmStatus;

/**
 * A loaded, validated conference corpus.
 */
typedef struct RmCorpus RmCorpus;

/**
 * A solved assignment. Id strings live as long as the handle.
 */
typedef struct RmMatch RmMatch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *rm_last_error(void);

/**
 * Loads the corpus CSV files from directory `dir`.
 *
 * # Safety
 * `dir` is a NUL-terminated string; `out` points to writable storage.
 */
enum RmStatus rm_corpus_load(const char *dir, struct RmCorpus **out);

/**
 * # Safety
 * `c` is null or a handle from [`rm_corpus_load`] not yet freed.
 */
void rm_corpus_free(struct RmCorpus *c);

/**
 * # Safety
 * `c` is a live corpus handle; the out pointers are writable.
 */
enum RmStatus rm_corpus_counts(const struct RmCorpus *c, size_t *papers, size_t *reviewers);

/**
 * Runs conflicts, bids, scoring and the solve. `config_toml` is null or a
 * run configuration in TOML; `current_year` overrides its COI year when
 * nonzero; `exact` nonzero selects the exhaustive backend.
 *
 * # Safety
 * `c` is a live corpus handle, `config_toml` null or NUL-terminated, `out`
 * writable.
 */
enum RmStatus rm_match_solve(const struct RmCorpus *c,
                             const char *config_toml,
                             int32_t current_year,
                             int32_t exact,
                             struct RmMatch **out);

/**
 * # Safety
 * `m` is null or a handle from [`rm_match_solve`] not yet freed.
 */
void rm_match_free(struct RmMatch *m);

/**
 * # Safety
 * `m` is a live match handle; `out` is writable.
 */
enum RmStatus rm_match_pair_count(const struct RmMatch *m, size_t *out);

/**
 * Borrowed ids of pair `index`, valid until the handle is freed.
 *
 * # Safety
 * `m` is a live match handle; the out pointers are writable.
 */
enum RmStatus rm_match_pair(const struct RmMatch *m,
                            size_t index,
                            const char **paper_id,
                            const char **reviewer_id);

/**
 * Writes the six objective terms (matching, capacity, seniority,
 * coauthor, region, cycle), their total and the solver's upper bound.
 *
 * # Safety
 * `m` is a live match handle; `terms` has room for 6 doubles; the other
 * out pointers are writable.
 */
enum RmStatus rm_match_objective(const struct RmMatch *m,
                                 double *terms,
                                 double *total,
                                 double *upper_bound);

/**
 * Base affinity from normalized TPMS, ACL and SAM. A component with its
 * `has_*` flag zero is treated as missing.
 *
 * # Safety
 * `out` is writable.
 */
enum RmStatus rm_base_score(double tpms,
                            int32_t has_tpms,
                            double acl,
                            int32_t has_acl,
                            double sam,
                            double *out);

/**
 * Mean phase-1 minus phase-2 score gap over `seeds` simulated conferences
 * with default priors and noise `sigma`.
 *
 * # Safety
 * `out` is writable.
 */
enum RmStatus rm_simulate_gap(size_t papers,
                              double sigma,
                              double threshold,
                              size_t seeds,
                              uint64_t seed,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REVMATCH_H */
