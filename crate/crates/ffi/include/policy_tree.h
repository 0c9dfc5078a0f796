#ifndef POLICY_TREE_H
#define POLICY_TREE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum PtStatus {
  PT_STATUS_OK = 0,
  PT_STATUS_NULL_POINTER = 1,
  PT_STATUS_INPUT = 2,
  PT_STATUS_PARSE = 3,
  PT_STATUS_CONFIG = 4,
  PT_STATUS_FIT = 5,
  PT_STATUS_ESTIMATION = 6,
  PT_STATUS_TOO_LARGE = 7,
  PT_STATUS_IO = 8,
  PT_STATUS_INTERNAL = 9,
} PtStatus;

typedef enum PtMethod {
  PT_METHOD_GREEDY = 0,
  PT_METHOD_OPTIMAL = 1,
  PT_METHOD_EXHAUSTIVE = 2,
} PtMethod;

/**
 * Opaque n × T reward table.
 */
typedef struct PtRewards PtRewards;

/**
 * Opaque fitted policy tree.
 */
typedef struct PtTree PtTree;

/**
 * Mirror of the library's tree-size controls.
 */
typedef struct PtHyperparameters {
  size_t max_depth;
  double alpha;
  size_t min_leaf;
  size_t restarts;
  uint64_t seed;
} PtHyperparameters;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a
 * success. The pointer stays valid until the next call on the same thread.
 */
const char *pt_last_error(void);

/**
 * Library version as a static string.
 */
const char *pt_version(void);

/**
 * Library defaults: depth 3, no complexity charge, one row per leaf,
 * 100 restarts, seed 0.
 */
struct PtHyperparameters pt_hyperparameters_default(void);

/**
 * Wraps an `n × t` row-major reward table (lower is better).
 *
 * # Safety
 * `values` must point to `n * t` readable doubles and `out` to writable
 * storage for one handle.
 */
enum PtStatus pt_rewards_new(const double *values, size_t n, size_t t, struct PtRewards **out);

/**
 * Doubly-robust rewards for discrete treatments with default forest and
 * cross-fitting settings. `treatments[i]` is the zero-based arm of row `i`.
 *
 * # Safety
 * `x` must point to `n * p` doubles, `treatments` and `outcomes` to `n`
 * values each, and `out` to writable storage for one handle.
 */
enum PtStatus pt_rewards_doubly_robust(const double *x,
                                       size_t n,
                                       size_t p,
                                       const uint32_t *treatments,
                                       size_t n_treatments,
                                       const double *outcomes,
                                       uint64_t seed,
                                       struct PtRewards **out);

/**
 * # Safety
 * `rewards` must point to a live handle; `out` must be writable.
 */
enum PtStatus pt_rewards_shape(const struct PtRewards *rewards, size_t *n, size_t *t);

/**
 * Copies the table, row-major, into `out` (room for `n * t` doubles).
 *
 * # Safety
 * `rewards` must point to a live handle and `out` to `n * t` writable doubles.
 */
enum PtStatus pt_rewards_values(const struct PtRewards *rewards, double *out);

/**
 * # Safety
 * `rewards` must be NULL or a handle not yet freed.
 */
void pt_rewards_free(struct PtRewards *rewards);

/**
 * Fits a tree to `rewards` over the `n × p` features `x`.
 *
 * # Safety
 * `rewards` must be a live handle, `x` must point to `n * p` doubles, `hp`
 * to one `PtHyperparameters` and `out` to writable storage for one handle.
 */
enum PtStatus pt_fit(const struct PtRewards *rewards,
                     const double *x,
                     size_t n,
                     size_t p,
                     enum PtMethod method,
                     const struct PtHyperparameters *hp,
                     struct PtTree **out);

/**
 * Zero-based treatment index for each of the `n` rows of `x`.
 *
 * # Safety
 * `tree` must be a live handle, `x` must point to `n * p` doubles and `out`
 * to `n` writable `size_t` values.
 */
enum PtStatus pt_tree_prescribe(const struct PtTree *tree,
                                const double *x,
                                size_t n,
                                size_t p,
                                size_t *out);

/**
 * Training objective (mean reward of the prescriptions) and the same plus
 * the complexity charge.
 *
 * # Safety
 * `tree` must be a live handle; either output may be NULL to skip it.
 */
enum PtStatus pt_tree_objective(const struct PtTree *tree, double *objective, double *penalized);

/**
 * Number of branch nodes and depth of the tree.
 *
 * # Safety
 * `tree` must be a live handle; either output may be NULL to skip it.
 */
enum PtStatus pt_tree_size(const struct PtTree *tree, size_t *n_branches, size_t *depth);

/**
 * Serializes the tree as a JSON document; release it with `pt_string_free`.
 *
 * # Safety
 * `tree` must be a live handle and `out` writable.
 */
enum PtStatus pt_tree_to_json(const struct PtTree *tree, char **out);

/**
 * Parses a JSON tree document.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` writable.
 */
enum PtStatus pt_tree_from_json(const char *json, struct PtTree **out);

/**
 * # Safety
 * `tree` must be NULL or a handle not yet freed.
 */
void pt_tree_free(struct PtTree *tree);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void pt_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLICY_TREE_H */
