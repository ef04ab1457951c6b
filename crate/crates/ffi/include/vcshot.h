#ifndef VCSHOT_H
#define VCSHOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VcClassifier {
  VC_CLASSIFIER_NN = 0,
  VC_CLASSIFIER_LIKELIHOOD = 1,
} VcClassifier;

typedef enum VcStatus {
  VC_STATUS_OK = 0,
  VC_STATUS_NULL_POINTER = 1,
  VC_STATUS_INVALID_ARGUMENT = 2,
  VC_STATUS_IO = 3,
  VC_STATUS_FORMAT = 4,
  VC_STATUS_FIT = 5,
  VC_STATUS_NUMERICAL = 6,
  VC_STATUS_PANIC = 7,
} VcStatus;

/**
 * A learned or loaded VC dictionary.
 */
typedef struct VcDict VcDict;

/**
 * A loaded feature store.
 */
typedef struct VcStore VcStore;

/**
 * Benchmark parameters. Obtain defaults from `vc_episode_spec_default`.
 */
typedef struct VcEpisodeSpec {
  size_t ways;
  size_t shots;
  size_t queries;
  size_t trials;
  uint64_t seed;
  size_t num_vcs;
  double coverage_target;
  double threshold_step;
  double sigma;
  size_t radius;
  enum VcClassifier classifier;
  /**
   * Learn one dictionary from the whole store instead of per trial.
   */
  bool whole_store_dictionary;
  bool shuffle_support_labels;
} VcEpisodeSpec;

typedef struct VcBenchmarkResult {
  double mean_accuracy;
  double ci95_halfwidth;
  size_t trials;
} VcBenchmarkResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *vc_last_error_message(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VcStatus vc_store_open(const char *path, struct VcStore **out);

/**
 * # Safety
 * `store` must come from `vc_store_open` and not be used afterwards.
 */
void vc_store_free(struct VcStore *store);

/**
 * # Safety
 * `store` must be a live handle and `out` a valid pointer.
 */
enum VcStatus vc_store_grid_count(const struct VcStore *store, size_t *out);

/**
 * # Safety
 * `store` must be a live handle and `out` a valid pointer.
 */
enum VcStatus vc_store_category_count(const struct VcStore *store, size_t *out);

/**
 * Fits a dictionary of `num_vcs` VCs to every feature vector in `store`.
 *
 * # Safety
 * `store` must be a live handle and `out` a valid pointer.
 */
enum VcStatus vc_dictionary_learn(const struct VcStore *store,
                                  size_t num_vcs,
                                  uint64_t seed,
                                  struct VcDict **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VcStatus vc_dictionary_load(const char *path, struct VcDict **out);

/**
 * # Safety
 * `dict` must be a live handle and `path` a NUL-terminated string.
 */
enum VcStatus vc_dictionary_save(const struct VcDict *dict, const char *path);

/**
 * # Safety
 * `dict` must come from a dictionary constructor and not be used afterwards.
 */
void vc_dictionary_free(struct VcDict *dict);

/**
 * # Safety
 * `dict` must be a live handle and `out` a valid pointer.
 */
enum VcStatus vc_dictionary_num_vcs(const struct VcDict *dict, size_t *out);

/**
 * # Safety
 * `dict` must be a live handle and `out` a valid pointer.
 */
enum VcStatus vc_dictionary_log_likelihood(const struct VcDict *dict, double *out);

struct VcEpisodeSpec vc_episode_spec_default(void);

/**
 * Runs `spec->trials` few-shot trials on `store`.
 *
 * # Safety
 * All pointers must be valid; `store` must be a live handle.
 */
enum VcStatus vc_run_benchmark(const struct VcStore *store,
                               const struct VcEpisodeSpec *spec,
                               struct VcBenchmarkResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VCSHOT_H */
