#ifndef AEGCN_H
#define AEGCN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Non-zero values match the exit codes of
 * the command-line tool where one exists.
 */
typedef enum {
  AEGCN_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8, or a buffer of the wrong size.
   */
  AEGCN_STATUS_INVALID_ARGUMENT = 1,
  AEGCN_STATUS_CONFIG = 2,
  AEGCN_STATUS_DATA = 3,
  AEGCN_STATUS_NUMERICAL = 4,
  /**
   * The engine panicked; the message is in `aegcn_last_error()`.
   */
  AEGCN_STATUS_INTERNAL = 5,
} AegcnStatus;

typedef enum {
  AEGCN_MODEL_KIND_HOMOGENEOUS = 0,
  AEGCN_MODEL_KIND_HETEROGENEOUS = 1,
} AegcnModelKind;

/**
 * A resolved training configuration.
 */
typedef struct AegcnConfig AegcnConfig;

/**
 * A loaded graph dataset.
 */
typedef struct AegcnDataset AegcnDataset;

/**
 * The log and trained parameters of one run.
 */
typedef struct AegcnRun AegcnRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread; do not free.
 */
const char *aegcn_last_error(void);

/**
 * Library version as a static string.
 */
const char *aegcn_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void aegcn_string_free(char *s);

/**
 * Loads and validates the dataset in directory `dir`.
 *
 * # Safety
 * `dir` must be a nul-terminated string; `out` must be writable.
 */
AegcnStatus aegcn_dataset_load(const char *dir, AegcnModelKind kind, AegcnDataset **out);

/**
 * # Safety
 * `ds` must come from `aegcn_dataset_load` and not have been freed.
 */
void aegcn_dataset_free(AegcnDataset *ds);

/**
 * Node and class counts.
 *
 * # Safety
 * `ds` must be a live dataset; the output pointers must be writable.
 */
AegcnStatus aegcn_dataset_shape(const AegcnDataset *ds, size_t *nodes, size_t *classes);

/**
 * Training configuration for `ds`: the published recipe for the dataset,
 * overridden by the fields of `overrides_json` (may be null), which uses
 * the same keys as the command-line config file.
 *
 * # Safety
 * `ds` must be a live dataset; `overrides_json` null or a nul-terminated
 * string; `out` writable.
 */
AegcnStatus aegcn_config_new(const AegcnDataset *ds, const char *overrides_json, AegcnConfig **out);

/**
 * # Safety
 * `cfg` must come from `aegcn_config_new` and not have been freed.
 */
void aegcn_config_free(AegcnConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live configuration.
 */
AegcnStatus aegcn_config_set_seed(AegcnConfig *cfg, uint64_t seed);

/**
 * The resolved configuration as JSON; free with `aegcn_string_free`.
 *
 * # Safety
 * `cfg` must be a live configuration; `out` writable.
 */
AegcnStatus aegcn_config_to_json(const AegcnConfig *cfg, char **out);

/**
 * Trains one model with the configuration's seed.
 *
 * # Safety
 * `ds` and `cfg` must be live; `out` writable.
 */
AegcnStatus aegcn_train(const AegcnDataset *ds, const AegcnConfig *cfg, AegcnRun **out);

/**
 * # Safety
 * `run` must come from `aegcn_train` and not have been freed.
 */
void aegcn_run_free(AegcnRun *run);

/**
 * Test-split accuracy and Macro-F1 (fractions in [0, 1]) of the
 * evaluated parameters.
 *
 * # Safety
 * `run` must be live; the output pointers writable.
 */
AegcnStatus aegcn_run_test_scores(const AegcnRun *run, double *accuracy, double *macro_f1);

/**
 * Full run log (per-epoch losses and scores) as JSON; free with
 * `aegcn_string_free`.
 *
 * # Safety
 * `run` must be live; `out` writable.
 */
AegcnStatus aegcn_run_log_json(const AegcnRun *run, char **out);

/**
 * Writes the `nodes × classes` row-major class probabilities of the
 * trained model on `ds` into `probs`, which must hold exactly `len`
 * values (see `aegcn_dataset_shape`).
 *
 * # Safety
 * `run` and `ds` must be live; `probs` must point to `len` writable
 * doubles.
 */
AegcnStatus aegcn_run_predict(const AegcnRun *run,
                              const AegcnDataset *ds,
                              double *probs,
                              size_t len);

/**
 * Finite-difference check of every model's gradients on toy graphs.
 *
 * # Safety
 * `passed` must be writable.
 */
AegcnStatus aegcn_gradcheck(uint64_t seed, bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AEGCN_H */
