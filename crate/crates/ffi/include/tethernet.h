/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TETHERNET_H
#define TETHERNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TnStatus {
  TN_STATUS_OK = 0,
  TN_STATUS_NULL_POINTER = 1,
  TN_STATUS_INVALID_UTF8 = 2,
  TN_STATUS_CONFIG = 3,
  TN_STATUS_IO = 4,
  TN_STATUS_SCHEMA_VERSION = 5,
  TN_STATUS_MALFORMED = 6,
  TN_STATUS_WIDTH_MISMATCH = 7,
  TN_STATUS_VARIANT_MISMATCH = 8,
  TN_STATUS_SCENARIO = 9,
  TN_STATUS_TRAINING = 10,
  TN_STATUS_DIVERGED = 11,
  TN_STATUS_INVALID_INPUT = 12,
  TN_STATUS_PANIC = 13,
} TnStatus;

/**
 * Opaque episode environment.
 */
typedef struct TnEnvironment TnEnvironment;

/**
 * Opaque trained policy.
 */
typedef struct TnPolicy TnPolicy;

/**
 * Opaque trained surrogate.
 */
typedef struct TnSurrogate TnSurrogate;

typedef struct TnEpisodeResult {
  bool triggered;
  bool success;
  bool clipped;
  /**
   * Infinite when the closing never triggered.
   */
  double settled_cqi;
  size_t locked_pairs;
  double mouth_area;
  double total_fuel;
  double reward;
} TnEpisodeResult;

typedef struct TnPrediction {
  double cqi;
  double locked_raw;
  size_t locked_pairs;
} TnPrediction;

typedef struct TnRewardConfig {
  double fuel_weight;
  double max_fuel;
  double max_mouth_area;
  double cqi_threshold;
  size_t locked_threshold;
} TnRewardConfig;

typedef struct TnRewardInputs {
  double mouth_area;
  double settled_cqi;
  size_t locked_pairs;
  double total_fuel;
} TnRewardInputs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * including the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t tn_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tn_version(void);

/**
 * Builds an environment from TOML text (null for defaults) and a reference
 * fuel in kg (non-positive to use the configured value).
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be valid.
 */
enum TnStatus tn_environment_new(const char *config_toml,
                                 double max_fuel,
                                 struct TnEnvironment **out);

/**
 * # Safety
 * `env` must come from [`tn_environment_new`] and not be used afterwards.
 */
void tn_environment_free(struct TnEnvironment *env);

/**
 * Number of MUs; an action holds twice as many offsets.
 *
 * # Safety
 * `env` must be a live handle or null (returns 0).
 */
size_t tn_environment_mu_count(const struct TnEnvironment *env);

/**
 * Copies `surrogate` into the environment for surrogate-mode episodes.
 *
 * # Safety
 * Both handles must be live.
 */
enum TnStatus tn_environment_set_surrogate(struct TnEnvironment *env,
                                           const struct TnSurrogate *surrogate);

/**
 * Runs one episode. `offsets` holds `dx1, dy1, dx2, dy2, ...` (length
 * twice the MU count); out-of-box offsets are rejected.
 *
 * # Safety
 * `debris` must point to three doubles, `offsets` to `offsets_len` doubles
 * and `out` to a writable result.
 */
enum TnStatus tn_run_episode(const struct TnEnvironment *env,
                             const double *debris,
                             uint64_t seed,
                             const double *offsets,
                             size_t offsets_len,
                             bool full_capture,
                             struct TnEpisodeResult *out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
enum TnStatus tn_surrogate_load(const char *path, struct TnSurrogate **out);

/**
 * # Safety
 * `s` must come from [`tn_surrogate_load`] and not be used afterwards.
 */
void tn_surrogate_free(struct TnSurrogate *s);

/**
 * # Safety
 * `s` must be a live handle or null (returns 0).
 */
size_t tn_surrogate_input_width(const struct TnSurrogate *s);

/**
 * Deterministic prediction from one feature vector.
 *
 * # Safety
 * `features` must point to `len` doubles; `out` must be valid.
 */
enum TnStatus tn_surrogate_predict(const struct TnSurrogate *s,
                                   const double *features,
                                   size_t len,
                                   struct TnPrediction *out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
enum TnStatus tn_policy_load(const char *path, struct TnPolicy **out);

/**
 * # Safety
 * `p` must come from [`tn_policy_load`] and not be used afterwards.
 */
void tn_policy_free(struct TnPolicy *p);

/**
 * # Safety
 * `p` must be a live handle or null (returns 0).
 */
size_t tn_policy_action_dim(const struct TnPolicy *p);

/**
 * Mean offsets for a debris position, written to `out[0..out_len]`.
 *
 * # Safety
 * `state` must point to `state_len` doubles, `out` to `out_len` doubles.
 */
enum TnStatus tn_policy_mean(const struct TnPolicy *p,
                             const double *state,
                             size_t state_len,
                             double *out,
                             size_t out_len);

/**
 * Episode reward from capture outcome quantities.
 *
 * # Safety
 * All pointers must be valid.
 */
enum TnStatus tn_reward(const struct TnRewardConfig *config,
                        const struct TnRewardInputs *inputs,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TETHERNET_H */
