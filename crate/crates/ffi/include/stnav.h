/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef STNAV_H
#define STNAV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define STNAV_RAW_BEAMS 1440

#define STNAV_POOLED_BEAMS 180

#define STNAV_N_GROUPS 30

// Result of every fallible call.
typedef enum StnavStatus {
  STNAV_STATUS_OK = 0,
  STNAV_STATUS_NULL_POINTER = 1,
  // Bad argument or an operation not valid in the current state.
  STNAV_STATUS_USAGE = 2,
  STNAV_STATUS_CONFIG = 3,
  STNAV_STATUS_LOAD = 4,
  STNAV_STATUS_DIVERGENCE = 5,
  // Buffer or tensor of the wrong length.
  STNAV_STATUS_SHAPE = 6,
  STNAV_STATUS_INTERNAL = 7,
  STNAV_STATUS_PANIC = 8,
} StnavStatus;

// Episode state after a step.
typedef enum StnavTerminal {
  STNAV_TERMINAL_RUNNING = 0,
  STNAV_TERMINAL_COLLISION = 1,
  STNAV_TERMINAL_TIMEOUT = 2,
  STNAV_TERMINAL_GOAL = 3,
} StnavTerminal;

// Opaque trained policy.
typedef struct StnavAgent StnavAgent;

// Opaque simulator episode.
typedef struct StnavEnv StnavEnv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *stnav_last_error(void);

// Library version as a static NUL-terminated string.
const char *stnav_version(void);

// New episode with default parameters: uniformly drawn scene, exactly
// `n_dynamic` moving and `n_static` standing pedestrians at `ped_speed`.
enum StnavStatus stnav_env_new(uint64_t seed,
                               uint32_t n_dynamic,
                               uint32_t n_static,
                               double ped_speed,
                               struct StnavEnv **out);

// New episode from JSON. `params_json` (environment parameters) may be
// null for the defaults; `episode_json` is the episode configuration.
enum StnavStatus stnav_env_new_json(const char *params_json,
                                    const char *episode_json,
                                    struct StnavEnv **out);

// Releases an environment; null is ignored.
void stnav_env_free(struct StnavEnv *env);

// Advances one control step with `(v, w)`, clipped to the robot bounds.
// Stepping a finished episode is a usage error.
enum StnavStatus stnav_env_step(struct StnavEnv *env,
                                double v,
                                double w,
                                double *out_reward,
                                enum StnavTerminal *out_terminal);

// Robot pose `[x, y, heading]` in the world frame.
enum StnavStatus stnav_env_pose(const struct StnavEnv *env, double *out, size_t len);

// Current pooled scan ranges (180 values).
enum StnavStatus stnav_env_scan(const struct StnavEnv *env, double *out, size_t len);

// Current TAGD displacements (30 values).
enum StnavStatus stnav_env_tagd_displacements(const struct StnavEnv *env, double *out, size_t len);

// Steps taken so far in the episode.
enum StnavStatus stnav_env_step_count(const struct StnavEnv *env, size_t *out);

// Loads a checkpoint file written by the trainer.
enum StnavStatus stnav_agent_load(const char *path, struct StnavAgent **out);

// Releases an agent; null is ignored.
void stnav_agent_free(struct StnavAgent *agent);

// Deterministic action `(v, w)` for the environment's current observation.
enum StnavStatus stnav_agent_act(const struct StnavAgent *agent,
                                 const struct StnavEnv *env,
                                 double *out_v,
                                 double *out_w);

// Min-pools 1,440 raw ranges into 180, clamped to 3.5 m.
enum StnavStatus stnav_min_pool(const double *raw, size_t raw_len, double *out, size_t out_len);

// TAGD displacements (30 values) from two consecutive pooled range scans
// at the standard bearings, with or without ICP alignment.
enum StnavStatus stnav_tagd_displacements(const double *prev,
                                          size_t prev_len,
                                          const double *current,
                                          size_t current_len,
                                          bool use_icp,
                                          double *out,
                                          size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STNAV_H */
