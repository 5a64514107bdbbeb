#ifndef GRID_MARL_H
#define GRID_MARL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum GmStatus {
  GM_STATUS_OK = 0,
  GM_STATUS_NULL_POINTER = 1,
  GM_STATUS_INVALID_ARGUMENT = 2,
  GM_STATUS_INVALID_GRID = 3,
  GM_STATUS_EPISODE_DONE = 4,
  GM_STATUS_BUFFER_TOO_SMALL = 5,
  GM_STATUS_RUNTIME = 6,
} GmStatus;

/**
 * One running episode.
 */
typedef struct GmEnv GmEnv;

/**
 * Parsed grid description.
 */
typedef struct GmGrid GmGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty when none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *gm_last_error(void);

/**
 * The bundled five-substation grid. Never null.
 */
struct GmGrid *gm_grid_case5(void);

/**
 * Parses a grid from TOML text.
 *
 * # Safety
 * `toml` must be a nul-terminated string and `out` a writable pointer.
 */
enum GmStatus gm_grid_from_toml(const char *toml, struct GmGrid **out);

/**
 * # Safety
 * `grid` must come from this library and not be used afterwards. Null is ignored.
 */
void gm_grid_free(struct GmGrid *grid);

/**
 * # Safety
 * `grid` must be a live handle or null.
 */
size_t gm_grid_n_lines(const struct GmGrid *grid);

/**
 * # Safety
 * `grid` must be a live handle or null.
 */
size_t gm_grid_n_substations(const struct GmGrid *grid);

/**
 * # Safety
 * `grid` must be a live handle or null.
 */
size_t gm_grid_substation_size(const struct GmGrid *grid, size_t substation);

/**
 * Starts an episode on window `window` of the test split of synthetic
 * chronics generated from `chronic_seed`. `profile` is 0 calm, 1 default,
 * 2 stressed.
 *
 * # Safety
 * `grid` must be a live handle and `out` writable.
 */
enum GmStatus gm_env_new(const struct GmGrid *grid,
                         uint64_t chronic_seed,
                         int profile,
                         size_t window,
                         struct GmEnv **out);

/**
 * # Safety
 * `env` must come from this library and not be used afterwards. Null is ignored.
 */
void gm_env_free(struct GmEnv *env);

/**
 * Advances one step without changing the topology. `done` may be null.
 *
 * # Safety
 * `env` must be a live handle.
 */
enum GmStatus gm_env_step_do_nothing(struct GmEnv *env, bool *done);

/**
 * Sets the bus of every element of `substation` (1 or 2 per entry) and
 * advances one step. `done` may be null.
 *
 * # Safety
 * `env` must be a live handle and `buses` point at `len` bytes.
 */
enum GmStatus gm_env_step_set_bus(struct GmEnv *env,
                                  size_t substation,
                                  const uint8_t *buses,
                                  size_t len,
                                  bool *done);

/**
 * Reward of the last step; 0 before the first.
 *
 * # Safety
 * `env` must be a live handle or null.
 */
double gm_env_last_reward(const struct GmEnv *env);

/**
 * Current timestep within the episode.
 *
 * # Safety
 * `env` must be a live handle or null.
 */
size_t gm_env_timestep(const struct GmEnv *env);

/**
 * # Safety
 * `env` must be a live handle or null.
 */
bool gm_env_is_done(const struct GmEnv *env);

/**
 * Copies the per-line loading ratios into `out`, which holds `len` doubles.
 *
 * # Safety
 * `env` must be a live handle and `out` point at `len` writable doubles.
 */
enum GmStatus gm_env_rho(const struct GmEnv *env, double *out, size_t len);

/**
 * Evaluation score of an agent surviving `agent_steps` with cumulative cost
 * `agent_cost` against a baseline, over an episode of `episode_len` steps.
 */
double gm_l2rpn_score(size_t agent_steps,
                      size_t baseline_steps,
                      size_t episode_len,
                      double agent_cost,
                      double baseline_cost);

/**
 * Runs the command-line front end with `argc` arguments (program name
 * first) and returns its exit code.
 *
 * # Safety
 * `argv` must point at `argc` nul-terminated strings.
 */
int gm_cli_main(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRID_MARL_H */
