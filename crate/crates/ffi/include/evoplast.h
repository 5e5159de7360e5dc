#ifndef EVOPLAST_H
#define EVOPLAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define EVOPLAST_ACTION_LEFT 0

#define EVOPLAST_ACTION_RIGHT 1

/**
 * Result code of every fallible call.
 */
typedef enum EvoplastStatus {
  EVOPLAST_STATUS_OK = 0,
  EVOPLAST_STATUS_NULL_POINTER = 1,
  EVOPLAST_STATUS_INVALID_ARGUMENT = 2,
  EVOPLAST_STATUS_INVALID_GENOME = 3,
  EVOPLAST_STATUS_UNKNOWN_RULE = 4,
  EVOPLAST_STATUS_CONFIG = 5,
  EVOPLAST_STATUS_NON_FINITE = 6,
  EVOPLAST_STATUS_INTERNAL = 99,
} EvoplastStatus;

/**
 * Opaque cart-pole environment handle with its own random source.
 */
typedef struct EvoplastCartPole EvoplastCartPole;

/**
 * Opaque genome handle.
 */
typedef struct EvoplastGenome EvoplastGenome;

/**
 * Cart-pole observation.
 */
typedef struct EvoplastCartPoleState {
  double x;
  double x_dot;
  double theta;
  double theta_dot;
} EvoplastCartPoleState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread (empty if none). The
 * pointer stays valid until the next failing call on this thread.
 */
const char *evoplast_last_error(void);

/**
 * Library version as a static string.
 */
const char *evoplast_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void evoplast_string_free(char *s);

/**
 * Parses a genome from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum EvoplastStatus evoplast_genome_from_json(const char *json, struct EvoplastGenome **out);

/**
 * Genome of a built-in rule (`mstdpet`, `mult_rstdp`, `xor_best`,
 * `cartpole_similar`, `cartpole_best`, `null`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum EvoplastStatus evoplast_genome_named(const char *name, struct EvoplastGenome **out);

/**
 * # Safety
 * `g` must come from this library and not have been freed. Null is ignored.
 */
void evoplast_genome_free(struct EvoplastGenome *g);

/**
 * Number of inputs the genome reads (0 for a null handle).
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t evoplast_genome_n_inputs(const struct EvoplastGenome *g);

/**
 * Evaluates the genome on `n_inputs` values.
 *
 * # Safety
 * `g` must be a live handle, `inputs` must point to `n_inputs` doubles and
 * `out` must be writable.
 */
enum EvoplastStatus evoplast_genome_evaluate(const struct EvoplastGenome *g,
                                             const double *inputs,
                                             size_t n_inputs,
                                             double *out);

/**
 * Simplified infix expression; free with [`evoplast_string_free`].
 *
 * # Safety
 * `g` must be a live handle and `out` writable.
 */
enum EvoplastStatus evoplast_genome_expression(const struct EvoplastGenome *g, char **out);

/**
 * JSON form of the genome; free with [`evoplast_string_free`].
 *
 * # Safety
 * `g` must be a live handle and `out` writable.
 */
enum EvoplastStatus evoplast_genome_to_json(const struct EvoplastGenome *g, char **out);

/**
 * XOR fitness with the default configuration: mean final test accuracy
 * over one trial per seed. `n_seeds` must be 3.
 *
 * # Safety
 * `g` must be a live handle, `seeds` must point to `n_seeds` values and
 * `out` must be writable.
 */
enum EvoplastStatus evoplast_xor_fitness(const struct EvoplastGenome *g,
                                         const uint64_t *seeds,
                                         size_t n_seeds,
                                         double *out);

/**
 * Cart-pole fitness with the default configuration: mean last-5-episode
 * balance time over one trial per seed. `n_seeds` must be 3.
 *
 * # Safety
 * As for [`evoplast_xor_fitness`].
 */
enum EvoplastStatus evoplast_cartpole_fitness(const struct EvoplastGenome *g,
                                              const uint64_t *seeds,
                                              size_t n_seeds,
                                              double *out);

/**
 * New environment with default physics, already reset from `seed`.
 */
struct EvoplastCartPole *evoplast_cartpole_new(uint64_t seed);

/**
 * # Safety
 * `env` must come from this library and not have been freed. Null is
 * ignored.
 */
void evoplast_cartpole_free(struct EvoplastCartPole *env);

/**
 * Draws a new initial state.
 *
 * # Safety
 * `env` must be a live handle; `out` may be null.
 */
enum EvoplastStatus evoplast_cartpole_reset(struct EvoplastCartPole *env,
                                            struct EvoplastCartPoleState *out);

/**
 * Current state.
 *
 * # Safety
 * `env` must be a live handle and `out` writable.
 */
enum EvoplastStatus evoplast_cartpole_state(const struct EvoplastCartPole *env,
                                            struct EvoplastCartPoleState *out);

/**
 * Applies `EVOPLAST_ACTION_LEFT` or `EVOPLAST_ACTION_RIGHT`. `done` is set
 * when the pole passes the angle limit or the episode reaches its maximum
 * length.
 *
 * # Safety
 * `env` must be a live handle; `out` and `done` may be null.
 */
enum EvoplastStatus evoplast_cartpole_step(struct EvoplastCartPole *env,
                                           uint32_t action,
                                           struct EvoplastCartPoleState *out,
                                           bool *done);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVOPLAST_H */
