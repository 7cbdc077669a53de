#ifndef ZDFORGE_H
#define ZDFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ZdStatus {
  ZD_STATUS_OK = 0,
  ZD_STATUS_INVALID_ARGUMENT = 2,
  ZD_STATUS_EMPTY_REGION = 3,
  ZD_STATUS_GAMMA_OUT_OF_RANGE = 4,
  ZD_STATUS_UNSUPPORTED = 5,
  ZD_STATUS_NUMERICAL = 6,
  ZD_STATUS_NULL_POINTER = 7,
  ZD_STATUS_PANIC = 8,
} ZdStatus;

/**
 * Opaque game handle.
 */
typedef struct ZdGame ZdGame;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses game JSON into a new handle stored in `*out`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ZdStatus zd_game_from_json(const char *json, struct ZdGame **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `game` must come from [`zd_game_from_json`] and not be freed twice.
 */
void zd_game_free(struct ZdGame *game);

/**
 * # Safety
 * `game` and `out` must be valid pointers.
 */
enum ZdStatus zd_game_player_count(const struct ZdGame *game, size_t *out);

/**
 * # Safety
 * `game` and `out` must be valid pointers.
 */
enum ZdStatus zd_game_state_count(const struct ZdGame *game, size_t *out);

/**
 * Discounted utilities of every player. `probs` holds `n * m` entries,
 * `init_probs` and `out` hold `n`.
 *
 * # Safety
 * Array arguments must point to at least the stated number of `f64`s.
 */
enum ZdStatus zd_analytic_utility(const struct ZdGame *game,
                                  const double *probs,
                                  const double *init_probs,
                                  double *out);

/**
 * Enforceable interval `[Γ⁻, Γ⁺]` for weights `omega` (`n - 1` entries).
 * Returns `EMPTY_REGION` when no equalizer exists.
 *
 * # Safety
 * `omega` must hold `omega_len` entries; outputs must be valid pointers.
 */
enum ZdStatus zd_gamma_interval(const struct ZdGame *game,
                                const double *omega,
                                size_t omega_len,
                                double leader_init,
                                double *out_lower,
                                double *out_upper);

/**
 * Leader equalizer strategy for explicit `(γ, φ)`; writes `m` probabilities.
 *
 * # Safety
 * `omega` must hold `omega_len` entries and `out_probs` room for `m`.
 */
enum ZdStatus zd_synthesize_equalizer(const struct ZdGame *game,
                                      const double *omega,
                                      size_t omega_len,
                                      double gamma,
                                      double phi,
                                      double leader_init,
                                      double *out_probs);

/**
 * Leader equalizer strategy enforcing `gamma`, with the chosen `φ` in
 * `*out_phi`.
 *
 * # Safety
 * `omega` must hold `omega_len` entries and `out_probs` room for `m`.
 */
enum ZdStatus zd_equalizer_for_gamma(const struct ZdGame *game,
                                     const double *omega,
                                     size_t omega_len,
                                     double gamma,
                                     double leader_init,
                                     double *out_phi,
                                     double *out_probs);

/**
 * Gap report as JSON in `*out`, released with [`zd_string_free`].
 *
 * # Safety
 * `omega` must hold `omega_len` entries and `out` be a valid pointer.
 */
enum ZdStatus zd_gap_report_json(const struct ZdGame *game,
                                 const double *omega,
                                 size_t omega_len,
                                 char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. Null is ignored.
 */
void zd_string_free(char *s);

/**
 * Message for the last failed call on this thread, empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *zd_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZDFORGE_H */
