#ifndef SOFTQ_H
#define SOFTQ_H

/* Generated by cbindgen from the softq-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this ABI.
 */
typedef enum SoftqStatus {
  /**
   * The call succeeded.
   */
  SOFTQ_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SOFTQ_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument failed validation (shape, range, or finiteness).
   */
  SOFTQ_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The computation itself failed; see `softq_last_error`.
   */
  SOFTQ_STATUS_FAILURE = 3,
} SoftqStatus;

/**
 * Owned composition-bound certificate handle.
 */
typedef struct SoftqCertificate SoftqCertificate;

/**
 * Owned finite MDP handle.
 */
typedef struct SoftqMdp SoftqMdp;

/**
 * Owned solver-output handle: fixed-point Q, soft values, policy,
 * diagnostics.
 */
typedef struct SoftqSolution SoftqSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Never null; do not
 * free.
 */
const char *softq_version(void);

/**
 * Message describing the most recent non-OK status on the calling thread,
 * as a NUL-terminated string. Never null (empty before any failure). The
 * pointer stays valid until the next failing call on the same thread; do
 * not free.
 */
const char *softq_last_error(void);

/**
 * Creates a finite MDP from a row-major transition table.
 *
 * `transition` holds `num_states * num_actions * num_states` probabilities;
 * each `[state][action]` row must sum to 1. `terminal` may be null (no
 * terminal states) or point to `num_states` flags (nonzero = terminal).
 * On success writes a new handle to `out`.
 *
 * # Safety
 * `transition` must point to `transition_len` readable doubles; `terminal`,
 * when non-null, to `num_states` readable bytes; `out` to a writable
 * pointer slot. Buffers must stay valid for the duration of the call.
 */
enum SoftqStatus softq_mdp_new(size_t num_states,
                               size_t num_actions,
                               double discount,
                               const double *transition,
                               size_t transition_len,
                               const uint8_t *terminal,
                               struct SoftqMdp **out);

/**
 * Releases an MDP handle. Null is a no-op.
 *
 * # Safety
 * `mdp` must be a pointer returned by [`softq_mdp_new`] that has not been
 * freed, or null.
 */
void softq_mdp_free(struct SoftqMdp *mdp);

/**
 * Number of states, or 0 if `mdp` is null.
 *
 * # Safety
 * `mdp` must be a live handle from [`softq_mdp_new`], or null.
 */
size_t softq_mdp_num_states(const struct SoftqMdp *mdp);

/**
 * Number of actions, or 0 if `mdp` is null.
 *
 * # Safety
 * `mdp` must be a live handle from [`softq_mdp_new`], or null.
 */
size_t softq_mdp_num_actions(const struct SoftqMdp *mdp);

/**
 * Discount factor, or NaN if `mdp` is null.
 *
 * # Safety
 * `mdp` must be a live handle from [`softq_mdp_new`], or null.
 */
double softq_mdp_discount(const struct SoftqMdp *mdp);

/**
 * Solves the entropy-regularized fixed point for one reward table.
 *
 * `rewards` holds `num_states * num_actions` entries; `reward_bound` caps
 * `|reward|` (pass a negative value to infer the bound from the data).
 * `temperature` is the entropy weight (0 selects the hard-max limit);
 * `tol` is the sup-norm solution tolerance. On success writes a solution
 * handle to `out`.
 *
 * # Safety
 * `mdp` must be a live handle; `rewards` must point to `rewards_len`
 * readable doubles; `out` to a writable pointer slot.
 */
enum SoftqStatus softq_solve(const struct SoftqMdp *mdp,
                             const double *rewards,
                             size_t rewards_len,
                             double reward_bound,
                             double temperature,
                             double tol,
                             struct SoftqSolution **out);

/**
 * Releases a solution handle. Null is a no-op.
 *
 * # Safety
 * `solution` must be a pointer returned by [`softq_solve`] that has not
 * been freed, or null.
 */
void softq_solution_free(struct SoftqSolution *solution);

/**
 * Number of states, or 0 if `solution` is null.
 *
 * # Safety
 * `solution` must be a live handle from [`softq_solve`], or null.
 */
size_t softq_solution_num_states(const struct SoftqSolution *solution);

/**
 * Number of actions, or 0 if `solution` is null.
 *
 * # Safety
 * `solution` must be a live handle from [`softq_solve`], or null.
 */
size_t softq_solution_num_actions(const struct SoftqSolution *solution);

/**
 * Fixed-point sweeps the solver ran, or 0 if `solution` is null.
 *
 * # Safety
 * `solution` must be a live handle from [`softq_solve`], or null.
 */
size_t softq_solution_iterations(const struct SoftqSolution *solution);

/**
 * Final sup-norm residual, or NaN if `solution` is null.
 *
 * # Safety
 * `solution` must be a live handle from [`softq_solve`], or null.
 */
double softq_solution_final_residual(const struct SoftqSolution *solution);

/**
 * Copies the optimal Q-table (`num_states * num_actions`, row-major) into
 * `out`.
 *
 * # Safety
 * `solution` must be a live handle; `out` must point to `out_len` writable
 * doubles.
 */
enum SoftqStatus softq_solution_q(const struct SoftqSolution *solution,
                                  double *out,
                                  size_t out_len);

/**
 * Copies the soft state values (`num_states`) into `out`.
 *
 * # Safety
 * `solution` must be a live handle; `out` must point to `out_len` writable
 * doubles.
 */
enum SoftqStatus softq_solution_value(const struct SoftqSolution *solution,
                                      double *out,
                                      size_t out_len);

/**
 * Copies the policy probabilities (`num_states * num_actions`, row-major)
 * into `out`. Rows sum to 1.
 *
 * # Safety
 * `solution` must be a live handle; `out` must point to `out_len` writable
 * doubles.
 */
enum SoftqStatus softq_solution_policy(const struct SoftqSolution *solution,
                                       double *out,
                                       size_t out_len);

/**
 * Solves both constituent tasks and writes the additively composed
 * (Q-averaged) Boltzmann policy — `num_states * num_actions`, row-major —
 * into `out_policy`. Composition itself runs zero extra solver sweeps.
 *
 * # Safety
 * `mdp` must be a live handle; `rewards_a` and `rewards_b` must each point
 * to `rewards_len` readable doubles; `out_policy` to `out_len` writable
 * doubles.
 */
enum SoftqStatus softq_compose_policy(const struct SoftqMdp *mdp,
                                      const double *rewards_a,
                                      double bound_a,
                                      const double *rewards_b,
                                      double bound_b,
                                      size_t rewards_len,
                                      double temperature,
                                      double tol,
                                      double *out_policy,
                                      size_t out_len);

/**
 * Certifies the additive-composition error bounds for a pair of tasks:
 * solves both constituents and the compound task, evaluates the composed
 * policy, runs the divergence-sourced `C`/`D` recursions, and checks every
 * bound inequality. On success writes a certificate handle to `out`.
 *
 * `divergence_factor` scales the policy divergence feeding the `C`
 * recursion; pass 0.5 for the tight default.
 *
 * # Safety
 * `mdp` must be a live handle; `rewards_a` and `rewards_b` must each point
 * to `rewards_len` readable doubles; `out` to a writable pointer slot.
 */
enum SoftqStatus softq_certify(const struct SoftqMdp *mdp,
                               const double *rewards_a,
                               double bound_a,
                               const double *rewards_b,
                               double bound_b,
                               size_t rewards_len,
                               double temperature,
                               double tol,
                               double divergence_factor,
                               struct SoftqCertificate **out);

/**
 * Releases a certificate handle. Null is a no-op.
 *
 * # Safety
 * `certificate` must be a pointer returned by [`softq_certify`] that has
 * not been freed, or null.
 */
void softq_certificate_free(struct SoftqCertificate *certificate);

/**
 * Reads the certificate summary. Each output pointer may be null to skip
 * that field. `out_valid` is 1 when every bound slack is at least -1e-6;
 * `out_vacuous` is 1 when an infinite policy divergence saturated the
 * bounds (they hold trivially and carry no information).
 *
 * # Safety
 * `certificate` must be a live handle from [`softq_certify`]; each non-null
 * output pointer must be writable.
 */
enum SoftqStatus softq_certificate_summary(const struct SoftqCertificate *certificate,
                                           uint8_t *out_valid,
                                           uint8_t *out_vacuous,
                                           double *out_min_slack,
                                           double *out_max_c_star,
                                           double *out_max_d_star);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SOFTQ_H */
