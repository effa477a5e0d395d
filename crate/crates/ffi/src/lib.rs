//! C ABI for the soft Q-iteration library: opaque handles, integer status
//! codes, and a thread-local last-error message.
//!
//! Conventions:
//! - Every fallible call returns [`SoftqStatus`]; `SOFTQ_STATUS_OK` is 0.
//! - On any non-OK status the thread-local error message is set; read it with
//!   [`softq_last_error`].
//! - Handles created by `*_new`/`softq_solve`/`softq_certify` are owned by
//!   the caller and must be released with the matching `*_free` exactly once.
//! - All matrix buffers are row-major: Q-tables and policies are
//!   `num_states * num_actions` with the action index contiguous; transition
//!   tables are `num_states * num_actions * num_states` laid out as
//!   `[state][action][successor]`.

use softq::compose::{certify, compose, BoundCertificate, CertifyOptions};
use softq::mdp::{FiniteMdp, RewardTable, TaskSet};
use softq::solver::{solve_soft_q, SoftSolution, SoftSolveParams};
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result of every fallible call in this ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoftqStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument failed validation (shape, range, or finiteness).
    InvalidArgument = 2,
    /// The computation itself failed; see `softq_last_error`.
    Failure = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: SoftqStatus, message: &str) -> SoftqStatus {
    set_error(message);
    status
}

/// Owned finite MDP handle.
pub struct SoftqMdp {
    inner: FiniteMdp,
}

/// Owned solver-output handle: fixed-point Q, soft values, policy,
/// diagnostics.
pub struct SoftqSolution {
    inner: SoftSolution,
}

/// Owned composition-bound certificate handle.
pub struct SoftqCertificate {
    inner: BoundCertificate,
}

/// Library version as a static NUL-terminated string. Never null; do not
/// free.
#[no_mangle]
pub extern "C" fn softq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the most recent non-OK status on the calling thread,
/// as a NUL-terminated string. Never null (empty before any failure). The
/// pointer stays valid until the next failing call on the same thread; do
/// not free.
#[no_mangle]
pub extern "C" fn softq_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize, name: &str) -> Result<&'a [f64], SoftqStatus> {
    if ptr.is_null() {
        set_error(&format!("{name} is null"));
        return Err(SoftqStatus::NullArgument);
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

fn guarded(body: impl FnOnce() -> SoftqStatus) -> SoftqStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(SoftqStatus::Failure, "internal panic"),
    }
}

/// Creates a finite MDP from a row-major transition table.
///
/// `transition` holds `num_states * num_actions * num_states` probabilities;
/// each `[state][action]` row must sum to 1. `terminal` may be null (no
/// terminal states) or point to `num_states` flags (nonzero = terminal).
/// On success writes a new handle to `out`.
///
/// # Safety
/// `transition` must point to `transition_len` readable doubles; `terminal`,
/// when non-null, to `num_states` readable bytes; `out` to a writable
/// pointer slot. Buffers must stay valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn softq_mdp_new(
    num_states: usize,
    num_actions: usize,
    discount: f64,
    transition: *const f64,
    transition_len: usize,
    terminal: *const u8,
    out: *mut *mut SoftqMdp,
) -> SoftqStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SoftqStatus::NullArgument, "out is null");
        }
        let expected = num_states * num_actions * num_states;
        if transition_len != expected {
            return fail(
                SoftqStatus::InvalidArgument,
                &format!("transition_len {transition_len} != {expected}"),
            );
        }
        let transition = match slice_arg(transition, transition_len, "transition") {
            Ok(values) => values.to_vec(),
            Err(status) => return status,
        };
        let terminal_mask = if terminal.is_null() {
            None
        } else {
            Some(
                std::slice::from_raw_parts(terminal, num_states)
                    .iter()
                    .map(|&flag| flag != 0)
                    .collect(),
            )
        };
        match FiniteMdp::new(num_states, num_actions, transition, discount, terminal_mask) {
            Ok(mdp) => {
                *out = Box::into_raw(Box::new(SoftqMdp { inner: mdp }));
                SoftqStatus::Ok
            }
            Err(error) => fail(SoftqStatus::InvalidArgument, &error.to_string()),
        }
    })
}

/// Releases an MDP handle. Null is a no-op.
///
/// # Safety
/// `mdp` must be a pointer returned by [`softq_mdp_new`] that has not been
/// freed, or null.
#[no_mangle]
pub unsafe extern "C" fn softq_mdp_free(mdp: *mut SoftqMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

/// Number of states, or 0 if `mdp` is null.
///
/// # Safety
/// `mdp` must be a live handle from [`softq_mdp_new`], or null.
#[no_mangle]
pub unsafe extern "C" fn softq_mdp_num_states(mdp: *const SoftqMdp) -> usize {
    mdp.as_ref().map_or(0, |handle| handle.inner.num_states())
}

/// Number of actions, or 0 if `mdp` is null.
///
/// # Safety
/// `mdp` must be a live handle from [`softq_mdp_new`], or null.
#[no_mangle]
pub unsafe extern "C" fn softq_mdp_num_actions(mdp: *const SoftqMdp) -> usize {
    mdp.as_ref().map_or(0, |handle| handle.inner.num_actions())
}

/// Discount factor, or NaN if `mdp` is null.
///
/// # Safety
/// `mdp` must be a live handle from [`softq_mdp_new`], or null.
#[no_mangle]
pub unsafe extern "C" fn softq_mdp_discount(mdp: *const SoftqMdp) -> f64 {
    mdp.as_ref().map_or(f64::NAN, |handle| handle.inner.discount())
}

fn reward_from(mdp: &FiniteMdp, values: &[f64], bound: f64) -> Result<RewardTable, SoftqStatus> {
    let build = if bound < 0.0 {
        RewardTable::with_inferred_bound(mdp.num_states(), mdp.num_actions(), values.to_vec())
    } else {
        RewardTable::new(mdp.num_states(), mdp.num_actions(), values.to_vec(), bound)
    };
    build.map_err(|error| fail(SoftqStatus::InvalidArgument, &error.to_string()))
}

/// Solves the entropy-regularized fixed point for one reward table.
///
/// `rewards` holds `num_states * num_actions` entries; `reward_bound` caps
/// `|reward|` (pass a negative value to infer the bound from the data).
/// `temperature` is the entropy weight (0 selects the hard-max limit);
/// `tol` is the sup-norm solution tolerance. On success writes a solution
/// handle to `out`.
///
/// # Safety
/// `mdp` must be a live handle; `rewards` must point to `rewards_len`
/// readable doubles; `out` to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn softq_solve(
    mdp: *const SoftqMdp,
    rewards: *const f64,
    rewards_len: usize,
    reward_bound: f64,
    temperature: f64,
    tol: f64,
    out: *mut *mut SoftqSolution,
) -> SoftqStatus {
    guarded(|| {
        let Some(handle) = mdp.as_ref() else {
            return fail(SoftqStatus::NullArgument, "mdp is null");
        };
        if out.is_null() {
            return fail(SoftqStatus::NullArgument, "out is null");
        }
        let expected = handle.inner.num_states() * handle.inner.num_actions();
        if rewards_len != expected {
            return fail(
                SoftqStatus::InvalidArgument,
                &format!("rewards_len {rewards_len} != {expected}"),
            );
        }
        let values = match slice_arg(rewards, rewards_len, "rewards") {
            Ok(values) => values,
            Err(status) => return status,
        };
        let reward = match reward_from(&handle.inner, values, reward_bound) {
            Ok(reward) => reward,
            Err(status) => return status,
        };
        let params = SoftSolveParams { temperature, tol, max_iter: None };
        match solve_soft_q(&handle.inner, &reward, &params) {
            Ok(solution) => {
                *out = Box::into_raw(Box::new(SoftqSolution { inner: solution }));
                SoftqStatus::Ok
            }
            Err(error) => fail(SoftqStatus::Failure, &error.to_string()),
        }
    })
}

/// Releases a solution handle. Null is a no-op.
///
/// # Safety
/// `solution` must be a pointer returned by [`softq_solve`] that has not
/// been freed, or null.
#[no_mangle]
pub unsafe extern "C" fn softq_solution_free(solution: *mut SoftqSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Number of states, or 0 if `solution` is null.
///
/// # Safety
/// `solution` must be a live handle from [`softq_solve`], or null.
#[no_mangle]
pub unsafe extern "C" fn softq_solution_num_states(solution: *const SoftqSolution) -> usize {
    solution.as_ref().map_or(0, |handle| handle.inner.q.num_states())
}

/// Number of actions, or 0 if `solution` is null.
///
/// # Safety
/// `solution` must be a live handle from [`softq_solve`], or null.
#[no_mangle]
pub unsafe extern "C" fn softq_solution_num_actions(solution: *const SoftqSolution) -> usize {
    solution.as_ref().map_or(0, |handle| handle.inner.q.num_actions())
}

/// Fixed-point sweeps the solver ran, or 0 if `solution` is null.
///
/// # Safety
/// `solution` must be a live handle from [`softq_solve`], or null.
#[no_mangle]
pub unsafe extern "C" fn softq_solution_iterations(solution: *const SoftqSolution) -> usize {
    solution.as_ref().map_or(0, |handle| handle.inner.diagnostics.iterations)
}

/// Final sup-norm residual, or NaN if `solution` is null.
///
/// # Safety
/// `solution` must be a live handle from [`softq_solve`], or null.
#[no_mangle]
pub unsafe extern "C" fn softq_solution_final_residual(solution: *const SoftqSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |handle| handle.inner.diagnostics.final_residual)
}

unsafe fn copy_out(source: &[f64], out: *mut f64, out_len: usize, what: &str) -> SoftqStatus {
    if out.is_null() {
        return fail(SoftqStatus::NullArgument, "out is null");
    }
    if out_len != source.len() {
        return fail(
            SoftqStatus::InvalidArgument,
            &format!("{what}: out_len {out_len} != {}", source.len()),
        );
    }
    std::ptr::copy_nonoverlapping(source.as_ptr(), out, source.len());
    SoftqStatus::Ok
}

/// Copies the optimal Q-table (`num_states * num_actions`, row-major) into
/// `out`.
///
/// # Safety
/// `solution` must be a live handle; `out` must point to `out_len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn softq_solution_q(
    solution: *const SoftqSolution,
    out: *mut f64,
    out_len: usize,
) -> SoftqStatus {
    let Some(handle) = solution.as_ref() else {
        return fail(SoftqStatus::NullArgument, "solution is null");
    };
    copy_out(handle.inner.q.values(), out, out_len, "q")
}

/// Copies the soft state values (`num_states`) into `out`.
///
/// # Safety
/// `solution` must be a live handle; `out` must point to `out_len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn softq_solution_value(
    solution: *const SoftqSolution,
    out: *mut f64,
    out_len: usize,
) -> SoftqStatus {
    let Some(handle) = solution.as_ref() else {
        return fail(SoftqStatus::NullArgument, "solution is null");
    };
    copy_out(handle.inner.value.values(), out, out_len, "value")
}

/// Copies the policy probabilities (`num_states * num_actions`, row-major)
/// into `out`. Rows sum to 1.
///
/// # Safety
/// `solution` must be a live handle; `out` must point to `out_len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn softq_solution_policy(
    solution: *const SoftqSolution,
    out: *mut f64,
    out_len: usize,
) -> SoftqStatus {
    let Some(handle) = solution.as_ref() else {
        return fail(SoftqStatus::NullArgument, "solution is null");
    };
    copy_out(handle.inner.policy.probs(), out, out_len, "policy")
}

unsafe fn pair_setup<'a>(
    mdp: *const SoftqMdp,
    rewards_a: *const f64,
    bound_a: f64,
    rewards_b: *const f64,
    bound_b: f64,
    rewards_len: usize,
) -> Result<(&'a FiniteMdp, TaskSet), SoftqStatus> {
    let Some(handle) = mdp.as_ref() else {
        set_error("mdp is null");
        return Err(SoftqStatus::NullArgument);
    };
    let expected = handle.inner.num_states() * handle.inner.num_actions();
    if rewards_len != expected {
        set_error(&format!("rewards_len {rewards_len} != {expected}"));
        return Err(SoftqStatus::InvalidArgument);
    }
    let values_a = slice_arg(rewards_a, rewards_len, "rewards_a")?;
    let values_b = slice_arg(rewards_b, rewards_len, "rewards_b")?;
    let reward_a = reward_from(&handle.inner, values_a, bound_a)?;
    let reward_b = reward_from(&handle.inner, values_b, bound_b)?;
    let tasks = TaskSet::new(vec![("a".to_string(), reward_a), ("b".to_string(), reward_b)])
        .map_err(|error| fail(SoftqStatus::InvalidArgument, &error.to_string()))?;
    Ok((&handle.inner, tasks))
}

/// Solves both constituent tasks and writes the additively composed
/// (Q-averaged) Boltzmann policy — `num_states * num_actions`, row-major —
/// into `out_policy`. Composition itself runs zero extra solver sweeps.
///
/// # Safety
/// `mdp` must be a live handle; `rewards_a` and `rewards_b` must each point
/// to `rewards_len` readable doubles; `out_policy` to `out_len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn softq_compose_policy(
    mdp: *const SoftqMdp,
    rewards_a: *const f64,
    bound_a: f64,
    rewards_b: *const f64,
    bound_b: f64,
    rewards_len: usize,
    temperature: f64,
    tol: f64,
    out_policy: *mut f64,
    out_len: usize,
) -> SoftqStatus {
    guarded(|| {
        let (mdp, tasks) =
            match pair_setup(mdp, rewards_a, bound_a, rewards_b, bound_b, rewards_len) {
                Ok(parts) => parts,
                Err(status) => return status,
            };
        let params = SoftSolveParams { temperature, tol, max_iter: None };
        let solve_pair = || -> Result<_, softq::solver::SolveError> {
            let first = solve_soft_q(mdp, tasks.reward(0), &params)?;
            let second = solve_soft_q(mdp, tasks.reward(1), &params)?;
            Ok((first, second))
        };
        let (first, second) = match solve_pair() {
            Ok(pair) => pair,
            Err(error) => return fail(SoftqStatus::Failure, &error.to_string()),
        };
        match compose(mdp, &tasks, &[0, 1], &[&first, &second]) {
            Ok(composed) => copy_out(composed.pi_sigma.probs(), out_policy, out_len, "policy"),
            Err(error) => fail(SoftqStatus::Failure, &error.to_string()),
        }
    })
}

/// Certifies the additive-composition error bounds for a pair of tasks:
/// solves both constituents and the compound task, evaluates the composed
/// policy, runs the divergence-sourced `C`/`D` recursions, and checks every
/// bound inequality. On success writes a certificate handle to `out`.
///
/// `divergence_factor` scales the policy divergence feeding the `C`
/// recursion; pass 0.5 for the tight default.
///
/// # Safety
/// `mdp` must be a live handle; `rewards_a` and `rewards_b` must each point
/// to `rewards_len` readable doubles; `out` to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn softq_certify(
    mdp: *const SoftqMdp,
    rewards_a: *const f64,
    bound_a: f64,
    rewards_b: *const f64,
    bound_b: f64,
    rewards_len: usize,
    temperature: f64,
    tol: f64,
    divergence_factor: f64,
    out: *mut *mut SoftqCertificate,
) -> SoftqStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SoftqStatus::NullArgument, "out is null");
        }
        let (mdp, tasks) =
            match pair_setup(mdp, rewards_a, bound_a, rewards_b, bound_b, rewards_len) {
                Ok(parts) => parts,
                Err(status) => return status,
            };
        let options = CertifyOptions { temperature, tol, divergence_factor };
        match certify(mdp, &tasks, (0, 1), &options) {
            Ok(certificate) => {
                *out = Box::into_raw(Box::new(SoftqCertificate { inner: certificate }));
                SoftqStatus::Ok
            }
            Err(error) => fail(SoftqStatus::Failure, &error.to_string()),
        }
    })
}

/// Releases a certificate handle. Null is a no-op.
///
/// # Safety
/// `certificate` must be a pointer returned by [`softq_certify`] that has
/// not been freed, or null.
#[no_mangle]
pub unsafe extern "C" fn softq_certificate_free(certificate: *mut SoftqCertificate) {
    if !certificate.is_null() {
        drop(Box::from_raw(certificate));
    }
}

/// Reads the certificate summary. Each output pointer may be null to skip
/// that field. `out_valid` is 1 when every bound slack is at least -1e-6;
/// `out_vacuous` is 1 when an infinite policy divergence saturated the
/// bounds (they hold trivially and carry no information).
///
/// # Safety
/// `certificate` must be a live handle from [`softq_certify`]; each non-null
/// output pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn softq_certificate_summary(
    certificate: *const SoftqCertificate,
    out_valid: *mut u8,
    out_vacuous: *mut u8,
    out_min_slack: *mut f64,
    out_max_c_star: *mut f64,
    out_max_d_star: *mut f64,
) -> SoftqStatus {
    let Some(handle) = certificate.as_ref() else {
        return fail(SoftqStatus::NullArgument, "certificate is null");
    };
    if !out_valid.is_null() {
        *out_valid = handle.inner.is_valid() as u8;
    }
    if !out_vacuous.is_null() {
        *out_vacuous = handle.inner.vacuous as u8;
    }
    if !out_min_slack.is_null() {
        *out_min_slack = handle.inner.min_slack();
    }
    if !out_max_c_star.is_null() {
        *out_max_c_star = handle.inner.max_c_star();
    }
    if !out_max_d_star.is_null() {
        *out_max_d_star = handle.inner.max_d_star();
    }
    SoftqStatus::Ok
}
