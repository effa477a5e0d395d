//! Independent brute-force reference implementations used as ground truth by
//! cross-checks and the CLI `verify` subcommand.
//!
//! Everything here recomputes results with its own scalar loops at
//! double-double precision and naive unshifted log-sum-exp, so a disagreement
//! indicts the production code rather than the oracle. This module never
//! calls the production solver or composition routines; it shares only data
//! types with them. Clarity is preferred over speed throughout, and instance
//! sizes are capped.

use crate::compose::{BoundCertificate, SaMatrix};
use crate::mdp::{FiniteMdp, RewardTable, TaskSet};
use crate::solver::{QTable, StochasticPolicy};
use thiserror::Error;

/// Certificates are recomputed at unit temperature, the certifier's proven
/// case.
const ORACLE_TEMPERATURE: f64 = 1.0;

/// Divergence coefficient the oracle pins for certificates. Deliberately a
/// local constant: if the production default ever drifted, the cross-checks
/// would fail loudly.
const ORACLE_DIVERGENCE_FACTOR: f64 = 0.5;

/// Mirror of the production saturation value for infinite divergences,
/// pinned independently for the same reason.
const ORACLE_INFINITE_SENTINEL: f64 = 1e300;

/// Dense linear solves are capped at this many unknowns.
pub const LINEAR_SOLVE_CAP: usize = 4096;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("oracle inapplicable: {0}")]
    Inapplicable(String),
    #[error("instance size {size} exceeds the oracle cap {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("linear system is singular")]
    Singular,
}

// ---------------------------------------------------------------------------
// Double-double arithmetic: an unevaluated sum hi + lo with |lo| <= ulp(hi)/2,
// giving roughly 32 significant decimal digits for sums and products.
// Transcendentals carry a first-order correction on top of the f64 kernel, so
// their relative error stays at f64 rounding level while long accumulations
// keep the extended width.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from_f64(value: f64) -> Dd {
        Dd { hi: value, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }
}

/// Error-free sum: returns (fl(a+b), rounding error).
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Error-free product via fused multiply-add.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

fn norm(hi: f64, lo: f64) -> Dd {
    let (s, e) = two_sum(hi, lo);
    Dd { hi: s, lo: e }
}

pub fn dd_add(x: Dd, y: Dd) -> Dd {
    let (s, e) = two_sum(x.hi, y.hi);
    norm(s, e + x.lo + y.lo)
}

pub fn dd_sub(x: Dd, y: Dd) -> Dd {
    dd_add(x, Dd { hi: -y.hi, lo: -y.lo })
}

pub fn dd_mul(x: Dd, y: Dd) -> Dd {
    let (p, e) = two_prod(x.hi, y.hi);
    norm(p, e + x.hi * y.lo + x.lo * y.hi)
}

pub fn dd_mul_f64(x: Dd, c: f64) -> Dd {
    let (p, e) = two_prod(x.hi, c);
    norm(p, e + x.lo * c)
}

pub fn dd_div_f64(x: Dd, c: f64) -> Dd {
    let t = x.hi / c;
    let (p, e) = two_prod(t, c);
    let r = ((x.hi - p) - e + x.lo) / c;
    norm(t, r)
}

/// Square root with one Newton correction; requires `x >= 0`.
pub fn dd_sqrt(x: Dd) -> Dd {
    if x.hi == 0.0 {
        return Dd::ZERO;
    }
    let s = x.hi.sqrt();
    let (p, e) = two_prod(s, s);
    let r = ((x.hi - p) - e + x.lo) / (2.0 * s);
    norm(s, r)
}

/// exp with a first-order correction for the low word.
pub fn dd_exp(x: Dd) -> Dd {
    let h = x.hi.exp();
    if !h.is_finite() || h == 0.0 {
        return Dd { hi: h, lo: 0.0 };
    }
    norm(h, h * x.lo)
}

/// ln with a first-order correction for the low word; requires `x > 0`.
pub fn dd_ln(x: Dd) -> Dd {
    let l = x.hi.ln();
    norm(l, x.lo / x.hi)
}

fn dd_gt(a: Dd, b: Dd) -> bool {
    a.hi > b.hi || (a.hi == b.hi && a.lo > b.lo)
}

fn dd_max_of(values: &[Dd]) -> Dd {
    let mut best = values[0];
    for v in &values[1..] {
        if dd_gt(*v, best) {
            best = *v;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Finite-horizon unrolls.
// ---------------------------------------------------------------------------

/// Horizon making the finite-horizon truncation error at most `tol`:
/// `H = ceil(ln(tol * (1 - gamma) / (2 * bound)) / ln(gamma))`, at least 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonConfig {
    pub horizon: usize,
}

impl HorizonConfig {
    pub fn for_tolerance(tol: f64, discount: f64, bound: f64) -> Result<Self, OracleError> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(OracleError::Argument(format!("tol {tol} must be finite and > 0")));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(OracleError::Argument(format!("discount {discount} outside [0, 1)")));
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(OracleError::Argument(format!("bound {bound} must be finite and >= 0")));
        }
        if discount == 0.0 || bound == 0.0 {
            return Ok(HorizonConfig { horizon: 1 });
        }
        let ratio: f64 = tol * (1.0 - discount) / (2.0 * bound);
        if ratio >= 1.0 {
            return Ok(HorizonConfig { horizon: 1 });
        }
        let horizon = (ratio.ln() / discount.ln()).ceil() as usize;
        Ok(HorizonConfig { horizon: horizon.max(1) })
    }
}

/// Unshifted log-sum-exp of a Q row at double-double width. Fails when an
/// exponential leaves the representable range, which is exactly the condition
/// the production solver's max-shift avoids.
fn dd_soft_value_row(row: &[Dd], temperature: f64) -> Result<Dd, OracleError> {
    let mut sum = Dd::ZERO;
    for q in row {
        let term = dd_exp(dd_div_f64(*q, temperature));
        if !term.hi.is_finite() {
            return Err(OracleError::Inapplicable(format!(
                "exp({}) overflows at extended precision; instance needs the shifted form",
                q.hi / temperature
            )));
        }
        sum = dd_add(sum, term);
    }
    if sum.hi <= 0.0 {
        return Err(OracleError::Inapplicable(
            "all exponentials underflowed to zero; instance needs the shifted form".into(),
        ));
    }
    Ok(dd_mul_f64(dd_ln(sum), temperature))
}

/// `horizon` exact soft backups from zero, at double-double precision, no
/// early stopping. Internal representation for the oracle pipeline.
fn unroll_soft_q_dd(
    mdp: &FiniteMdp,
    rewards: &[Dd],
    temperature: f64,
    horizon: usize,
) -> Result<Vec<Dd>, OracleError> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let mut q = vec![Dd::ZERO; s * a];
    for _ in 0..horizon {
        let mut values = Vec::with_capacity(s);
        for state in 0..s {
            values.push(dd_soft_value_row(&q[state * a..(state + 1) * a], temperature)?);
        }
        let mut next = Vec::with_capacity(s * a);
        for state in 0..s {
            for action in 0..a {
                let mut acc = Dd::ZERO;
                for (successor, &p) in mdp.transition_row(state, action).iter().enumerate() {
                    acc = dd_add(acc, dd_mul_f64(values[successor], p));
                }
                next.push(dd_add(rewards[state * a + action], dd_mul_f64(acc, gamma)));
            }
        }
        q = next;
    }
    Ok(q)
}

fn reward_to_dd(reward: &RewardTable) -> Vec<Dd> {
    reward.values().iter().map(|r| Dd::from_f64(*r)).collect()
}

fn check_shapes(mdp: &FiniteMdp, reward: &RewardTable) -> Result<(), OracleError> {
    if !reward.matches_shape(mdp) {
        return Err(OracleError::Argument("reward shape does not match mdp".into()));
    }
    Ok(())
}

/// Applies the soft backup exactly `horizon` times from zero using naive
/// unshifted arithmetic at double-double precision; no early stopping.
pub fn finite_horizon_soft_q(
    mdp: &FiniteMdp,
    reward: &RewardTable,
    temperature: f64,
    horizon: usize,
) -> Result<QTable, OracleError> {
    check_shapes(mdp, reward)?;
    if horizon == 0 {
        return Err(OracleError::Argument("horizon must be at least 1".into()));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(OracleError::Argument(format!(
            "temperature {temperature} must be finite and > 0"
        )));
    }
    let q = unroll_soft_q_dd(mdp, &reward_to_dd(reward), temperature, horizon)?;
    QTable::from_values(
        mdp.num_states(),
        mdp.num_actions(),
        temperature,
        q.iter().map(|v| v.to_f64()).collect(),
    )
    .map_err(|e| OracleError::Argument(e.to_string()))
}

/// Per-state divergence `-2 ln sum_a sqrt(p1 * p2)` at double-double
/// precision. `None` marks a disjoint support (infinite divergence).
fn dd_renyi_half_rows(p1: &[Dd], p2: &[Dd]) -> Option<Dd> {
    let mut coefficient = Dd::ZERO;
    for (a, b) in p1.iter().zip(p2) {
        coefficient = dd_add(coefficient, dd_sqrt(dd_mul(*a, *b)));
    }
    if coefficient.hi <= 0.0 {
        return None;
    }
    let d = dd_mul_f64(dd_ln(coefficient), -2.0);
    // Clamp the tiny negative that rounding can produce for identical rows.
    Some(if d.hi < 0.0 { Dd::ZERO } else { d })
}

/// `horizon` exact sweeps of the `C` recursion from zero at double-double
/// precision. Fails as inapplicable when any state's divergence is infinite.
pub fn finite_horizon_c_recursion(
    mdp: &FiniteMdp,
    pi1: &StochasticPolicy,
    pi2: &StochasticPolicy,
    divergence_factor: f64,
    horizon: usize,
) -> Result<SaMatrix, OracleError> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    if pi1.num_states() != s
        || pi1.num_actions() != a
        || pi2.num_states() != s
        || pi2.num_actions() != a
    {
        return Err(OracleError::Argument("policy shape does not match mdp".into()));
    }
    let mut weighted = Vec::with_capacity(s);
    for state in 0..s {
        let p1: Vec<Dd> = pi1.row(state).iter().map(|p| Dd::from_f64(*p)).collect();
        let p2: Vec<Dd> = pi2.row(state).iter().map(|p| Dd::from_f64(*p)).collect();
        match dd_renyi_half_rows(&p1, &p2) {
            Some(d) => weighted.push(dd_mul_f64(d, divergence_factor)),
            None => {
                return Err(OracleError::Inapplicable(format!(
                    "state {state} has disjoint policy supports (infinite divergence)"
                )))
            }
        }
    }
    let c = unroll_c_dd(mdp, &weighted, horizon);
    Ok(SaMatrix::from_values(s, a, c.iter().map(|v| v.to_f64()).collect()))
}

fn unroll_c_dd(mdp: &FiniteMdp, weighted: &[Dd], horizon: usize) -> Vec<Dd> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let mut c = vec![Dd::ZERO; s * a];
    for _ in 0..horizon {
        let max_c: Vec<Dd> =
            (0..s).map(|state| dd_max_of(&c[state * a..(state + 1) * a])).collect();
        let mut next = Vec::with_capacity(s * a);
        for state in 0..s {
            for action in 0..a {
                let mut acc = Dd::ZERO;
                for (successor, &p) in mdp.transition_row(state, action).iter().enumerate() {
                    let inner = dd_add(weighted[successor], max_c[successor]);
                    acc = dd_add(acc, dd_mul_f64(inner, p));
                }
                next.push(dd_mul_f64(acc, gamma));
            }
        }
        c = next;
    }
    c
}

/// `horizon` exact sweeps of the `D` recursion from zero at double-double
/// precision.
pub fn finite_horizon_d_recursion(
    mdp: &FiniteMdp,
    pi_sigma: &StochasticPolicy,
    c_star: &SaMatrix,
    horizon: usize,
) -> Result<SaMatrix, OracleError> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    if pi_sigma.num_states() != s || pi_sigma.num_actions() != a {
        return Err(OracleError::Argument("policy shape does not match mdp".into()));
    }
    if c_star.num_states() != s || c_star.num_actions() != a {
        return Err(OracleError::Argument("c_star shape does not match mdp".into()));
    }
    let c: Vec<Dd> = c_star.values().iter().map(|v| Dd::from_f64(*v)).collect();
    let probs: Vec<Dd> = pi_sigma.probs().iter().map(|p| Dd::from_f64(*p)).collect();
    let d = unroll_d_dd(mdp, &probs, &c, horizon);
    Ok(SaMatrix::from_values(s, a, d.iter().map(|v| v.to_f64()).collect()))
}

fn unroll_d_dd(mdp: &FiniteMdp, probs: &[Dd], c: &[Dd], horizon: usize) -> Vec<Dd> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let mut d = vec![Dd::ZERO; s * a];
    for _ in 0..horizon {
        let mut on_policy = Vec::with_capacity(s);
        for state in 0..s {
            let mut w = Dd::ZERO;
            for action in 0..a {
                let idx = state * a + action;
                if probs[idx].hi != 0.0 {
                    w = dd_add(w, dd_mul(probs[idx], dd_add(c[idx], d[idx])));
                }
            }
            on_policy.push(w);
        }
        let mut next = Vec::with_capacity(s * a);
        for state in 0..s {
            for action in 0..a {
                let mut acc = Dd::ZERO;
                for (successor, &p) in mdp.transition_row(state, action).iter().enumerate() {
                    acc = dd_add(acc, dd_mul_f64(on_policy[successor], p));
                }
                next.push(dd_mul_f64(acc, gamma));
            }
        }
        d = next;
    }
    d
}

// ---------------------------------------------------------------------------
// Dense linear solve for soft policy evaluation.
// ---------------------------------------------------------------------------

/// Solves `(I - gamma * P_pi) q = r + gamma * P h` directly, where `h` is the
/// per-state entropy source `-alpha * sum_a pi log pi`. LU with partial
/// pivoting plus two rounds of double-double iterative refinement.
pub fn linear_solve_policy_eval(
    mdp: &FiniteMdp,
    reward: &RewardTable,
    policy: &StochasticPolicy,
    temperature: f64,
) -> Result<QTable, OracleError> {
    check_shapes(mdp, reward)?;
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    if policy.num_states() != s || policy.num_actions() != a {
        return Err(OracleError::Argument("policy shape does not match mdp".into()));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(OracleError::Argument(format!(
            "temperature {temperature} must be finite and > 0"
        )));
    }
    let n = s * a;
    if n > LINEAR_SOLVE_CAP {
        return Err(OracleError::TooLarge { size: n, cap: LINEAR_SOLVE_CAP });
    }
    let gamma = mdp.discount();

    // Entropy source per state, skipping zero-probability actions.
    let mut entropy = vec![0.0_f64; s];
    for (state, slot) in entropy.iter_mut().enumerate() {
        let mut acc = Dd::ZERO;
        for action in 0..a {
            let p = policy.prob(state, action);
            if p != 0.0 {
                acc = dd_add(acc, dd_mul_f64(Dd::from_f64(policy.log_prob(state, action)), p));
            }
        }
        *slot = -temperature * acc.to_f64();
    }

    let mut matrix = vec![0.0_f64; n * n];
    let mut rhs = vec![0.0_f64; n];
    for state in 0..s {
        for action in 0..a {
            let row = state * a + action;
            matrix[row * n + row] = 1.0;
            let mut b = Dd::from_f64(reward.value(state, action));
            for (successor, &p) in mdp.transition_row(state, action).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                b = dd_add(b, dd_mul_f64(Dd::from_f64(entropy[successor]), gamma * p));
                for next_action in 0..a {
                    let col = successor * a + next_action;
                    matrix[row * n + col] -= gamma * p * policy.prob(successor, next_action);
                }
            }
            rhs[row] = b.to_f64();
        }
    }

    let lu = LuFactors::decompose(matrix, n)?;
    let mut solution = lu.solve(&rhs);
    // Two refinement passes with the residual accumulated at double-double
    // width; each pass contracts the forward error by the condition-scaled
    // rounding level.
    for _ in 0..2 {
        let mut residual = vec![0.0_f64; n];
        for (row, slot) in residual.iter_mut().enumerate() {
            let mut acc = Dd::from_f64(rhs[row]);
            for (coefficient, value) in lu.original[row * n..(row + 1) * n].iter().zip(&solution) {
                if *coefficient != 0.0 {
                    let (p, e) = two_prod(*coefficient, -value);
                    acc = dd_add(acc, Dd { hi: p, lo: e });
                }
            }
            *slot = acc.to_f64();
        }
        let correction = lu.solve(&residual);
        for (x, dx) in solution.iter_mut().zip(&correction) {
            *x += dx;
        }
    }
    QTable::from_values(s, a, temperature, solution)
        .map_err(|e| OracleError::Argument(e.to_string()))
}

/// LU factorization with partial pivoting, keeping the original matrix for
/// residual computation.
struct LuFactors {
    original: Vec<f64>,
    factors: Vec<f64>,
    pivots: Vec<usize>,
    n: usize,
}

impl LuFactors {
    fn decompose(matrix: Vec<f64>, n: usize) -> Result<Self, OracleError> {
        let original = matrix.clone();
        let mut factors = matrix;
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_mag = factors[k * n + k].abs();
            for row in (k + 1)..n {
                let mag = factors[row * n + k].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = row;
                }
            }
            if pivot_mag < 1e-300 {
                return Err(OracleError::Singular);
            }
            if pivot_row != k {
                for col in 0..n {
                    factors.swap(k * n + col, pivot_row * n + col);
                }
            }
            pivots.push(pivot_row);
            let pivot = factors[k * n + k];
            for row in (k + 1)..n {
                let multiplier = factors[row * n + k] / pivot;
                factors[row * n + k] = multiplier;
                for col in (k + 1)..n {
                    factors[row * n + col] -= multiplier * factors[k * n + col];
                }
            }
        }
        Ok(LuFactors { original, factors, pivots, n })
    }

    // Strided pivot/column access keeps the substitution clearer indexed.
    #[allow(clippy::needless_range_loop)]
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            if xk != 0.0 {
                for row in (k + 1)..n {
                    x[row] -= self.factors[row * n + k] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for col in (k + 1)..n {
                acc -= self.factors[k * n + col] * x[col];
            }
            x[k] = acc / self.factors[k * n + k];
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Exhaustive tiny-instance certificate.
// ---------------------------------------------------------------------------

/// Cap on states for the exhaustive certificate oracle.
pub const TINY_STATE_CAP: usize = 3;
/// Cap on actions for the exhaustive certificate oracle.
pub const TINY_ACTION_CAP: usize = 2;

/// Independently recomputes every certificate field for a pair of tasks on a
/// tiny instance: finite-horizon double-double unrolls for both constituent
/// solves, the compound solve, the composed-policy evaluation, and both
/// recursions, with its own Boltzmann extraction and divergence code. Unit
/// temperature and the halved divergence coefficient are pinned locally.
pub fn exhaustive_tiny_certificate(
    mdp: &FiniteMdp,
    tasks: &TaskSet,
    tol: f64,
) -> Result<BoundCertificate, OracleError> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    if s > TINY_STATE_CAP || a > TINY_ACTION_CAP {
        return Err(OracleError::TooLarge { size: s * a, cap: TINY_STATE_CAP * TINY_ACTION_CAP });
    }
    if tasks.len() != 2 {
        return Err(OracleError::Argument(format!(
            "exhaustive certificate needs exactly 2 tasks, got {}",
            tasks.len()
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(OracleError::Argument(format!("tol {tol} must be finite and > 0")));
    }
    for index in 0..2 {
        if !tasks.reward(index).matches_shape(mdp) {
            return Err(OracleError::Argument(format!("task {index} shape does not match mdp")));
        }
    }
    let gamma = mdp.discount();
    let alpha = ORACLE_TEMPERATURE;
    // Unroll two orders tighter than the requested tolerance so oracle
    // truncation is negligible against the 1e-8 agreement budget.
    let bound = tasks.reward(0).bound().max(tasks.reward(1).bound()) + (a as f64).ln();
    let horizon = HorizonConfig::for_tolerance(tol * 1e-2, gamma, bound)
        .map_err(|e| OracleError::Argument(e.to_string()))?
        .horizon;

    let q1 = unroll_soft_q_dd(mdp, &reward_to_dd(tasks.reward(0)), alpha, horizon)?;
    let q2 = unroll_soft_q_dd(mdp, &reward_to_dd(tasks.reward(1)), alpha, horizon)?;
    let pi1 = dd_boltzmann(&q1, s, a, alpha)?;
    let pi2 = dd_boltzmann(&q2, s, a, alpha)?;

    let r_compound: Vec<Dd> = tasks
        .reward(0)
        .values()
        .iter()
        .zip(tasks.reward(1).values())
        .map(|(x, y)| dd_div_f64(dd_add(Dd::from_f64(*x), Dd::from_f64(*y)), 2.0))
        .collect();
    let q_sigma: Vec<Dd> =
        q1.iter().zip(&q2).map(|(x, y)| dd_div_f64(dd_add(*x, *y), 2.0)).collect();
    let pi_sigma = dd_boltzmann(&q_sigma, s, a, alpha)?;

    let q_direct = unroll_soft_q_dd(mdp, &r_compound, alpha, horizon)?;
    let q_eval = unroll_policy_eval_dd(mdp, &r_compound, &pi_sigma, alpha, horizon)?;

    // Divergences and the two recursions. A disjoint support saturates
    // everything, mirroring the production sentinel convention.
    let mut weighted = Vec::with_capacity(s);
    let mut vacuous = false;
    for state in 0..s {
        match dd_renyi_half_rows(&pi1.probs[state], &pi2.probs[state]) {
            Some(d) => weighted.push(dd_mul_f64(d, ORACLE_DIVERGENCE_FACTOR)),
            None => {
                vacuous = true;
                break;
            }
        }
    }
    let (c, d) = if vacuous {
        let saturated = vec![Dd::from_f64(ORACLE_INFINITE_SENTINEL); s * a];
        (saturated.clone(), saturated)
    } else {
        let c = unroll_c_dd(mdp, &weighted, horizon);
        let probs_flat: Vec<Dd> =
            pi_sigma.probs.iter().flat_map(|row| row.iter().copied()).collect();
        let d = unroll_d_dd(mdp, &probs_flat, &c, horizon);
        (c, d)
    };

    let mut lemma_upper = Vec::with_capacity(s * a);
    let mut lemma_lower = Vec::with_capacity(s * a);
    let mut theorem = Vec::with_capacity(s * a);
    for idx in 0..s * a {
        lemma_upper.push(dd_sub(q_sigma[idx], q_direct[idx]).to_f64());
        lemma_lower.push(dd_sub(q_direct[idx], dd_sub(q_sigma[idx], c[idx])).to_f64());
        theorem.push(dd_sub(q_eval[idx], dd_sub(q_direct[idx], d[idx])).to_f64());
    }
    let mut corollary = Vec::with_capacity(s);
    for state in 0..s {
        let v_sigma = dd_soft_value_row(&q_sigma[state * a..(state + 1) * a], alpha)?;
        let v_direct = dd_soft_value_row(&q_direct[state * a..(state + 1) * a], alpha)?;
        let max_c = dd_max_of(&c[state * a..(state + 1) * a]);
        let upper = dd_sub(v_sigma, v_direct).to_f64();
        let lower = dd_sub(v_direct, dd_sub(v_sigma, max_c)).to_f64();
        corollary.push(upper.min(lower));
    }
    Ok(BoundCertificate {
        subset: (0, 1),
        temperature: alpha,
        divergence_factor: ORACLE_DIVERGENCE_FACTOR,
        c_star: SaMatrix::from_values(s, a, c.iter().map(|v| v.to_f64()).collect()),
        d_star: SaMatrix::from_values(s, a, d.iter().map(|v| v.to_f64()).collect()),
        lemma_upper_slack: SaMatrix::from_values(s, a, lemma_upper),
        lemma_lower_slack: SaMatrix::from_values(s, a, lemma_lower),
        theorem_slack: SaMatrix::from_values(s, a, theorem),
        corollary_slack: corollary,
        vacuous,
    })
}

/// Oracle-internal policy: per-state probability and log-probability rows at
/// double-double width.
struct DdPolicy {
    probs: Vec<Vec<Dd>>,
    log_probs: Vec<Vec<Dd>>,
}

fn dd_boltzmann(q: &[Dd], s: usize, a: usize, alpha: f64) -> Result<DdPolicy, OracleError> {
    let mut probs = Vec::with_capacity(s);
    let mut log_probs = Vec::with_capacity(s);
    for state in 0..s {
        let row = &q[state * a..(state + 1) * a];
        let value = dd_soft_value_row(row, alpha)?;
        let mut p_row = Vec::with_capacity(a);
        let mut l_row = Vec::with_capacity(a);
        for entry in row {
            let logit = dd_div_f64(dd_sub(*entry, value), alpha);
            l_row.push(logit);
            p_row.push(dd_exp(logit));
        }
        probs.push(p_row);
        log_probs.push(l_row);
    }
    Ok(DdPolicy { probs, log_probs })
}

fn unroll_policy_eval_dd(
    mdp: &FiniteMdp,
    rewards: &[Dd],
    policy: &DdPolicy,
    alpha: f64,
    horizon: usize,
) -> Result<Vec<Dd>, OracleError> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let mut q = vec![Dd::ZERO; s * a];
    for _ in 0..horizon {
        let mut on_policy = Vec::with_capacity(s);
        for state in 0..s {
            let mut w = Dd::ZERO;
            for action in 0..a {
                let p = policy.probs[state][action];
                if p.hi != 0.0 {
                    let inner = dd_sub(
                        q[state * a + action],
                        dd_mul_f64(policy.log_probs[state][action], alpha),
                    );
                    w = dd_add(w, dd_mul(p, inner));
                }
            }
            on_policy.push(w);
        }
        let mut next = Vec::with_capacity(s * a);
        for state in 0..s {
            for action in 0..a {
                let mut acc = Dd::ZERO;
                for (successor, &p) in mdp.transition_row(state, action).iter().enumerate() {
                    acc = dd_add(acc, dd_mul_f64(on_policy[successor], p));
                }
                next.push(dd_add(rewards[state * a + action], dd_mul_f64(acc, gamma)));
            }
        }
        q = next;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{random_mdp, random_reward, FiniteMdp, RewardTable, TaskSet};
    use crate::solver::StochasticPolicy;

    #[test]
    fn dd_sum_keeps_the_small_addend() {
        let x = dd_add(Dd::from_f64(1.0), Dd::from_f64(1e-20));
        assert_eq!(x.hi, 1.0);
        assert_eq!(x.lo, 1e-20);
        let back = dd_sub(x, Dd::from_f64(1.0));
        assert_eq!(back.to_f64(), 1e-20);
    }

    #[test]
    fn dd_product_captures_the_rounding_error() {
        let a = 1.0 + 2.0_f64.powi(-30);
        let x = dd_mul(Dd::from_f64(a), Dd::from_f64(a));
        // (1 + u)^2 = 1 + 2u + u^2; the u^2 term is below f64 resolution of
        // the head but must appear in the tail.
        let expected_tail = 2.0_f64.powi(-60);
        assert_eq!(x.lo, expected_tail);
    }

    #[test]
    fn dd_sqrt_of_dyadic_square_is_exact() {
        let x = dd_sqrt(Dd::from_f64(0.25));
        assert_eq!(x.hi, 0.5);
        assert_eq!(x.lo, 0.0);
    }

    #[test]
    fn horizon_formula_matches_hand_computation() {
        let config = HorizonConfig::for_tolerance(1e-10, 0.9, 1.0).unwrap();
        // ceil(ln(1e-10 * 0.1 / 2) / ln 0.9) = ceil(246.97)
        assert_eq!(config.horizon, 247);
        assert_eq!(HorizonConfig::for_tolerance(1e-10, 0.0, 1.0).unwrap().horizon, 1);
        assert!(HorizonConfig::for_tolerance(0.0, 0.9, 1.0).is_err());
    }

    #[test]
    fn zero_discount_unroll_returns_reward() {
        let mdp = random_mdp(300, 4, 2, 0.0, 1.0).unwrap();
        let reward = random_reward(301, &mdp, 1.0).unwrap();
        let q = finite_horizon_soft_q(&mdp, &reward, 1.0, 1).unwrap();
        assert_eq!(q.values(), reward.values());
    }

    #[test]
    fn single_backup_adds_the_entropy_of_the_zero_table() {
        let mdp = FiniteMdp::new(1, 2, vec![1.0, 1.0], 0.5, None).unwrap();
        let reward = RewardTable::new(1, 2, vec![1.0, -1.0], 1.0).unwrap();
        let q = finite_horizon_soft_q(&mdp, &reward, 1.0, 1).unwrap();
        // V0 = ln 2 for a zero Q row over two actions.
        assert!((q.value(0, 0) - (1.0 + 0.5 * std::f64::consts::LN_2)).abs() < 1e-15);
        assert!((q.value(0, 1) - (-1.0 + 0.5 * std::f64::consts::LN_2)).abs() < 1e-15);
    }

    #[test]
    fn consecutive_horizons_contract() {
        let mdp = random_mdp(310, 5, 3, 0.9, 0.8).unwrap();
        let reward = random_reward(311, &mdp, 1.0).unwrap();
        let mut previous_gap: Option<f64> = None;
        let mut previous_q = finite_horizon_soft_q(&mdp, &reward, 1.0, 1).unwrap();
        for horizon in 2..20 {
            let q = finite_horizon_soft_q(&mdp, &reward, 1.0, horizon).unwrap();
            let gap = q
                .values()
                .iter()
                .zip(previous_q.values())
                .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()));
            if let Some(p) = previous_gap {
                assert!(gap <= 0.9 * p + 1e-12, "horizon {horizon}: {gap} vs {p}");
            }
            previous_gap = Some(gap);
            previous_q = q;
        }
    }

    #[test]
    fn unshifted_form_reports_overflow_as_inapplicable() {
        let mdp = FiniteMdp::new(1, 1, vec![1.0], 0.9, None).unwrap();
        let reward = RewardTable::new(1, 1, vec![1.0], 1.0).unwrap();
        // Q grows toward 10; 10 / 0.001 = 10000 overflows exp.
        let result = finite_horizon_soft_q(&mdp, &reward, 0.001, 200);
        assert!(matches!(result, Err(OracleError::Inapplicable(_))));
    }

    #[test]
    fn linear_solve_zero_discount_returns_reward() {
        let mdp = random_mdp(320, 3, 2, 0.0, 1.0).unwrap();
        let reward = random_reward(321, &mdp, 1.0).unwrap();
        let uniform = StochasticPolicy::from_probs(3, 2, vec![0.5; 6]).unwrap();
        let q = linear_solve_policy_eval(&mdp, &reward, &uniform, 1.0).unwrap();
        for (x, y) in q.values().iter().zip(reward.values()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_solve_single_state_deterministic_policy() {
        let mdp = FiniteMdp::new(1, 1, vec![1.0], 0.9, None).unwrap();
        let reward = RewardTable::new(1, 1, vec![1.0], 1.0).unwrap();
        let policy = StochasticPolicy::from_probs(1, 1, vec![1.0]).unwrap();
        // Single action: log pi = 0, so the entropy source vanishes and
        // q = 1 / (1 - 0.9).
        let q = linear_solve_policy_eval(&mdp, &reward, &policy, 1.0).unwrap();
        assert!((q.value(0, 0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn linear_solve_rejects_oversized_systems() {
        let mdp = random_mdp(330, 70, 60, 0.9, 0.2).unwrap();
        let reward = random_reward(331, &mdp, 1.0).unwrap();
        let uniform = StochasticPolicy::from_probs(70, 60, vec![1.0 / 60.0; 4200]).unwrap();
        assert!(matches!(
            linear_solve_policy_eval(&mdp, &reward, &uniform, 1.0),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn tiny_certificate_of_identical_tasks_collapses() {
        let mdp = random_mdp(340, 3, 2, 0.9, 1.0).unwrap();
        let r = random_reward(341, &mdp, 1.0).unwrap();
        let tasks = TaskSet::new(vec![("x".into(), r.clone()), ("y".into(), r)]).unwrap();
        let certificate = exhaustive_tiny_certificate(&mdp, &tasks, 1e-10).unwrap();
        assert!(!certificate.vacuous);
        assert!(certificate.max_c_star() <= 1e-12);
        assert!(certificate.max_d_star() <= 1e-12);
        assert!(certificate.min_slack().abs() <= 1e-10);
    }

    #[test]
    fn tiny_certificate_at_zero_discount_has_zero_slacks() {
        let mdp = random_mdp(350, 3, 2, 0.0, 1.0).unwrap();
        let r1 = random_reward(351, &mdp, 1.0).unwrap();
        let r2 = random_reward(352, &mdp, 1.0).unwrap();
        let tasks = TaskSet::new(vec![("a".into(), r1), ("b".into(), r2)]).unwrap();
        let certificate = exhaustive_tiny_certificate(&mdp, &tasks, 1e-10).unwrap();
        assert!(certificate.max_c_star() <= 1e-13);
        assert!(certificate.min_slack().abs() <= 1e-13);
        assert!(certificate.is_valid());
    }

    #[test]
    fn tiny_certificate_rejects_oversized_instances() {
        let mdp = random_mdp(360, 4, 2, 0.9, 1.0).unwrap();
        let r1 = random_reward(361, &mdp, 1.0).unwrap();
        let r2 = random_reward(362, &mdp, 1.0).unwrap();
        let tasks = TaskSet::new(vec![("a".into(), r1), ("b".into(), r2)]).unwrap();
        assert!(matches!(
            exhaustive_tiny_certificate(&mdp, &tasks, 1e-10),
            Err(OracleError::TooLarge { .. })
        ));
    }
}
