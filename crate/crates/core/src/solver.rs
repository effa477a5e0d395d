//! Entropy-regularized dynamic programming: soft value, soft Bellman backup,
//! soft Q-iteration, Boltzmann policy extraction, soft policy evaluation, a
//! residual-descent variant, and the hard-max (temperature zero) baseline.
//!
//! All fixed-point loops measure convergence in the sup norm. Loops stop at
//! an internal threshold `tol * min(1, (1-gamma)/(2*gamma))`, which places
//! the returned iterate within `tol/2` of the true fixed point rather than
//! merely making successive iterates `tol`-close.

use crate::mdp::{FiniteMdp, RewardTable};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(
        "no convergence after {} sweeps (last residual {:e})",
        .diagnostics.iterations,
        .diagnostics.final_residual
    )]
    NonConvergence { diagnostics: SolveDiagnostics },
    #[error(
        "divergence detected after {} sweeps (residual grew to {:e})",
        .diagnostics.iterations,
        .diagnostics.final_residual
    )]
    Divergence { diagnostics: SolveDiagnostics },
}

/// Q-values over the `(state, action)` grid at a fixed temperature.
/// `temperature == 0` encodes the hard-max limit produced by
/// [`hard_max_solve`]; every other constructor requires `temperature > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    temperature: f64,
    /// Flat `[state][action]`.
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize, temperature: f64) -> Self {
        QTable { num_states, num_actions, temperature, values: vec![0.0; num_states * num_actions] }
    }

    pub fn from_values(
        num_states: usize,
        num_actions: usize,
        temperature: f64,
        values: Vec<f64>,
    ) -> Result<Self, SolveError> {
        if values.len() != num_states * num_actions {
            return Err(SolveError::Argument(format!(
                "q table has {} entries, expected {}",
                values.len(),
                num_states * num_actions
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(SolveError::Argument("q table entries must be finite".into()));
        }
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(SolveError::Argument(format!(
                "temperature {temperature} must be finite and >= 0"
            )));
        }
        Ok(QTable { num_states, num_actions, temperature, values })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// State values `V[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(values: Vec<f64>) -> Self {
        ValueTable { values }
    }

    pub fn value(&self, state: usize) -> f64 {
        self.values[state]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A stochastic policy with both probabilities and log-probabilities. Rows
/// sum to 1 within 1e-12. For one-hot policies the zero entries carry
/// `log_prob = -inf`; consumers skip zero-probability terms, keeping the
/// `0 * log 0 = 0` convention.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    num_states: usize,
    num_actions: usize,
    /// Flat `[state][action]`.
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl StochasticPolicy {
    /// Builds from probabilities, renormalizing each row exactly and deriving
    /// log-probabilities. Rows must be non-negative with a positive sum.
    pub fn from_probs(
        num_states: usize,
        num_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self, SolveError> {
        if probs.len() != num_states * num_actions {
            return Err(SolveError::Argument(format!(
                "policy has {} entries, expected {}",
                probs.len(),
                num_states * num_actions
            )));
        }
        let mut probs = probs;
        for (state, row) in probs.chunks_mut(num_actions).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(SolveError::Argument(format!(
                    "policy row {state} has a negative or non-finite entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if total <= 0.0 {
                return Err(SolveError::Argument(format!("policy row {state} sums to {total}")));
            }
            for p in row.iter_mut() {
                *p /= total;
            }
            patch_row_sum(row);
        }
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(StochasticPolicy { num_states, num_actions, probs, log_probs })
    }

    fn from_parts(
        num_states: usize,
        num_actions: usize,
        probs: Vec<f64>,
        log_probs: Vec<f64>,
    ) -> Self {
        StochasticPolicy { num_states, num_actions, probs, log_probs }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.num_actions + action]
    }

    pub fn log_prob(&self, state: usize, action: usize) -> f64 {
        self.log_probs[state * self.num_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn log_row(&self, state: usize) -> &[f64] {
        &self.log_probs[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }
}

/// Folds the row's rounding remainder into its largest entry so the sum is 1
/// to the last bit.
fn patch_row_sum(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    let largest = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
    row[largest] += 1.0 - sum;
}

/// Convergence record of a fixed-point loop. `contraction_trace[k]` is the
/// sup-norm residual measured at sweep `k+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub final_residual: f64,
    pub contraction_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SoftSolveParams {
    pub temperature: f64,
    pub tol: f64,
    /// Sweep cap; `None` derives a bound from the discount, tolerance, and
    /// reward bound that is provably sufficient.
    pub max_iter: Option<usize>,
}

impl Default for SoftSolveParams {
    fn default() -> Self {
        SoftSolveParams { temperature: 1.0, tol: 1e-10, max_iter: None }
    }
}

#[derive(Debug, Clone)]
pub struct DescentParams {
    pub temperature: f64,
    /// Relaxation step. `1` reproduces the exact backup; convergence requires
    /// `step < 2/(1+gamma)`.
    pub step: f64,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for DescentParams {
    fn default() -> Self {
        DescentParams { temperature: 1.0, step: 1.0, tol: 1e-10, max_iter: None }
    }
}

/// Everything [`solve_soft_q`] produces: the fixed-point Q, its soft values,
/// the Boltzmann policy, and the convergence record.
#[derive(Debug, Clone)]
pub struct SoftSolution {
    pub q: QTable,
    pub value: ValueTable,
    pub policy: StochasticPolicy,
    pub diagnostics: SolveDiagnostics,
}

/// Like [`SoftSolution`] but for the hard-max baseline: greedy one-hot
/// policy, `q.temperature() == 0`.
#[derive(Debug, Clone)]
pub struct HardSolution {
    pub q: QTable,
    pub value: ValueTable,
    pub policy: StochasticPolicy,
    pub diagnostics: SolveDiagnostics,
}

/// Stopping threshold on successive-iterate distance that guarantees the
/// iterate is within `tol/2` of the fixed point: if `||Q_{k+1} - Q_k|| <= h`
/// then `||Q_{k+1} - Q*|| <= h * gamma/(1-gamma)`.
pub(crate) fn internal_threshold(tol: f64, discount: f64) -> f64 {
    if discount == 0.0 {
        tol
    } else {
        tol * (((1.0 - discount) / (2.0 * discount)).min(1.0))
    }
}

/// Sweeps provably sufficient to bring the residual from `source_bound` below
/// `threshold` under a `rate`-contraction, plus slack for rounding.
pub(crate) fn sufficient_iterations(threshold: f64, rate: f64, source_bound: f64) -> usize {
    if source_bound <= threshold || rate <= 0.0 {
        return 4;
    }
    let k = ((threshold / source_bound).ln() / rate.ln()).ceil();
    k as usize + 16
}

/// Reward scale plus the largest possible entropy inflow per sweep; bounds
/// the first residual of every loop in this module.
fn source_bound(reward: &RewardTable, temperature: f64, num_actions: usize) -> f64 {
    reward.bound() + temperature * (num_actions as f64).ln()
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Stop threshold with a relative floor: once sweep-to-sweep changes reach a
/// few ulps of the iterate itself, doubles cannot resolve further progress
/// and insisting on a smaller absolute threshold would spin forever (large
/// discounts with large fixed points, e.g. values of order 1e4 at tight
/// tolerance, hit this).
pub(crate) fn effective_threshold(threshold: f64, values: &[f64]) -> f64 {
    let magnitude = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    threshold.max(magnitude * f64::EPSILON * 8.0)
}

/// Soft maximum of a Q row: `max + alpha * ln(sum_a exp((q_a - max)/alpha))`.
/// The shift by the row maximum keeps the exponentials in range; the naive
/// form overflows for `q/alpha > ~700`. At `alpha == 0` this is the plain
/// maximum.
pub fn soft_value_row(row: &[f64], temperature: f64) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v));
    if temperature == 0.0 {
        return max;
    }
    let sum: f64 = row.iter().map(|q| ((q - max) / temperature).exp()).sum();
    max + temperature * sum.ln()
}

/// Soft maximum of `q`'s row at `state`, at the table's own temperature.
pub fn soft_value(q: &QTable, state: usize) -> f64 {
    soft_value_row(q.row(state), q.temperature())
}

/// Soft values of every state.
pub fn soft_values(q: &QTable) -> ValueTable {
    ValueTable::new((0..q.num_states()).map(|s| soft_value(q, s)).collect())
}

/// One application of the soft Bellman operator:
/// `Q'(s,a) = r(s,a) + gamma * sum_{s'} P(s,a,s') * soft_value(q, s')`.
/// Zero-probability successors are skipped, fixing the reduction order.
pub fn soft_backup(mdp: &FiniteMdp, reward: &RewardTable, q: &QTable) -> QTable {
    assert!(reward.matches_shape(mdp), "reward shape does not match mdp");
    assert_eq!(q.num_states(), mdp.num_states(), "q shape does not match mdp");
    assert_eq!(q.num_actions(), mdp.num_actions(), "q shape does not match mdp");
    let values = soft_values(q);
    backup_with_state_values(mdp, reward, values.values(), q.temperature())
}

fn backup_with_state_values(
    mdp: &FiniteMdp,
    reward: &RewardTable,
    state_values: &[f64],
    temperature: f64,
) -> QTable {
    let gamma = mdp.discount();
    let mut out = Vec::with_capacity(mdp.num_states() * mdp.num_actions());
    for state in 0..mdp.num_states() {
        for action in 0..mdp.num_actions() {
            let mut expected = 0.0;
            for (next, &p) in mdp.transition_row(state, action).iter().enumerate() {
                if p != 0.0 {
                    expected += p * state_values[next];
                }
            }
            out.push(reward.value(state, action) + gamma * expected);
        }
    }
    QTable {
        num_states: mdp.num_states(),
        num_actions: mdp.num_actions(),
        temperature,
        values: out,
    }
}

/// Drives `backup` to its fixed point from `Q = 0`, recording the residual
/// trace. Succeeds once the sup-norm change drops to `threshold`.
fn iterate_to_fixed_point(
    mdp: &FiniteMdp,
    temperature: f64,
    threshold: f64,
    cap: usize,
    backup: impl Fn(&QTable) -> QTable,
) -> Result<(QTable, SolveDiagnostics), SolveError> {
    let mut q = QTable::zeros(mdp.num_states(), mdp.num_actions(), temperature);
    let mut trace = Vec::new();
    for iteration in 1..=cap {
        let next = backup(&q);
        let residual = sup_diff(q.values(), next.values());
        trace.push(residual);
        q = next;
        if residual <= effective_threshold(threshold, q.values()) {
            return Ok((
                q,
                SolveDiagnostics {
                    iterations: iteration,
                    final_residual: residual,
                    contraction_trace: trace,
                },
            ));
        }
    }
    let final_residual = trace.last().copied().unwrap_or(0.0);
    Err(SolveError::NonConvergence {
        diagnostics: SolveDiagnostics { iterations: cap, final_residual, contraction_trace: trace },
    })
}

fn check_common(
    mdp: &FiniteMdp,
    reward: &RewardTable,
    temperature: f64,
    tol: f64,
) -> Result<(), SolveError> {
    if !reward.matches_shape(mdp) {
        return Err(SolveError::Argument(format!(
            "reward shape {}x{} does not match mdp {}x{}",
            reward.num_states(),
            reward.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(SolveError::Argument(format!("tol {tol} must be finite and > 0")));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(SolveError::Argument(format!(
            "temperature {temperature} must be finite and > 0"
        )));
    }
    Ok(())
}

/// Iterates the soft Bellman backup from `Q = 0` to its fixed point and
/// extracts soft values and the Boltzmann policy
/// `pi(a|s) = exp((Q(s,a) - V(s)) / alpha)`.
pub fn solve_soft_q(
    mdp: &FiniteMdp,
    reward: &RewardTable,
    params: &SoftSolveParams,
) -> Result<SoftSolution, SolveError> {
    check_common(mdp, reward, params.temperature, params.tol)?;
    let threshold = internal_threshold(params.tol, mdp.discount());
    let cap = params.max_iter.unwrap_or_else(|| {
        sufficient_iterations(
            threshold,
            mdp.discount(),
            source_bound(reward, params.temperature, mdp.num_actions()),
        )
    });
    let (q, diagnostics) = iterate_to_fixed_point(mdp, params.temperature, threshold, cap, |q| {
        soft_backup(mdp, reward, q)
    })?;
    let value = soft_values(&q);
    let policy = boltzmann_policy(&q)?;
    Ok(SoftSolution { q, value, policy, diagnostics })
}

/// Boltzmann policy of a Q-table: `log pi(a|s) = (Q(s,a) - V(s)) / alpha`.
/// Log-probabilities are the exact logits; probabilities are their
/// exponentials renormalized to machine precision.
pub fn boltzmann_policy(q: &QTable) -> Result<StochasticPolicy, SolveError> {
    if q.temperature() <= 0.0 {
        return Err(SolveError::Argument(
            "Boltzmann extraction requires temperature > 0; use greedy_policy for the hard limit"
                .into(),
        ));
    }
    let mut probs = Vec::with_capacity(q.values().len());
    let mut log_probs = Vec::with_capacity(q.values().len());
    for state in 0..q.num_states() {
        let v = soft_value(q, state);
        let row_start = probs.len();
        for action in 0..q.num_actions() {
            let logit = (q.value(state, action) - v) / q.temperature();
            log_probs.push(logit);
            probs.push(logit.exp());
        }
        let row = &mut probs[row_start..];
        let total: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= total;
        }
        patch_row_sum(row);
    }
    Ok(StochasticPolicy::from_parts(q.num_states(), q.num_actions(), probs, log_probs))
}

/// Greedy one-hot policy; ties broken by the lowest action index.
pub fn greedy_policy(q: &QTable) -> StochasticPolicy {
    let mut probs = vec![0.0; q.values().len()];
    let mut log_probs = vec![f64::NEG_INFINITY; q.values().len()];
    for state in 0..q.num_states() {
        let row = q.row(state);
        let mut best = 0;
        for (action, &value) in row.iter().enumerate() {
            if value > row[best] {
                best = action;
            }
        }
        probs[state * q.num_actions() + best] = 1.0;
        log_probs[state * q.num_actions() + best] = 0.0;
    }
    StochasticPolicy::from_parts(q.num_states(), q.num_actions(), probs, log_probs)
}

/// Fixed point of the soft policy-evaluation operator
/// `Q(s,a) <- r(s,a) + gamma * E_{s'} sum_{a'} pi(a'|s') (Q(s',a') - alpha * log pi(a'|s'))`.
/// Zero-probability actions contribute nothing (`0 * log 0 = 0`).
pub fn soft_policy_evaluation(
    mdp: &FiniteMdp,
    reward: &RewardTable,
    policy: &StochasticPolicy,
    params: &SoftSolveParams,
) -> Result<(QTable, SolveDiagnostics), SolveError> {
    check_common(mdp, reward, params.temperature, params.tol)?;
    if policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions() {
        return Err(SolveError::Argument("policy shape does not match mdp".into()));
    }
    let threshold = internal_threshold(params.tol, mdp.discount());
    let cap = params.max_iter.unwrap_or_else(|| {
        sufficient_iterations(
            threshold,
            mdp.discount(),
            source_bound(reward, params.temperature, mdp.num_actions()),
        )
    });
    let alpha = params.temperature;
    iterate_to_fixed_point(mdp, alpha, threshold, cap, |q| {
        let mut state_values = Vec::with_capacity(mdp.num_states());
        for state in 0..mdp.num_states() {
            let mut w = 0.0;
            for action in 0..mdp.num_actions() {
                let p = policy.prob(state, action);
                if p != 0.0 {
                    w += p * (q.value(state, action) - alpha * policy.log_prob(state, action));
                }
            }
            state_values.push(w);
        }
        backup_with_state_values(mdp, reward, &state_values, alpha)
    })
}

/// Semi-gradient descent on the squared soft Bellman residual with the
/// backup target frozen per sweep: `Q <- Q + step * (T(Q) - Q)`. Returns once
/// the true residual `||Q - T(Q)||` drops to `tol`; reports divergence when
/// the residual grows for 50 consecutive sweeps.
pub fn residual_descent_solve(
    mdp: &FiniteMdp,
    reward: &RewardTable,
    params: &DescentParams,
) -> Result<(QTable, SolveDiagnostics), SolveError> {
    check_common(mdp, reward, params.temperature, params.tol)?;
    if !(params.step.is_finite() && params.step > 0.0) {
        return Err(SolveError::Argument(format!("step {} must be finite and > 0", params.step)));
    }
    let gamma = mdp.discount();
    // Contraction factor of the relaxed iteration, when it contracts at all.
    let rate = (1.0 - params.step).abs() + params.step * gamma;
    let cap = params.max_iter.unwrap_or_else(|| {
        if rate < 1.0 {
            sufficient_iterations(
                params.tol,
                rate,
                source_bound(reward, params.temperature, mdp.num_actions()),
            )
        } else {
            200_000
        }
    });
    let mut q = QTable::zeros(mdp.num_states(), mdp.num_actions(), params.temperature);
    let mut target = soft_backup(mdp, reward, &q);
    let mut trace = Vec::new();
    let mut previous = f64::INFINITY;
    let mut growth_streak = 0;
    for iteration in 1..=cap {
        for (value, t) in q.values.iter_mut().zip(target.values()) {
            *value += params.step * (t - *value);
        }
        target = soft_backup(mdp, reward, &q);
        let residual = sup_diff(q.values(), target.values());
        trace.push(residual);
        let diagnostics = || SolveDiagnostics {
            iterations: iteration,
            final_residual: residual,
            contraction_trace: trace.clone(),
        };
        if residual <= params.tol {
            return Ok((q, diagnostics()));
        }
        if !residual.is_finite() {
            return Err(SolveError::Divergence { diagnostics: diagnostics() });
        }
        if residual > previous {
            growth_streak += 1;
            if growth_streak >= 50 {
                return Err(SolveError::Divergence { diagnostics: diagnostics() });
            }
        } else {
            growth_streak = 0;
        }
        previous = residual;
    }
    let final_residual = trace.last().copied().unwrap_or(0.0);
    Err(SolveError::NonConvergence {
        diagnostics: SolveDiagnostics { iterations: cap, final_residual, contraction_trace: trace },
    })
}

/// Standard value iteration (`V(s) = max_a Q(s,a)`) with a deterministic
/// greedy policy, the temperature-zero limit of the soft solver.
pub fn hard_max_solve(
    mdp: &FiniteMdp,
    reward: &RewardTable,
    tol: f64,
) -> Result<HardSolution, SolveError> {
    if !reward.matches_shape(mdp) {
        return Err(SolveError::Argument("reward shape does not match mdp".into()));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(SolveError::Argument(format!("tol {tol} must be finite and > 0")));
    }
    let threshold = internal_threshold(tol, mdp.discount());
    let cap = sufficient_iterations(threshold, mdp.discount(), reward.bound());
    let (q, diagnostics) =
        iterate_to_fixed_point(mdp, 0.0, threshold, cap, |q| soft_backup(mdp, reward, q))?;
    let value = soft_values(&q);
    let policy = greedy_policy(&q);
    Ok(HardSolution { q, value, policy, diagnostics })
}
