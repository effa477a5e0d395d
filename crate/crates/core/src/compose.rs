//! Additive composition of soft Q-functions and numerical certification of
//! the resulting sub-optimality bounds.
//!
//! A compound task averages constituent rewards; its Q-function is
//! approximated by the mean of the constituent optimal soft Q-functions, and
//! the Boltzmann policy of that mean is the composed policy. Two adversarial
//! Bellman-style recursions quantify how far the approximation can be from
//! the directly solved compound optimum: `C*` bounds the gap of the averaged
//! Q itself, `D*` bounds the loss of actually following the composed policy.

use crate::mdp::{FiniteMdp, RewardTable, TaskSet};
use crate::solver::{
    boltzmann_policy, effective_threshold, internal_threshold, soft_policy_evaluation, soft_values,
    solve_soft_q, sufficient_iterations, sup_diff, QTable, SoftSolution, SoftSolveParams,
    SolveError, StochasticPolicy,
};
use thiserror::Error;

/// Coefficient on the divergence inside the `C` recursion. The halved form
/// is what the bound's induction actually establishes; the unit-coefficient
/// variant is selectable because the two conventions coexist upstream.
pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 0.5;

/// Saturating stand-in for an infinite divergence. Finite so that matrices
/// stay NaN-free under arithmetic; anything at or above it is treated as
/// infinite by consumers.
pub const INFINITE_DIVERGENCE_SENTINEL: f64 = 1e300;

/// A certificate is valid when every slack is at least this negative;
/// roughly four orders above the default fixed-point tolerance to absorb
/// accumulated iteration error.
pub const SLACK_TOLERANCE: f64 = -1e-6;

/// Probability rows fed to the divergence must sum to 1 within this.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("inner solve failed: {0}")]
    Solve(#[from] SolveError),
}

/// A dense `(state, action)` matrix of reals; the shape shared by `C*`,
/// `D*`, and the slack fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SaMatrix {
    num_states: usize,
    num_actions: usize,
    /// Flat `[state][action]`.
    values: Vec<f64>,
}

impl SaMatrix {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        SaMatrix { num_states, num_actions, values: vec![0.0; num_states * num_actions] }
    }

    pub fn filled(num_states: usize, num_actions: usize, value: f64) -> Self {
        SaMatrix { num_states, num_actions, values: vec![value; num_states * num_actions] }
    }

    pub fn from_values(num_states: usize, num_actions: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), num_states * num_actions, "matrix shape mismatch");
        SaMatrix { num_states, num_actions, values }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
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

    pub fn max_over_actions(&self, state: usize) -> f64 {
        self.row(state).iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |acc, v| acc.min(*v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v))
    }
}

/// Renyi divergence of order 1/2:
/// `D(p || q) = -2 ln sum_a sqrt(p_a * q_a)`. Symmetric, non-negative,
/// `+inf` when the supports are disjoint. Both inputs must be probability
/// vectors summing to 1 within [`PROBABILITY_SUM_TOLERANCE`].
pub fn renyi_half(p: &[f64], q: &[f64]) -> Result<f64, ComposeError> {
    if p.len() != q.len() {
        return Err(ComposeError::Argument(format!("length mismatch: {} vs {}", p.len(), q.len())));
    }
    for (name, row) in [("first", p), ("second", q)] {
        if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(ComposeError::Argument(format!(
                "{name} argument has a negative or non-finite entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(ComposeError::Argument(format!(
                "{name} argument sums to {sum}, expected 1"
            )));
        }
    }
    let coefficient: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    if coefficient <= 0.0 {
        return Ok(f64::INFINITY);
    }
    // Rounding can push the coefficient a hair above 1 for (near-)identical
    // inputs; the divergence is non-negative by definition.
    Ok((-2.0 * coefficient.ln()).max(0.0))
}

/// A compound task built from a subset of constituents: the averaged reward,
/// the averaged optimal soft Q, and the Boltzmann policy of that average.
#[derive(Debug, Clone)]
pub struct ComposedTask {
    pub subset: Vec<usize>,
    pub compound_reward: RewardTable,
    pub q_sigma: QTable,
    pub pi_sigma: StochasticPolicy,
}

/// Averages the selected rewards and constituent optimal Q-tables entrywise
/// and extracts the Boltzmann policy of the averaged Q. All constituents must
/// be solved at one temperature on the shared dynamics. Pure bookkeeping: no
/// further solves happen here.
pub fn compose(
    mdp: &FiniteMdp,
    tasks: &TaskSet,
    subset: &[usize],
    constituent_solutions: &[&SoftSolution],
) -> Result<ComposedTask, ComposeError> {
    if subset.is_empty() {
        return Err(ComposeError::Argument("subset must be non-empty".into()));
    }
    if constituent_solutions.len() != subset.len() {
        return Err(ComposeError::Argument(format!(
            "{} solutions supplied for a subset of {}",
            constituent_solutions.len(),
            subset.len()
        )));
    }
    for &index in subset {
        if index >= tasks.len() {
            return Err(ComposeError::Argument(format!(
                "task index {index} out of range for {} tasks",
                tasks.len()
            )));
        }
    }
    let temperature = constituent_solutions[0].q.temperature();
    if temperature <= 0.0 {
        return Err(ComposeError::Argument("composition requires temperature > 0".into()));
    }
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    for solution in constituent_solutions {
        if solution.q.num_states() != s || solution.q.num_actions() != a {
            return Err(ComposeError::Argument("solution shape does not match mdp".into()));
        }
        if solution.q.temperature() != temperature {
            return Err(ComposeError::Argument(format!(
                "mismatched temperatures: {} vs {}",
                solution.q.temperature(),
                temperature
            )));
        }
    }
    let count = subset.len() as f64;
    let mut reward_values = vec![0.0; s * a];
    let mut declared_bound = 0.0;
    for &index in subset {
        let reward = tasks.reward(index);
        if !reward.matches_shape(mdp) {
            return Err(ComposeError::Argument(format!(
                "task {index} reward shape does not match mdp"
            )));
        }
        for (acc, value) in reward_values.iter_mut().zip(reward.values()) {
            *acc += value;
        }
        declared_bound += reward.bound();
    }
    let mut realized_bound = 0.0_f64;
    for value in reward_values.iter_mut() {
        *value /= count;
        realized_bound = realized_bound.max(value.abs());
    }
    // The averaged bound can undershoot the realized maximum by a rounding
    // step; take whichever is larger.
    let bound = (declared_bound / count).max(realized_bound);
    let compound_reward = RewardTable::new(s, a, reward_values, bound)
        .map_err(|e| ComposeError::Argument(e.to_string()))?;

    let mut q_values = vec![0.0; s * a];
    for solution in constituent_solutions {
        for (acc, value) in q_values.iter_mut().zip(solution.q.values()) {
            *acc += value;
        }
    }
    for value in q_values.iter_mut() {
        *value /= count;
    }
    let q_sigma = QTable::from_values(s, a, temperature, q_values)?;
    let pi_sigma = boltzmann_policy(&q_sigma)?;
    Ok(ComposedTask { subset: subset.to_vec(), compound_reward, q_sigma, pi_sigma })
}

/// Result of the `C` recursion: the fixed-point matrix, and whether an
/// infinite divergence forced saturation (in which case every entry is
/// [`INFINITE_DIVERGENCE_SENTINEL`] and the bound is vacuous).
#[derive(Debug, Clone)]
pub struct CStarResult {
    pub values: SaMatrix,
    pub vacuous: bool,
}

/// One sweep of the `C` recursion:
/// `C'(s,a) = gamma * sum_{s'} P(s,a,s') * (weighted_divergence[s'] + max_{a'} C(s',a'))`.
/// Exposed so callers can observe the (monotone non-decreasing) iterates.
pub fn c_star_step(mdp: &FiniteMdp, weighted_divergence: &[f64], c: &SaMatrix) -> SaMatrix {
    let gamma = mdp.discount();
    let max_c: Vec<f64> = (0..mdp.num_states()).map(|s| c.max_over_actions(s)).collect();
    let mut next = Vec::with_capacity(c.values().len());
    for state in 0..mdp.num_states() {
        for action in 0..mdp.num_actions() {
            let mut expected = 0.0;
            for (successor, &p) in mdp.transition_row(state, action).iter().enumerate() {
                if p != 0.0 {
                    expected += p * (weighted_divergence[successor] + max_c[successor]);
                }
            }
            next.push(gamma * expected);
        }
    }
    SaMatrix::from_values(mdp.num_states(), mdp.num_actions(), next)
}

/// Fixed point of the `C` recursion from `C = 0`, the constant in the lower
/// bound on the compound optimum: per-state divergences of the two
/// constituent policies are scaled by `divergence_factor` and propagated
/// through an adversarial (max over actions) discounted expectation. Any
/// state with infinite divergence saturates the whole matrix.
pub fn compute_c_star(
    mdp: &FiniteMdp,
    pi1: &StochasticPolicy,
    pi2: &StochasticPolicy,
    divergence_factor: f64,
    tol: f64,
) -> Result<CStarResult, ComposeError> {
    if !(divergence_factor.is_finite() && divergence_factor > 0.0) {
        return Err(ComposeError::Argument(format!(
            "divergence factor {divergence_factor} must be finite and > 0"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ComposeError::Argument(format!("tol {tol} must be finite and > 0")));
    }
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    for (name, pi) in [("pi1", &pi1), ("pi2", &pi2)] {
        if pi.num_states() != s || pi.num_actions() != a {
            return Err(ComposeError::Argument(format!("{name} shape does not match mdp")));
        }
    }
    let mut weighted = Vec::with_capacity(s);
    for state in 0..s {
        let divergence = renyi_half(pi1.row(state), pi2.row(state))?;
        if !divergence.is_finite() || divergence >= INFINITE_DIVERGENCE_SENTINEL {
            return Ok(CStarResult {
                values: SaMatrix::filled(s, a, INFINITE_DIVERGENCE_SENTINEL),
                vacuous: true,
            });
        }
        weighted.push(divergence_factor * divergence);
    }
    let source = weighted.iter().fold(0.0_f64, |acc, v| acc.max(*v));
    let threshold = internal_threshold(tol, mdp.discount());
    let cap = sufficient_iterations(threshold, mdp.discount(), source);
    let mut c = SaMatrix::zeros(s, a);
    for _ in 0..cap {
        let next = c_star_step(mdp, &weighted, &c);
        let residual = sup_diff(c.values(), next.values());
        c = next;
        if residual <= effective_threshold(threshold, c.values()) {
            return Ok(CStarResult { values: c, vacuous: false });
        }
    }
    Err(ComposeError::Argument(format!(
        "C recursion failed to converge within {cap} sweeps, which should be impossible"
    )))
}

/// One sweep of the `D` recursion:
/// `D'(s,a) = gamma * sum_{s'} P(s,a,s') * sum_{a'} pi(a'|s') * (C*(s',a') + D(s',a'))`.
pub fn d_star_step(
    mdp: &FiniteMdp,
    pi_sigma: &StochasticPolicy,
    c_star: &SaMatrix,
    d: &SaMatrix,
) -> SaMatrix {
    let gamma = mdp.discount();
    let mut on_policy: Vec<f64> = Vec::with_capacity(mdp.num_states());
    for state in 0..mdp.num_states() {
        let mut w = 0.0;
        for action in 0..mdp.num_actions() {
            let p = pi_sigma.prob(state, action);
            if p != 0.0 {
                w += p * (c_star.value(state, action) + d.value(state, action));
            }
        }
        on_policy.push(w);
    }
    let mut next = Vec::with_capacity(d.values().len());
    for state in 0..mdp.num_states() {
        for action in 0..mdp.num_actions() {
            let mut expected = 0.0;
            for (successor, &p) in mdp.transition_row(state, action).iter().enumerate() {
                if p != 0.0 {
                    expected += p * on_policy[successor];
                }
            }
            next.push(gamma * expected);
        }
    }
    SaMatrix::from_values(mdp.num_states(), mdp.num_actions(), next)
}

/// Fixed point of the `D` recursion from `D = 0`, the constant in the bound
/// on the value of actually following the composed policy. A saturated
/// (vacuous) `C*` propagates to a saturated `D*`.
pub fn compute_d_star(
    mdp: &FiniteMdp,
    pi_sigma: &StochasticPolicy,
    c_star: &SaMatrix,
    tol: f64,
) -> Result<SaMatrix, ComposeError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ComposeError::Argument(format!("tol {tol} must be finite and > 0")));
    }
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    if pi_sigma.num_states() != s || pi_sigma.num_actions() != a {
        return Err(ComposeError::Argument("pi_sigma shape does not match mdp".into()));
    }
    if c_star.num_states() != s || c_star.num_actions() != a {
        return Err(ComposeError::Argument("c_star shape does not match mdp".into()));
    }
    if c_star.values().iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(ComposeError::Argument("c_star entries must be finite and >= 0".into()));
    }
    if c_star.max() >= INFINITE_DIVERGENCE_SENTINEL {
        return Ok(SaMatrix::filled(s, a, INFINITE_DIVERGENCE_SENTINEL));
    }
    let threshold = internal_threshold(tol, mdp.discount());
    let cap = sufficient_iterations(threshold, mdp.discount(), c_star.max());
    let mut d = SaMatrix::zeros(s, a);
    for _ in 0..cap {
        let next = d_star_step(mdp, pi_sigma, c_star, &d);
        let residual = sup_diff(d.values(), next.values());
        d = next;
        if residual <= effective_threshold(threshold, d.values()) {
            return Ok(d);
        }
    }
    Err(ComposeError::Argument(format!(
        "D recursion failed to converge within {cap} sweeps, which should be impossible"
    )))
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub temperature: f64,
    pub tol: f64,
    pub divergence_factor: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            temperature: 1.0,
            tol: 1e-10,
            divergence_factor: DEFAULT_DIVERGENCE_FACTOR,
        }
    }
}

/// Numerical witness that the composition bounds hold on one instance.
///
/// Slack conventions (all expected `>= 0` up to [`SLACK_TOLERANCE`]):
/// - `lemma_upper_slack  = Q_sigma - Q*_C`        (averaged Q upper-bounds the compound optimum)
/// - `lemma_lower_slack  = Q*_C - (Q_sigma - C*)` (averaged Q undershoots by at most C*)
/// - `theorem_slack      = Q^{pi_sigma}_C - (Q*_C - D*)` (composed policy loses at most D*)
/// - `corollary_slack[s] = min` of the two state-value sides:
///   `V_sigma - V*_C` and `V*_C - (V_sigma - max_a C*(s,a))`.
#[derive(Debug, Clone)]
pub struct BoundCertificate {
    pub subset: (usize, usize),
    pub temperature: f64,
    pub divergence_factor: f64,
    pub c_star: SaMatrix,
    pub d_star: SaMatrix,
    pub lemma_upper_slack: SaMatrix,
    pub lemma_lower_slack: SaMatrix,
    pub theorem_slack: SaMatrix,
    pub corollary_slack: Vec<f64>,
    /// True when an infinite divergence saturated `C*`: the inequalities then
    /// hold trivially on their C/D sides and carry no information there.
    pub vacuous: bool,
}

impl BoundCertificate {
    pub fn min_lemma_upper_slack(&self) -> f64 {
        self.lemma_upper_slack.min()
    }

    pub fn min_lemma_lower_slack(&self) -> f64 {
        self.lemma_lower_slack.min()
    }

    pub fn min_theorem_slack(&self) -> f64 {
        self.theorem_slack.min()
    }

    pub fn min_corollary_slack(&self) -> f64 {
        self.corollary_slack.iter().fold(f64::INFINITY, |acc, v| acc.min(*v))
    }

    pub fn min_slack(&self) -> f64 {
        self.min_lemma_upper_slack()
            .min(self.min_lemma_lower_slack())
            .min(self.min_theorem_slack())
            .min(self.min_corollary_slack())
    }

    pub fn max_c_star(&self) -> f64 {
        self.c_star.max()
    }

    pub fn max_d_star(&self) -> f64 {
        self.d_star.max()
    }

    /// All slacks at least [`SLACK_TOLERANCE`].
    pub fn is_valid(&self) -> bool {
        self.min_slack() >= SLACK_TOLERANCE
    }
}

/// End-to-end certification of one pair of tasks: solves both constituents,
/// composes them, solves the compound task directly as ground truth,
/// evaluates the composed policy on the compound reward, computes `C*` and
/// `D*`, and fills every slack field.
pub fn certify(
    mdp: &FiniteMdp,
    tasks: &TaskSet,
    pair: (usize, usize),
    options: &CertifyOptions,
) -> Result<BoundCertificate, ComposeError> {
    let params =
        SoftSolveParams { temperature: options.temperature, tol: options.tol, max_iter: None };
    let (i, j) = pair;
    if i >= tasks.len() || j >= tasks.len() {
        return Err(ComposeError::Argument(format!(
            "pair ({i}, {j}) out of range for {} tasks",
            tasks.len()
        )));
    }
    let first = solve_soft_q(mdp, tasks.reward(i), &params)?;
    let second = solve_soft_q(mdp, tasks.reward(j), &params)?;
    let composed = compose(mdp, tasks, &[i, j], &[&first, &second])?;
    let direct = solve_soft_q(mdp, &composed.compound_reward, &params)?;
    let (evaluated, _) =
        soft_policy_evaluation(mdp, &composed.compound_reward, &composed.pi_sigma, &params)?;
    let c =
        compute_c_star(mdp, &first.policy, &second.policy, options.divergence_factor, options.tol)?;
    let d = compute_d_star(mdp, &composed.pi_sigma, &c.values, options.tol)?;

    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let n = s * a;
    let mut lemma_upper = Vec::with_capacity(n);
    let mut lemma_lower = Vec::with_capacity(n);
    let mut theorem = Vec::with_capacity(n);
    for idx in 0..n {
        let q_sigma = composed.q_sigma.values()[idx];
        let q_direct = direct.q.values()[idx];
        let q_eval = evaluated.values()[idx];
        lemma_upper.push(q_sigma - q_direct);
        lemma_lower.push(q_direct - (q_sigma - c.values.values()[idx]));
        theorem.push(q_eval - (q_direct - d.values()[idx]));
    }
    let v_sigma = soft_values(&composed.q_sigma);
    let mut corollary = Vec::with_capacity(s);
    for state in 0..s {
        let upper = v_sigma.value(state) - direct.value.value(state);
        let lower =
            direct.value.value(state) - (v_sigma.value(state) - c.values.max_over_actions(state));
        corollary.push(upper.min(lower));
    }
    Ok(BoundCertificate {
        subset: pair,
        temperature: options.temperature,
        divergence_factor: options.divergence_factor,
        c_star: c.values,
        d_star: d,
        lemma_upper_slack: SaMatrix::from_values(s, a, lemma_upper),
        lemma_lower_slack: SaMatrix::from_values(s, a, lemma_lower),
        theorem_slack: SaMatrix::from_values(s, a, theorem),
        corollary_slack: corollary,
        vacuous: c.vacuous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{random_mdp, random_reward, TaskSet};
    use crate::solver::{greedy_policy, solve_soft_q, QTable, SoftSolveParams};

    fn solved_pair(
        seed: u64,
        num_states: usize,
        num_actions: usize,
        discount: f64,
    ) -> (FiniteMdp, TaskSet, SoftSolution, SoftSolution) {
        let mdp = random_mdp(seed, num_states, num_actions, discount, 0.8).unwrap();
        let r1 = random_reward(seed + 1, &mdp, 1.0).unwrap();
        let r2 = random_reward(seed + 2, &mdp, 1.0).unwrap();
        let tasks = TaskSet::new(vec![("a".into(), r1), ("b".into(), r2)]).unwrap();
        let params = SoftSolveParams::default();
        let s1 = solve_soft_q(&mdp, tasks.reward(0), &params).unwrap();
        let s2 = solve_soft_q(&mdp, tasks.reward(1), &params).unwrap();
        (mdp, tasks, s1, s2)
    }

    #[test]
    fn divergence_of_identical_dyadic_rows_is_exactly_zero() {
        assert_eq!(renyi_half(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(renyi_half(&[0.25, 0.75], &[0.25, 0.75]).unwrap(), 0.0);
    }

    #[test]
    fn divergence_of_point_mass_against_uniform_is_ln_two() {
        let d = renyi_half(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn divergence_is_symmetric() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let q = [0.4, 0.3, 0.2, 0.1];
        let forward = renyi_half(&p, &q).unwrap();
        let backward = renyi_half(&q, &p).unwrap();
        assert!((forward - backward).abs() < 1e-12);
        assert!(forward > 0.0);
    }

    #[test]
    fn divergence_of_disjoint_supports_is_infinite() {
        assert_eq!(renyi_half(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn divergence_rejects_bad_inputs() {
        assert!(renyi_half(&[0.5, 0.4], &[0.5, 0.5]).is_err());
        assert!(renyi_half(&[1.5, -0.5], &[0.5, 0.5]).is_err());
        assert!(renyi_half(&[1.0], &[0.5, 0.5]).is_err());
        assert!(renyi_half(&[f64::NAN, 1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn singleton_composition_is_the_constituent() {
        let (mdp, tasks, s1, _) = solved_pair(100, 5, 3, 0.9);
        let composed = compose(&mdp, &tasks, &[0], &[&s1]).unwrap();
        assert_eq!(composed.q_sigma.values(), s1.q.values());
        assert_eq!(composed.pi_sigma.probs(), s1.policy.probs());
        assert_eq!(composed.compound_reward.values(), tasks.reward(0).values());
    }

    #[test]
    fn composing_identical_tasks_is_idempotent() {
        let mdp = random_mdp(110, 4, 2, 0.9, 1.0).unwrap();
        let r = random_reward(111, &mdp, 1.0).unwrap();
        let tasks = TaskSet::new(vec![("x".into(), r.clone()), ("y".into(), r)]).unwrap();
        let params = SoftSolveParams::default();
        let s1 = solve_soft_q(&mdp, tasks.reward(0), &params).unwrap();
        let s2 = solve_soft_q(&mdp, tasks.reward(1), &params).unwrap();
        let composed = compose(&mdp, &tasks, &[0, 1], &[&s1, &s2]).unwrap();
        // (x + x) / 2 is exact in binary arithmetic.
        assert_eq!(composed.q_sigma.values(), s1.q.values());
        assert_eq!(composed.compound_reward.values(), tasks.reward(0).values());
    }

    #[test]
    fn compound_reward_is_the_entrywise_mean() {
        let (mdp, tasks, s1, s2) = solved_pair(120, 6, 3, 0.9);
        let composed = compose(&mdp, &tasks, &[0, 1], &[&s1, &s2]).unwrap();
        for idx in 0..18 {
            let want = (tasks.reward(0).values()[idx] + tasks.reward(1).values()[idx]) / 2.0;
            assert!((composed.compound_reward.values()[idx] - want).abs() <= 1e-12);
            let want_q = (s1.q.values()[idx] + s2.q.values()[idx]) / 2.0;
            assert!((composed.q_sigma.values()[idx] - want_q).abs() <= 1e-12);
        }
    }

    #[test]
    fn compose_rejects_mismatched_temperatures() {
        let (mdp, tasks, s1, _) = solved_pair(130, 4, 2, 0.9);
        let hot = solve_soft_q(
            &mdp,
            tasks.reward(1),
            &SoftSolveParams { temperature: 2.0, tol: 1e-10, max_iter: None },
        )
        .unwrap();
        assert!(matches!(
            compose(&mdp, &tasks, &[0, 1], &[&s1, &hot]),
            Err(ComposeError::Argument(_))
        ));
        assert!(compose(&mdp, &tasks, &[], &[]).is_err());
        assert!(compose(&mdp, &tasks, &[0, 7], &[&s1, &s1]).is_err());
    }

    #[test]
    fn c_star_vanishes_for_identical_policies() {
        let (mdp, _, s1, _) = solved_pair(140, 5, 3, 0.9);
        let c = compute_c_star(&mdp, &s1.policy, &s1.policy, 0.5, 1e-10).unwrap();
        assert!(!c.vacuous);
        assert!(c.values.max() <= 1e-12);
    }

    #[test]
    fn c_star_vanishes_at_zero_discount() {
        let (mdp, _, s1, s2) = solved_pair(150, 4, 2, 0.0);
        let c = compute_c_star(&mdp, &s1.policy, &s2.policy, 0.5, 1e-10).unwrap();
        assert_eq!(c.values.max(), 0.0);
    }

    #[test]
    fn c_star_iterates_are_monotone_non_decreasing() {
        let (mdp, _, s1, s2) = solved_pair(160, 5, 3, 0.9);
        let weighted: Vec<f64> =
            (0..5).map(|s| 0.5 * renyi_half(s1.policy.row(s), s2.policy.row(s)).unwrap()).collect();
        let mut c = SaMatrix::zeros(5, 3);
        for _ in 0..60 {
            let next = c_star_step(&mdp, &weighted, &c);
            for (new, old) in next.values().iter().zip(c.values()) {
                assert!(new >= old);
            }
            c = next;
        }
    }

    #[test]
    fn c_star_scales_linearly_in_the_divergence_factor() {
        let (mdp, _, s1, s2) = solved_pair(170, 5, 3, 0.9);
        let half = compute_c_star(&mdp, &s1.policy, &s2.policy, 0.5, 1e-12).unwrap();
        let unit = compute_c_star(&mdp, &s1.policy, &s2.policy, 1.0, 1e-12).unwrap();
        for (u, h) in unit.values.values().iter().zip(half.values.values()) {
            assert!((u - 2.0 * h).abs() <= 1e-9);
            assert!(u >= h);
        }
    }

    #[test]
    fn disjoint_greedy_policies_saturate_c_star() {
        let mdp = random_mdp(180, 3, 2, 0.9, 1.0).unwrap();
        let q1 = QTable::from_values(3, 2, 0.0, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let q2 = QTable::from_values(3, 2, 0.0, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let c = compute_c_star(&mdp, &greedy_policy(&q1), &greedy_policy(&q2), 0.5, 1e-10).unwrap();
        assert!(c.vacuous);
        assert!(c.values.values().iter().all(|v| *v == INFINITE_DIVERGENCE_SENTINEL));
        let d = compute_d_star(&mdp, &greedy_policy(&q1), &c.values, 1e-10).unwrap();
        assert!(d.values().iter().all(|v| *v == INFINITE_DIVERGENCE_SENTINEL));
    }

    #[test]
    fn d_star_vanishes_for_zero_c() {
        let (mdp, _, s1, _) = solved_pair(190, 4, 3, 0.9);
        let zero = SaMatrix::zeros(4, 3);
        let d = compute_d_star(&mdp, &s1.policy, &zero, 1e-10).unwrap();
        assert_eq!(d.max(), 0.0);
    }

    #[test]
    fn certifying_identical_tasks_collapses_to_equality() {
        let mdp = random_mdp(200, 5, 3, 0.9, 0.9).unwrap();
        let r = random_reward(201, &mdp, 1.0).unwrap();
        let tasks = TaskSet::new(vec![("x".into(), r.clone()), ("y".into(), r)]).unwrap();
        let certificate = certify(&mdp, &tasks, (0, 1), &CertifyOptions::default()).unwrap();
        assert!(!certificate.vacuous);
        assert!(certificate.max_c_star() <= 1e-8);
        assert!(certificate.max_d_star() <= 1e-8);
        assert!(certificate.min_slack() >= -1e-8);
        assert!(certificate.lemma_upper_slack.max() <= 1e-8);
        assert!(certificate.is_valid());
    }

    #[test]
    fn certifying_at_zero_discount_collapses_to_equality() {
        let mdp = random_mdp(210, 4, 2, 0.0, 1.0).unwrap();
        let r1 = random_reward(211, &mdp, 1.0).unwrap();
        let r2 = random_reward(212, &mdp, 1.0).unwrap();
        let tasks = TaskSet::new(vec![("a".into(), r1), ("b".into(), r2)]).unwrap();
        let certificate = certify(&mdp, &tasks, (0, 1), &CertifyOptions::default()).unwrap();
        assert!(certificate.max_c_star() <= 1e-12);
        assert!(certificate.min_slack() >= -1e-12);
        assert!(certificate.lemma_upper_slack.max() <= 1e-12);
    }

    #[test]
    fn random_instance_certificate_is_valid() {
        let mdp = random_mdp(220, 6, 3, 0.9, 0.7).unwrap();
        let r1 = random_reward(221, &mdp, 1.0).unwrap();
        let r2 = random_reward(222, &mdp, 1.0).unwrap();
        let tasks = TaskSet::new(vec![("a".into(), r1), ("b".into(), r2)]).unwrap();
        let certificate = certify(&mdp, &tasks, (0, 1), &CertifyOptions::default()).unwrap();
        assert!(!certificate.vacuous);
        assert!(certificate.is_valid(), "min slack {}", certificate.min_slack());
        assert!(certificate.c_star.min() >= 0.0);
        assert!(certificate.d_star.min() >= 0.0);
        // The composed policy is genuinely suboptimal here, so the bound is
        // informative but not tight.
        assert!(certificate.max_c_star() > 1e-6);
    }

    #[test]
    fn certify_rejects_out_of_range_pairs() {
        let mdp = random_mdp(230, 3, 2, 0.9, 1.0).unwrap();
        let r = random_reward(231, &mdp, 1.0).unwrap();
        let tasks = TaskSet::new(vec![("only".into(), r)]).unwrap();
        assert!(matches!(
            certify(&mdp, &tasks, (0, 1), &CertifyOptions::default()),
            Err(ComposeError::Argument(_))
        ));
    }
}
