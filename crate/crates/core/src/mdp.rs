//! Finite MDP data types, validation, and seeded random instance generation.
//!
//! Transition tensors are stored flat in row-major `[state][action][next]`
//! order. All probability rows are validated to sum to 1 within `1e-12`;
//! values never hold NaN or infinities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Tolerance for transition row normalization checks.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A single validation failure, locating the offending entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyStates,
    EmptyActions,
    /// `transition` has the wrong length for the declared shape.
    TransitionShape {
        expected: usize,
        actual: usize,
    },
    /// `terminal` flag vector has the wrong length.
    TerminalShape {
        expected: usize,
        actual: usize,
    },
    NonFiniteProbability {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    NegativeProbability {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    DiscountOutOfRange {
        discount: f64,
    },
    /// A state flagged terminal must self-loop with probability 1.
    TerminalNotAbsorbing {
        state: usize,
        action: usize,
    },
    RewardShape {
        expected: usize,
        actual: usize,
    },
    NonFiniteReward {
        state: usize,
        action: usize,
        value: f64,
    },
    RewardBoundExceeded {
        state: usize,
        action: usize,
        value: f64,
        bound: f64,
    },
    BadRewardBound {
        bound: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::EmptyStates => write!(f, "state space is empty"),
            Violation::EmptyActions => write!(f, "action space is empty"),
            Violation::TransitionShape { expected, actual } => {
                write!(f, "transition tensor has {actual} entries, expected {expected}")
            }
            Violation::TerminalShape { expected, actual } => {
                write!(f, "terminal flags have {actual} entries, expected {expected}")
            }
            Violation::NonFiniteProbability { state, action, next, value } => {
                write!(f, "P(s={state}, a={action}, s'={next}) = {value} is not finite")
            }
            Violation::NegativeProbability { state, action, next, value } => {
                write!(f, "P(s={state}, a={action}, s'={next}) = {value} is negative")
            }
            Violation::RowSum { state, action, sum } => {
                write!(f, "transition row (s={state}, a={action}) sums to {sum}, expected 1")
            }
            Violation::DiscountOutOfRange { discount } => {
                write!(f, "discount {discount} outside [0, 1)")
            }
            Violation::TerminalNotAbsorbing { state, action } => {
                write!(f, "terminal state {state} is not absorbing under action {action}")
            }
            Violation::RewardShape { expected, actual } => {
                write!(f, "reward table has {actual} entries, expected {expected}")
            }
            Violation::NonFiniteReward { state, action, value } => {
                write!(f, "r(s={state}, a={action}) = {value} is not finite")
            }
            Violation::RewardBoundExceeded { state, action, value, bound } => {
                write!(f, "r(s={state}, a={action}) = {value} exceeds declared bound {bound}")
            }
            Violation::BadRewardBound { bound } => {
                write!(f, "reward bound {bound} is not a finite non-negative value")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid model: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid argument: {0}")]
    Argument(String),
}

fn format_violations(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// A finite MDP: states `0..num_states`, actions `0..num_actions`, a dense
/// transition tensor, and a discount in `[0, 1)`. Rewards live in separate
/// [`RewardTable`] values so many tasks can share one dynamics model.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    num_states: usize,
    num_actions: usize,
    /// Flat `[state][action][next]`, length `num_states^2 * num_actions`.
    transition: Vec<f64>,
    discount: f64,
    terminal: Option<Vec<bool>>,
}

impl FiniteMdp {
    /// Builds a validated MDP. Returns every violation found, not just the
    /// first.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        discount: f64,
        terminal: Option<Vec<bool>>,
    ) -> Result<Self, MdpError> {
        let mdp = Self::from_raw_parts(num_states, num_actions, transition, discount, terminal);
        let violations = validate_mdp(&mdp);
        if violations.is_empty() {
            Ok(mdp)
        } else {
            Err(MdpError::Invalid(violations))
        }
    }

    /// Assembles the value without validation, for diagnostic flows that need
    /// to hold a broken candidate (file loading, validation reporting).
    /// Anything downstream assumes [`validate_mdp`] is clean; prefer
    /// [`FiniteMdp::new`].
    pub fn from_raw_parts(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        discount: f64,
        terminal: Option<Vec<bool>>,
    ) -> Self {
        FiniteMdp { num_states, num_actions, transition, discount, terminal }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn probability(&self, state: usize, action: usize, next: usize) -> f64 {
        self.transition[(state * self.num_actions + action) * self.num_states + next]
    }

    /// The probability row `P(state, action, ·)` as a slice of length
    /// `num_states`.
    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        let base = (state * self.num_actions + action) * self.num_states;
        &self.transition[base..base + self.num_states]
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal.as_ref().is_some_and(|t| t[state])
    }

    pub fn terminal(&self) -> Option<&[bool]> {
        self.terminal.as_deref()
    }
}

/// Checks shape, row normalization, discount range, and absorbing terminal
/// states. Returns an empty list iff the model is valid.
pub fn validate_mdp(mdp: &FiniteMdp) -> Vec<Violation> {
    let mut violations = Vec::new();
    let (s, a) = (mdp.num_states, mdp.num_actions);
    if s == 0 {
        violations.push(Violation::EmptyStates);
    }
    if a == 0 {
        violations.push(Violation::EmptyActions);
    }
    if !(mdp.discount >= 0.0 && mdp.discount < 1.0) {
        violations.push(Violation::DiscountOutOfRange { discount: mdp.discount });
    }
    let expected = s * a * s;
    if mdp.transition.len() != expected {
        violations.push(Violation::TransitionShape { expected, actual: mdp.transition.len() });
        return violations;
    }
    if let Some(t) = &mdp.terminal {
        if t.len() != s {
            violations.push(Violation::TerminalShape { expected: s, actual: t.len() });
            return violations;
        }
    }
    for state in 0..s {
        for action in 0..a {
            let row = mdp.transition_row(state, action);
            let mut sum = 0.0;
            for (next, &p) in row.iter().enumerate() {
                if !p.is_finite() {
                    violations.push(Violation::NonFiniteProbability {
                        state,
                        action,
                        next,
                        value: p,
                    });
                } else if p < 0.0 {
                    violations.push(Violation::NegativeProbability {
                        state,
                        action,
                        next,
                        value: p,
                    });
                }
                sum += p;
            }
            if !(sum.is_finite() && (sum - 1.0).abs() <= ROW_SUM_TOLERANCE) {
                violations.push(Violation::RowSum { state, action, sum });
            }
            if mdp.is_terminal(state) && (row[state] - 1.0).abs() > ROW_SUM_TOLERANCE {
                violations.push(Violation::TerminalNotAbsorbing { state, action });
            }
        }
    }
    violations
}

/// Per-task rewards over the `(state, action)` grid, with a declared bound
/// `B` such that `|r| <= B` everywhere. The bound feeds horizon and
/// iteration-count derivations downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    num_states: usize,
    num_actions: usize,
    /// Flat `[state][action]`.
    values: Vec<f64>,
    bound: f64,
}

impl RewardTable {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        values: Vec<f64>,
        bound: f64,
    ) -> Result<Self, MdpError> {
        let mut violations = Vec::new();
        if !(bound.is_finite() && bound >= 0.0) {
            violations.push(Violation::BadRewardBound { bound });
        }
        if values.len() != num_states * num_actions {
            violations.push(Violation::RewardShape {
                expected: num_states * num_actions,
                actual: values.len(),
            });
        } else {
            for state in 0..num_states {
                for action in 0..num_actions {
                    let value = values[state * num_actions + action];
                    if !value.is_finite() {
                        violations.push(Violation::NonFiniteReward { state, action, value });
                    } else if bound.is_finite() && value.abs() > bound {
                        violations.push(Violation::RewardBoundExceeded {
                            state,
                            action,
                            value,
                            bound,
                        });
                    }
                }
            }
        }
        if violations.is_empty() {
            Ok(RewardTable { num_states, num_actions, values, bound })
        } else {
            Err(MdpError::Invalid(violations))
        }
    }

    /// Builds the table with `bound` set to the largest absolute entry.
    pub fn with_inferred_bound(
        num_states: usize,
        num_actions: usize,
        values: Vec<f64>,
    ) -> Result<Self, MdpError> {
        let bound = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        Self::new(num_states, num_actions, values, bound)
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

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn matches_shape(&self, mdp: &FiniteMdp) -> bool {
        self.num_states == mdp.num_states() && self.num_actions == mdp.num_actions()
    }
}

/// A labeled collection of reward tables sharing one shape. Holds at least
/// one task.
#[derive(Debug, Clone)]
pub struct TaskSet {
    labels: Vec<String>,
    rewards: Vec<RewardTable>,
}

impl TaskSet {
    pub fn new(tasks: Vec<(String, RewardTable)>) -> Result<Self, MdpError> {
        if tasks.is_empty() {
            return Err(MdpError::Argument("task set must hold at least one task".into()));
        }
        let (s, a) = (tasks[0].1.num_states(), tasks[0].1.num_actions());
        for (label, reward) in &tasks {
            if reward.num_states() != s || reward.num_actions() != a {
                return Err(MdpError::Argument(format!(
                    "task '{label}' has shape {}x{}, expected {s}x{a}",
                    reward.num_states(),
                    reward.num_actions()
                )));
            }
        }
        let (labels, rewards) = tasks.into_iter().unzip();
        Ok(TaskSet { labels, rewards })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn reward(&self, index: usize) -> &RewardTable {
        &self.rewards[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RewardTable)> {
        self.labels.iter().map(String::as_str).zip(self.rewards.iter())
    }
}

/// Samples a random valid MDP. Each transition row keeps a successor with
/// probability `sparsity` (at least one is always forced), draws weights
/// uniformly from `(0, 1]`, and normalizes. The largest entry absorbs the
/// rounding remainder so the row sums to 1 at working precision. The same
/// seed reproduces the instance bit for bit.
pub fn random_mdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    discount: f64,
    sparsity: f64,
) -> Result<FiniteMdp, MdpError> {
    if num_states == 0 || num_actions == 0 {
        return Err(MdpError::Argument("num_states and num_actions must be positive".into()));
    }
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(MdpError::Argument(format!("sparsity {sparsity} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = Vec::with_capacity(num_states * num_actions * num_states);
    for _state in 0..num_states {
        for _action in 0..num_actions {
            let mut row = vec![0.0; num_states];
            let mut any = false;
            for entry in row.iter_mut() {
                let keep = rng.gen::<f64>() < sparsity;
                // Draw the weight unconditionally so the stream layout does
                // not depend on the inclusion outcomes.
                let weight = 1.0 - rng.gen::<f64>();
                if keep {
                    *entry = weight;
                    any = true;
                }
            }
            if !any {
                let idx = rng.gen_range(0..num_states);
                row[idx] = 1.0;
            }
            normalize_row(&mut row);
            transition.extend_from_slice(&row);
        }
    }
    FiniteMdp::new(num_states, num_actions, transition, discount, None)
}

/// Divides by the row sum, then folds the residual into the largest entry so
/// the final sum is 1 up to the last bit.
pub(crate) fn normalize_row(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    for entry in row.iter_mut() {
        *entry /= total;
    }
    let sum: f64 = row.iter().sum();
    let largest = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
    row[largest] += 1.0 - sum;
}

/// Samples rewards uniformly from `[-bound, bound]`, deterministically in the
/// seed.
pub fn random_reward(seed: u64, mdp: &FiniteMdp, bound: f64) -> Result<RewardTable, MdpError> {
    if !(bound.is_finite() && bound >= 0.0) {
        return Err(MdpError::Argument(format!("reward bound {bound} must be finite and >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..mdp.num_states() * mdp.num_actions())
        .map(|_| bound * (2.0 * rng.gen::<f64>() - 1.0))
        .collect();
    RewardTable::new(mdp.num_states(), mdp.num_actions(), values, bound)
}
