//! Independent-oracle agreement checks: every production quantity with a
//! closed-form or brute-force counterpart is compared against it on seeded
//! instances. The oracles share only data types with the solver, never its
//! iteration code, so agreement here is evidence rather than tautology.

use softq::compose::{certify, compose, compute_c_star, compute_d_star, CertifyOptions};
use softq::mdp::{random_mdp, random_reward, FiniteMdp, RewardTable, TaskSet};
use softq::oracle::{
    exhaustive_tiny_certificate, finite_horizon_c_recursion, finite_horizon_d_recursion,
    finite_horizon_soft_q, linear_solve_policy_eval, HorizonConfig,
};
use softq::solver::{soft_policy_evaluation, solve_soft_q, SoftSolveParams};

const GAMMAS: [f64; 3] = [0.5, 0.9, 0.95];

fn instance(seed: u64, states: usize, actions: usize, discount: f64) -> (FiniteMdp, RewardTable) {
    let mdp = random_mdp(seed, states, actions, discount, 0.9).unwrap();
    let reward = random_reward(seed ^ 0x5EED, &mdp, 1.0).unwrap();
    (mdp, reward)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch in comparison");
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// The infinite-horizon solution must agree with an exact finite-horizon
/// unroll (extended-precision, no tolerance-based stopping) once the horizon
/// is long enough that both sit within `tol` of the true fixed point.
#[test]
fn solver_matches_finite_horizon_unroll() {
    let tol = 1e-10;
    let mut worst = 0.0_f64;
    for seed in 0..12u64 {
        let gamma = GAMMAS[(seed % 3) as usize];
        let states = 3 + (seed % 4) as usize;
        let actions = 2 + (seed % 2) as usize;
        let (mdp, reward) = instance(seed, states, actions, gamma);
        let params = SoftSolveParams { temperature: 1.0, tol, max_iter: None };
        let solution = solve_soft_q(&mdp, &reward, &params).unwrap();
        let payoff_bound = reward.bound() + (actions as f64).ln();
        let horizon = HorizonConfig::for_tolerance(tol, gamma, payoff_bound).unwrap().horizon;
        let oracle_q = finite_horizon_soft_q(&mdp, &reward, 1.0, horizon).unwrap();
        let gap = max_abs_diff(solution.q.values(), oracle_q.values());
        assert!(
            gap <= 2.0 * tol,
            "seed {seed}: solver vs finite-horizon unroll gap {gap:.3e} > {:.3e}",
            2.0 * tol
        );
        worst = worst.max(gap);
    }
    assert!(worst > 0.0, "gap identically zero across all seeds is suspicious");
}

/// Iterative on-policy evaluation must agree with a dense linear solve of the
/// same fixed-point equation (Gaussian elimination, no iteration).
#[test]
fn policy_evaluation_matches_dense_linear_solve() {
    let tol = 1e-10;
    for seed in 0..10u64 {
        let gamma = GAMMAS[(seed % 3) as usize];
        let states = 3 + (seed % 4) as usize;
        let actions = 2 + (seed % 3) as usize;
        let (mdp, reward_a) = instance(seed, states, actions, gamma);
        let reward_b = random_reward(seed ^ 0xB0B0, &mdp, 1.0).unwrap();
        // Evaluate task A's optimal policy under task B's reward so the
        // check covers genuinely off-policy evaluation, not just V*.
        let params = SoftSolveParams { temperature: 1.0, tol, max_iter: None };
        let policy = solve_soft_q(&mdp, &reward_a, &params).unwrap().policy;
        let (iterative, _) = soft_policy_evaluation(&mdp, &reward_b, &policy, &params).unwrap();
        let dense = linear_solve_policy_eval(&mdp, &reward_b, &policy, 1.0).unwrap();
        let gap = max_abs_diff(iterative.values(), dense.values());
        assert!(
            gap <= 10.0 * tol,
            "seed {seed}: iterative vs linear-solve gap {gap:.3e} > {:.3e}",
            10.0 * tol
        );
    }
}

/// The C recursion's fixed point must agree with an extended-precision
/// finite-horizon unroll of the same map from zero.
#[test]
fn c_recursion_matches_finite_horizon_unroll() {
    for seed in [2u64, 21, 77] {
        let (mdp, reward_a) = instance(seed, 4, 3, 0.9);
        let reward_b = random_reward(seed ^ 0xC0C0, &mdp, 1.0).unwrap();
        let params = SoftSolveParams { temperature: 1.0, tol: 1e-10, max_iter: None };
        let pi1 = solve_soft_q(&mdp, &reward_a, &params).unwrap().policy;
        let pi2 = solve_soft_q(&mdp, &reward_b, &params).unwrap().policy;
        let fixed_point = compute_c_star(&mdp, &pi1, &pi2, 0.5, 1e-10).unwrap();
        assert!(!fixed_point.vacuous, "seed {seed}: Boltzmann policies cannot be disjoint");
        // gamma^600 ~ 2e-28 at gamma = 0.9: the unroll error is far below
        // the 1e-8 agreement budget.
        let unrolled = finite_horizon_c_recursion(&mdp, &pi1, &pi2, 0.5, 600).unwrap();
        let gap = max_abs_diff(fixed_point.values.values(), unrolled.values());
        assert!(gap <= 1e-8, "seed {seed}: C fixed point vs unroll gap {gap:.3e} > 1e-8");
    }
}

/// Same agreement check for the D recursion, seeded with the C fixed point
/// and the composed policy.
#[test]
fn d_recursion_matches_finite_horizon_unroll() {
    for seed in [5u64, 33, 90] {
        let (mdp, reward_a) = instance(seed, 4, 3, 0.9);
        let reward_b = random_reward(seed ^ 0xD0D0, &mdp, 1.0).unwrap();
        let tasks =
            TaskSet::new(vec![("a".to_string(), reward_a), ("b".to_string(), reward_b)]).unwrap();
        let params = SoftSolveParams { temperature: 1.0, tol: 1e-10, max_iter: None };
        let first = solve_soft_q(&mdp, tasks.reward(0), &params).unwrap();
        let second = solve_soft_q(&mdp, tasks.reward(1), &params).unwrap();
        let composed = compose(&mdp, &tasks, &[0, 1], &[&first, &second]).unwrap();
        let c = compute_c_star(&mdp, &first.policy, &second.policy, 0.5, 1e-10).unwrap();
        let d = compute_d_star(&mdp, &composed.pi_sigma, &c.values, 1e-10).unwrap();
        let unrolled =
            finite_horizon_d_recursion(&mdp, &composed.pi_sigma, &c.values, 600).unwrap();
        let gap = max_abs_diff(d.values(), unrolled.values());
        assert!(gap <= 1e-8, "seed {seed}: D fixed point vs unroll gap {gap:.3e} > 1e-8");
    }
}

/// Full certificates on tiny instances must agree field-by-field with a
/// brute-force oracle that enumerates and solves everything independently.
#[test]
fn certificates_match_exhaustive_enumeration() {
    let tol = 1e-10;
    for seed in 0..20u64 {
        let gamma = GAMMAS[(seed % 3) as usize];
        let mdp = random_mdp(seed, 3, 2, gamma, 0.9).unwrap();
        let reward_a = random_reward(seed ^ 0x11, &mdp, 1.0).unwrap();
        let reward_b = random_reward(seed ^ 0x22, &mdp, 1.0).unwrap();
        let tasks =
            TaskSet::new(vec![("a".to_string(), reward_a), ("b".to_string(), reward_b)]).unwrap();
        let options = CertifyOptions { temperature: 1.0, tol, divergence_factor: 0.5 };
        let production = certify(&mdp, &tasks, (0, 1), &options).unwrap();
        let oracle = exhaustive_tiny_certificate(&mdp, &tasks, tol).unwrap();
        assert_eq!(production.vacuous, oracle.vacuous, "seed {seed}: vacuity disagreement");
        let fields: [(&str, &[f64], &[f64]); 6] = [
            ("c_star", production.c_star.values(), oracle.c_star.values()),
            ("d_star", production.d_star.values(), oracle.d_star.values()),
            (
                "lemma_upper_slack",
                production.lemma_upper_slack.values(),
                oracle.lemma_upper_slack.values(),
            ),
            (
                "lemma_lower_slack",
                production.lemma_lower_slack.values(),
                oracle.lemma_lower_slack.values(),
            ),
            ("theorem_slack", production.theorem_slack.values(), oracle.theorem_slack.values()),
            ("corollary_slack", &production.corollary_slack, &oracle.corollary_slack),
        ];
        for (name, ours, theirs) in fields {
            let gap = max_abs_diff(ours, theirs);
            assert!(gap <= 1e-8, "seed {seed}: {name} gap {gap:.3e} > 1e-8");
        }
        assert!(production.is_valid(), "seed {seed}: production certificate invalid");
    }
}
