//! The seven experiment commands behind the CLI. Every command is a pure
//! function of (config file bytes, flags): no wall-clock, no OS entropy, so
//! reruns produce byte-identical artifacts.

use crate::compose::{certify, compose, CertifyOptions};
use crate::grid::{final_distance_metric, hits_danger, rollout, DistanceTarget, GridSpec, Rollout};
use crate::harness::config::{ConfigError, ExperimentConfig, SeedSpec};
use crate::harness::report::{
    metrics_csv, rollouts_csv, sha256_hex, traces_csv, write_text, MetricRow, ReportDocument,
    RolloutRow,
};
use crate::io::{save_json, CertificateDocument, MdpDocument, SolutionDocument};
use crate::mdp::FiniteMdp;
use crate::oracle;
use crate::solver::{
    boltzmann_policy, greedy_policy, hard_max_solve, residual_descent_solve,
    soft_policy_evaluation, soft_values, solve_soft_q, DescentParams, QTable, SoftSolveParams,
    StochasticPolicy,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Why a command failed, split by exit code: usage/config problems exit 2,
/// everything that went wrong while computing exits 1.
#[derive(Debug)]
pub enum CommandError {
    Usage(String),
    Failure(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) => 2,
            CommandError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Usage(message) => write!(f, "{message}"),
            CommandError::Failure(message) => write!(f, "{message}"),
        }
    }
}

impl From<ConfigError> for CommandError {
    fn from(error: ConfigError) -> Self {
        CommandError::Usage(error.to_string())
    }
}

macro_rules! failure_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CommandError {
            fn from(error: $ty) -> Self {
                CommandError::Failure(error.to_string())
            }
        }
    )*};
}

failure_from!(
    crate::solver::SolveError,
    crate::compose::ComposeError,
    crate::grid::GridError,
    crate::io::IoError,
    crate::oracle::OracleError,
    std::io::Error
);

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub tol_override: Option<f64>,
    pub jobs: Option<usize>,
}

/// Config file text plus the parsed, override-applied config.
struct LoadedConfig {
    text: String,
    config: ExperimentConfig,
    config_dir: PathBuf,
}

fn load(options: &RunOptions) -> Result<LoadedConfig, CommandError> {
    let text = std::fs::read_to_string(&options.config_path).map_err(|e| {
        CommandError::Usage(format!("cannot read {}: {e}", options.config_path.display()))
    })?;
    let mut config = crate::harness::config::parse_config(&text)?;
    if let Some(tol) = options.tol_override {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CommandError::Usage(format!("--tol {tol} must be finite and > 0")));
        }
        config.tol = tol;
    }
    if let Some(seed) = options.seed_override {
        config.seeds = SeedSpec::List(vec![seed]);
    }
    let config_dir =
        options.config_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&options.out_dir).map_err(|e| {
        CommandError::Usage(format!("cannot create --out {}: {e}", options.out_dir.display()))
    })?;
    Ok(LoadedConfig { text, config, config_dir })
}

/// Runs `body` inside a rayon pool sized by `--jobs` (or rayon's default).
fn with_pool<T: Send>(
    jobs: Option<usize>,
    body: impl FnOnce() -> Result<T, CommandError> + Send,
) -> Result<T, CommandError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CommandError::Usage(format!("--jobs: {e}")))?;
    pool.install(body)
}

fn first_seed(config: &ExperimentConfig) -> u64 {
    config.seeds.seeds()[0]
}

fn solve_params(config: &ExperimentConfig) -> SoftSolveParams {
    SoftSolveParams { temperature: config.temperature, tol: config.tol, max_iter: None }
}

fn subset_label(tasks: &crate::mdp::TaskSet, subset: &[usize]) -> String {
    subset.iter().map(|&i| tasks.label(i)).collect::<Vec<_>>().join("+")
}

fn require_subsets(config: &ExperimentConfig) -> Result<(), CommandError> {
    if config.subsets.is_empty() {
        return Err(CommandError::Usage("config declares no subsets to compose".into()));
    }
    Ok(())
}

fn require_pair(subset: &[usize]) -> Result<(usize, usize), CommandError> {
    if let [first, second] = subset {
        Ok((*first, *second))
    } else {
        Err(CommandError::Usage(format!(
            "subset {subset:?} has {} tasks; certification is pairwise only",
            subset.len()
        )))
    }
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

/// Solves every task in the config and writes one solution document each.
pub fn cmd_solve(options: &RunOptions) -> Result<(), CommandError> {
    let loaded = load(options)?;
    let resolved = loaded.config.resolve(&loaded.config_dir, first_seed(&loaded.config))?;
    let params = solve_params(&loaded.config);
    for index in 0..resolved.tasks.len() {
        let label = resolved.tasks.label(index);
        let solution = solve_soft_q(&resolved.mdp, resolved.tasks.reward(index), &params)?;
        let document =
            SolutionDocument::from_solution(label, "soft-direct", loaded.config.tol, &solution);
        let path = options.out_dir.join(format!("solve_{label}.json"));
        save_json(&path, &document)?;
        println!(
            "solved {label}: iterations={} final_residual={:.3e} -> {}",
            solution.diagnostics.iterations,
            solution.diagnostics.final_residual,
            path.display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// compose
// ---------------------------------------------------------------------------

/// Composes each subset by Q-averaging and writes the merged solution. The
/// `iterations` field is 0 by construction: merging runs no sweeps.
pub fn cmd_compose(options: &RunOptions) -> Result<(), CommandError> {
    let loaded = load(options)?;
    require_subsets(&loaded.config)?;
    let resolved = loaded.config.resolve(&loaded.config_dir, first_seed(&loaded.config))?;
    let params = solve_params(&loaded.config);
    for subset in &loaded.config.subsets {
        let solutions = subset
            .iter()
            .map(|&i| solve_soft_q(&resolved.mdp, resolved.tasks.reward(i), &params))
            .collect::<Result<Vec<_>, _>>()?;
        let references: Vec<_> = solutions.iter().collect();
        let composed = compose(&resolved.mdp, &resolved.tasks, subset, &references)?;
        let label = subset_label(&resolved.tasks, subset);
        let value = soft_values(&composed.q_sigma);
        let (s, a) = (composed.q_sigma.num_states(), composed.q_sigma.num_actions());
        let document = SolutionDocument {
            task: label.clone(),
            method: "soft-merged".into(),
            temperature: loaded.config.temperature,
            tol: loaded.config.tol,
            iterations: 0,
            final_residual: 0.0,
            q: (0..s).map(|state| composed.q_sigma.row(state).to_vec()).collect(),
            value: value.values().to_vec(),
            policy: (0..s)
                .map(|state| (0..a).map(|action| composed.pi_sigma.prob(state, action)).collect())
                .collect(),
        };
        let path = options.out_dir.join(format!("compose_{label}.json"));
        save_json(&path, &document)?;
        println!("composed {label}: 0 additional sweeps -> {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

/// Counts and provenance for a certification sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifySummary {
    pub crate_version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub total: usize,
    pub valid: usize,
    pub vacuous: usize,
    pub failed: usize,
    pub min_slack: f64,
}

/// Certifies every pair subset, once per sweep seed when the instance is
/// seeded, and exits nonzero iff any certificate slack falls below the
/// validity tolerance.
pub fn cmd_certify(options: &RunOptions) -> Result<(), CommandError> {
    let loaded = load(options)?;
    require_subsets(&loaded.config)?;
    let pairs = loaded
        .config
        .subsets
        .iter()
        .map(|subset| require_pair(subset))
        .collect::<Result<Vec<_>, _>>()?;
    let sweep_seeds: Vec<u64> = if loaded.config.is_seed_swept() {
        loaded.config.seeds.seeds()
    } else {
        vec![first_seed(&loaded.config)]
    };
    let suffixed = loaded.config.is_seed_swept();
    let certify_options = CertifyOptions {
        temperature: loaded.config.temperature,
        tol: loaded.config.tol,
        divergence_factor: loaded.config.divergence_factor,
    };

    let certificates: Vec<(u64, String, CertificateDocument)> = with_pool(options.jobs, || {
        sweep_seeds
            .par_iter()
            .map(|&seed| -> Result<Vec<(u64, String, CertificateDocument)>, CommandError> {
                let resolved = loaded.config.resolve(&loaded.config_dir, seed)?;
                pairs
                    .iter()
                    .map(|&pair| {
                        let certificate =
                            certify(&resolved.mdp, &resolved.tasks, pair, &certify_options)?;
                        let labels = (resolved.tasks.label(pair.0), resolved.tasks.label(pair.1));
                        let document = CertificateDocument::from_certificate(labels, &certificate);
                        let name = format!("{}+{}", labels.0, labels.1);
                        Ok((seed, name, document))
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|nested| nested.into_iter().flatten().collect())
    })?;

    let mut valid = 0;
    let mut vacuous = 0;
    let mut failed = 0;
    let mut min_slack = f64::INFINITY;
    for (seed, name, document) in &certificates {
        let file = if suffixed {
            format!("certificate_{name}_seed{seed}.json")
        } else {
            format!("certificate_{name}.json")
        };
        save_json(&options.out_dir.join(&file), document)?;
        if document.valid {
            valid += 1;
        } else {
            failed += 1;
        }
        if document.vacuous {
            vacuous += 1;
        }
        min_slack = min_slack.min(document.min_slack);
        println!(
            "certificate {name}{}: valid={} vacuous={} min_slack={:.3e} max_c_star={:.3e} max_d_star={:.3e}",
            if suffixed { format!(" seed={seed}") } else { String::new() },
            document.valid,
            document.vacuous,
            document.min_slack,
            document.max_c_star,
            document.max_d_star
        );
    }
    let summary = CertifySummary {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(loaded.text.as_bytes()),
        seeds: sweep_seeds,
        total: certificates.len(),
        valid,
        vacuous,
        failed,
        min_slack,
    };
    save_json(&options.out_dir.join("certify_summary.json"), &summary)?;
    println!(
        "certified {} pair(s): valid={valid} vacuous={vacuous} failed={failed} min_slack={min_slack:.3e}",
        summary.total
    );
    if failed > 0 {
        return Err(CommandError::Failure(format!(
            "{failed} certificate(s) violated the bounds (min slack {min_slack:.3e})"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

const BENCH_METHODS: [&str; 4] = ["soft-direct", "soft-merged", "hard-direct", "hard-merged"];

struct BenchMethod {
    name: &'static str,
    policy: StochasticPolicy,
    /// Bellman sweeps run beyond the constituent solves that both merged and
    /// direct variants start from.
    extra_sweeps: usize,
}

fn bench_methods(
    mdp: &FiniteMdp,
    tasks: &crate::mdp::TaskSet,
    subset: &[usize],
    params: &SoftSolveParams,
) -> Result<(Vec<BenchMethod>, crate::mdp::RewardTable), CommandError> {
    let soft_constituents = subset
        .iter()
        .map(|&i| solve_soft_q(mdp, tasks.reward(i), params))
        .collect::<Result<Vec<_>, _>>()?;
    let references: Vec<_> = soft_constituents.iter().collect();
    let composed = compose(mdp, tasks, subset, &references)?;

    let soft_direct = solve_soft_q(mdp, &composed.compound_reward, params)?;

    let hard_constituents = subset
        .iter()
        .map(|&i| hard_max_solve(mdp, tasks.reward(i), params.tol))
        .collect::<Result<Vec<_>, _>>()?;
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let mut mean_hard_q = vec![0.0; s * a];
    for solution in &hard_constituents {
        for (acc, value) in mean_hard_q.iter_mut().zip(solution.q.values()) {
            *acc += value;
        }
    }
    let count = subset.len() as f64;
    for value in mean_hard_q.iter_mut() {
        *value /= count;
    }
    let hard_merged_q = QTable::from_values(s, a, 0.0, mean_hard_q)?;
    let hard_direct = hard_max_solve(mdp, &composed.compound_reward, params.tol)?;

    let methods = vec![
        BenchMethod {
            name: BENCH_METHODS[0],
            policy: boltzmann_policy(&soft_direct.q)?,
            extra_sweeps: soft_direct.diagnostics.iterations,
        },
        BenchMethod { name: BENCH_METHODS[1], policy: composed.pi_sigma, extra_sweeps: 0 },
        BenchMethod {
            name: BENCH_METHODS[2],
            policy: hard_direct.policy,
            extra_sweeps: hard_direct.diagnostics.iterations,
        },
        BenchMethod {
            name: BENCH_METHODS[3],
            policy: greedy_policy(&hard_merged_q),
            extra_sweeps: 0,
        },
    ];
    Ok((methods, composed.compound_reward))
}

/// Runs the four-method comparison (direct vs merged, soft vs hard) on every
/// subset and writes `report.csv`, `rollouts.csv`, and `report.json`.
pub fn cmd_bench(options: &RunOptions) -> Result<(), CommandError> {
    let loaded = load(options)?;
    require_subsets(&loaded.config)?;
    let resolved = loaded.config.resolve(&loaded.config_dir, first_seed(&loaded.config))?;
    let spec = resolved.grid.as_ref().ok_or_else(|| {
        CommandError::Usage("bench requires a grid mdp source (rollouts need geometry)".into())
    })?;
    let target = loaded.config.target.ok_or_else(|| {
        CommandError::Usage("bench requires a target for the final-distance metric".into())
    })?;
    let params = solve_params(&loaded.config);
    let horizon = loaded.config.horizon.unwrap_or_else(|| spec.default_horizon());
    let start = spec.state_of(spec.start);
    let seeds = loaded.config.seeds.seeds();

    let mut metric_rows = Vec::new();
    let mut rollout_rows = Vec::new();
    with_pool(options.jobs, || {
        for subset in &loaded.config.subsets {
            let label = subset_label(&resolved.tasks, subset);
            let (methods, compound) =
                bench_methods(&resolved.mdp, &resolved.tasks, subset, &params)?;
            for method in &methods {
                let rollouts: Vec<Rollout> = seeds
                    .par_iter()
                    .map(|&seed| {
                        rollout(&resolved.mdp, &method.policy, &compound, start, horizon, seed)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let (mean, std) = final_distance_metric(spec, &rollouts, target)?;
                for (seed, sample) in seeds.iter().zip(&rollouts) {
                    rollout_rows.push(rollout_row(
                        spec,
                        &label,
                        method.name,
                        *seed,
                        sample,
                        target,
                    ));
                }
                metric_rows.push(MetricRow {
                    task: label.clone(),
                    method: method.name.into(),
                    metric: "final_distance".into(),
                    mean,
                    std,
                    n: seeds.len(),
                });
                metric_rows.push(MetricRow {
                    task: label.clone(),
                    method: method.name.into(),
                    metric: "extra_sweeps".into(),
                    mean: method.extra_sweeps as f64,
                    std: 0.0,
                    n: seeds.len(),
                });
                println!(
                    "bench {label} {}: final_distance={mean:.4}+/-{std:.4} extra_sweeps={}",
                    method.name, method.extra_sweeps
                );
            }
        }
        Ok(())
    })?;

    write_text(&options.out_dir.join("report.csv"), &metrics_csv(&metric_rows))?;
    write_text(&options.out_dir.join("rollouts.csv"), &rollouts_csv(&rollout_rows))?;
    let report = ReportDocument::new(&loaded.text, seeds, metric_rows);
    save_json(&options.out_dir.join("report.json"), &report)?;
    println!("bench artifacts written to {}", options.out_dir.display());
    Ok(())
}

fn rollout_row(
    spec: &GridSpec,
    task: &str,
    method: &str,
    seed: u64,
    sample: &Rollout,
    target: DistanceTarget,
) -> RolloutRow {
    let goal = target.cell();
    let goal_state = spec.state_of(goal);
    RolloutRow {
        task: task.to_string(),
        method: method.to_string(),
        seed,
        final_distance: spec.cell_of(sample.final_state()).distance(goal),
        reached_goal: sample.states.contains(&goal_state),
        hit_obstacle: hits_danger(spec, sample),
    }
}

// ---------------------------------------------------------------------------
// plotdata
// ---------------------------------------------------------------------------

/// Emits residual-vs-iteration traces for the first subset's compound task:
/// the direct fixed-point solve, the merged method (no sweeps, so no rows),
/// and the relaxed residual-descent solve.
pub fn cmd_plotdata(options: &RunOptions) -> Result<(), CommandError> {
    let loaded = load(options)?;
    require_subsets(&loaded.config)?;
    let resolved = loaded.config.resolve(&loaded.config_dir, first_seed(&loaded.config))?;
    let params = solve_params(&loaded.config);
    let subset = &loaded.config.subsets[0];
    let label = subset_label(&resolved.tasks, subset);
    let constituents = subset
        .iter()
        .map(|&i| solve_soft_q(&resolved.mdp, resolved.tasks.reward(i), &params))
        .collect::<Result<Vec<_>, _>>()?;
    let references: Vec<_> = constituents.iter().collect();
    let compound = compose(&resolved.mdp, &resolved.tasks, subset, &references)?.compound_reward;

    let direct = solve_soft_q(&resolved.mdp, &compound, &params)?;
    let descent_params = DescentParams {
        temperature: loaded.config.temperature,
        step: 1.0,
        tol: loaded.config.tol,
        max_iter: None,
    };
    let (_, descent) = residual_descent_solve(&resolved.mdp, &compound, &descent_params)?;

    let traces = vec![
        ("soft-direct".to_string(), direct.diagnostics.contraction_trace.clone()),
        ("soft-merged".to_string(), Vec::new()),
        ("residual-descent".to_string(), descent.contraction_trace.clone()),
    ];
    write_text(&options.out_dir.join("traces.csv"), &traces_csv(&traces))?;
    println!(
        "plotdata {label}: direct={} sweeps, merged=0 sweeps, descent={} sweeps -> {}",
        direct.diagnostics.iterations,
        descent.iterations,
        options.out_dir.join("traces.csv").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyCheck {
    pub name: String,
    pub budget: f64,
    pub worst: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub crate_version: String,
    pub config_sha256: String,
    pub checks: Vec<VerifyCheck>,
}

/// Cross-checks the production solvers against the independent
/// high-precision oracles: policy evaluation against a dense linear solve on
/// the configured instance, the optimal-control solver against finite-horizon
/// unrolls on tiny seeded instances, and full certificates against the
/// exhaustive tiny-instance construction.
pub fn cmd_verify(options: &RunOptions) -> Result<(), CommandError> {
    let loaded = load(options)?;
    let resolved = loaded.config.resolve(&loaded.config_dir, first_seed(&loaded.config))?;
    let params = solve_params(&loaded.config);
    let mut checks = Vec::new();

    // 1. Soft policy evaluation vs dense linear solve, configured instance.
    {
        let reward = resolved.tasks.reward(0);
        let solution = solve_soft_q(&resolved.mdp, reward, &params)?;
        let (iterative, _) =
            soft_policy_evaluation(&resolved.mdp, reward, &solution.policy, &params)?;
        let dense = oracle::linear_solve_policy_eval(
            &resolved.mdp,
            reward,
            &solution.policy,
            loaded.config.temperature,
        )?;
        let worst = max_abs_diff(iterative.values(), dense.values());
        push_check(&mut checks, "policy_eval_vs_linear_solve", 10.0 * loaded.config.tol, worst);
    }

    // 2. Optimal solver vs finite-horizon high-precision unroll on tiny
    // seeded instances (tiny keeps the horizon-by-state product cheap even at
    // tight tolerances).
    {
        let mut worst = 0.0_f64;
        for offset in 0..5u64 {
            let seed = first_seed(&loaded.config).wrapping_add(offset);
            let mdp = crate::mdp::random_mdp(seed, 4, 3, 0.9, 1.0)
                .map_err(|e| CommandError::Failure(e.to_string()))?;
            let reward = crate::mdp::random_reward(seed ^ 0xA5A5, &mdp, 1.0)
                .map_err(|e| CommandError::Failure(e.to_string()))?;
            let tol = 1e-10;
            let solve = solve_soft_q(
                &mdp,
                &reward,
                &SoftSolveParams { temperature: 1.0, tol, max_iter: None },
            )?;
            let horizon = oracle::HorizonConfig::for_tolerance(
                tol,
                mdp.discount(),
                reward.bound() + (mdp.num_actions() as f64).ln(),
            )?;
            let oracle_q = oracle::finite_horizon_soft_q(&mdp, &reward, 1.0, horizon.horizon)?;
            worst = worst.max(max_abs_diff(solve.q.values(), oracle_q.values()));
        }
        push_check(&mut checks, "solve_vs_finite_horizon_oracle", 2.0 * 1e-10, worst);
    }

    // 3. Production certificates vs the exhaustive tiny-instance oracle.
    {
        let mut worst = 0.0_f64;
        for offset in 0..3u64 {
            let seed = first_seed(&loaded.config).wrapping_add(1000 + offset);
            let mdp = crate::mdp::random_mdp(seed, 3, 2, 0.9, 1.0)
                .map_err(|e| CommandError::Failure(e.to_string()))?;
            let tasks = crate::mdp::TaskSet::new(vec![
                (
                    "a".to_string(),
                    crate::mdp::random_reward(seed ^ 0x11, &mdp, 1.0)
                        .map_err(|e| CommandError::Failure(e.to_string()))?,
                ),
                (
                    "b".to_string(),
                    crate::mdp::random_reward(seed ^ 0x22, &mdp, 1.0)
                        .map_err(|e| CommandError::Failure(e.to_string()))?,
                ),
            ])
            .map_err(|e| CommandError::Failure(e.to_string()))?;
            let tol = 1e-10;
            let production = certify(
                &mdp,
                &tasks,
                (0, 1),
                &CertifyOptions { temperature: 1.0, tol, divergence_factor: 0.5 },
            )?;
            let oracle_certificate = oracle::exhaustive_tiny_certificate(&mdp, &tasks, tol)?;
            worst = worst.max(certificate_gap(&production, &oracle_certificate));
        }
        push_check(&mut checks, "certify_vs_exhaustive_tiny", 1e-8, worst);
    }

    let report = VerifyReport {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(loaded.text.as_bytes()),
        checks: checks.clone(),
    };
    save_json(&options.out_dir.join("verify.json"), &report)?;
    let failing: Vec<&VerifyCheck> = checks.iter().filter(|c| !c.pass).collect();
    if let Some(check) = failing.first() {
        return Err(CommandError::Failure(format!(
            "oracle cross-check '{}' exceeded its budget: worst {:.3e} > {:.3e}",
            check.name, check.worst, check.budget
        )));
    }
    Ok(())
}

fn push_check(checks: &mut Vec<VerifyCheck>, name: &str, budget: f64, worst: f64) {
    let pass = worst <= budget;
    println!(
        "verify {name}: worst={worst:.3e} budget={budget:.3e} {}",
        if pass { "PASS" } else { "FAIL" }
    );
    checks.push(VerifyCheck { name: name.to_string(), budget, worst, pass });
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Worst per-field gap between a production certificate and the oracle's.
fn certificate_gap(
    production: &crate::compose::BoundCertificate,
    oracle_certificate: &crate::compose::BoundCertificate,
) -> f64 {
    let mut worst = max_abs_diff(production.c_star.values(), oracle_certificate.c_star.values());
    worst = worst.max(max_abs_diff(production.d_star.values(), oracle_certificate.d_star.values()));
    worst = worst.max(max_abs_diff(
        production.lemma_upper_slack.values(),
        oracle_certificate.lemma_upper_slack.values(),
    ));
    worst = worst.max(max_abs_diff(
        production.lemma_lower_slack.values(),
        oracle_certificate.lemma_lower_slack.values(),
    ));
    worst = worst.max(max_abs_diff(
        production.theorem_slack.values(),
        oracle_certificate.theorem_slack.values(),
    ));
    worst =
        worst.max(max_abs_diff(&production.corollary_slack, &oracle_certificate.corollary_slack));
    worst
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

/// Materializes the configured instance (MDP + labeled rewards) and writes it
/// as a problem document that a `file` source can load back.
pub fn cmd_gen(options: &RunOptions) -> Result<(), CommandError> {
    let loaded = load(options)?;
    let resolved = loaded.config.resolve(&loaded.config_dir, first_seed(&loaded.config))?;
    let document = MdpDocument::from_parts(&resolved.mdp, Some(&resolved.tasks));
    let path = options.out_dir.join("problem.json");
    save_json(&path, &document)?;
    println!(
        "generated problem: {} states, {} actions, {} tasks -> {}",
        resolved.mdp.num_states(),
        resolved.mdp.num_actions(),
        resolved.tasks.len(),
        path.display()
    );
    Ok(())
}
