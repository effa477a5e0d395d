//! JSON document layer: problem files, solution dumps, and certificate
//! reports.
//!
//! All floats are written with 17 significant digits (`{:.16e}`), enough to
//! identify every double uniquely, and parsed back with exact rounding, so a
//! save/load cycle reproduces tensors bit for bit. Serializing a non-finite
//! float is an error rather than the `null` serde_json would silently emit.

use crate::compose::BoundCertificate;
use crate::mdp::{FiniteMdp, MdpError, RewardTable, TaskSet};
use crate::solver::SoftSolution;
use serde::ser::Serialize;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("document: {0}")]
    Document(String),
}

impl From<MdpError> for IoError {
    fn from(e: MdpError) -> Self {
        IoError::Document(e.to_string())
    }
}

/// serde_json formatter that writes every f64 as `{:.16e}` and refuses
/// nulls. serde_json turns NaN and infinities into `null` before the float
/// hook runs, so rejecting `write_null` is what actually catches them; our
/// documents skip absent optional fields, so no legitimate null ever reaches
/// the formatter.
struct FullPrecisionFormatter;

impl serde_json::ser::Formatter for FullPrecisionFormatter {
    fn write_null<W>(&mut self, _writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "refusing to write null (non-finite float, or an optional field that should be skipped)",
        ))
    }

    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes any document to a JSON string at full double precision.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, IoError> {
    let mut out = Vec::new();
    let mut serializer = serde_json::Serializer::with_formatter(&mut out, FullPrecisionFormatter);
    value.serialize(&mut serializer)?;
    Ok(String::from_utf8(out).expect("json output is utf-8"))
}

/// Parses a document with exact float rounding.
pub fn from_json_str<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, IoError> {
    Ok(serde_json::from_str(text)?)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = to_json_string(value)?;
    text.push('\n');
    Ok(std::fs::write(path, text)?)
}

pub fn load_json<T: for<'a> Deserialize<'a>>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}

// ---------------------------------------------------------------------------
// Problem documents.
// ---------------------------------------------------------------------------

/// On-disk form of a problem: the MDP plus a map of labeled reward tables.
/// `transition` is nested `[s][a][s']`, `terminal` lists absorbing state
/// indices, and `rewards` maps label to an `[s][a]` matrix. Tasks are ordered
/// by label (the map's own order), and subset indices elsewhere refer to that
/// ordering.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub discount: f64,
    pub transition: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Vec<usize>>,
    #[serde(default)]
    pub rewards: BTreeMap<String, Vec<Vec<f64>>>,
}

impl MdpDocument {
    pub fn from_parts(mdp: &FiniteMdp, tasks: Option<&TaskSet>) -> Self {
        let (s, a) = (mdp.num_states(), mdp.num_actions());
        let transition = (0..s)
            .map(|state| (0..a).map(|action| mdp.transition_row(state, action).to_vec()).collect())
            .collect();
        let terminal = mdp.terminal().map(|mask| {
            mask.iter().enumerate().filter(|(_, &t)| t).map(|(index, _)| index).collect()
        });
        let mut rewards = BTreeMap::new();
        if let Some(tasks) = tasks {
            for index in 0..tasks.len() {
                let matrix = (0..s).map(|state| tasks.reward(index).row(state).to_vec()).collect();
                rewards.insert(tasks.label(index).to_string(), matrix);
            }
        }
        MdpDocument {
            num_states: s,
            num_actions: a,
            discount: mdp.discount(),
            transition,
            terminal,
            rewards,
        }
    }

    pub fn mdp(&self) -> Result<FiniteMdp, IoError> {
        let (s, a) = (self.num_states, self.num_actions);
        if self.transition.len() != s {
            return Err(IoError::Document(format!(
                "transition has {} states, document says {s}",
                self.transition.len()
            )));
        }
        let mut flat = Vec::with_capacity(s * a * s);
        for (state, per_action) in self.transition.iter().enumerate() {
            if per_action.len() != a {
                return Err(IoError::Document(format!(
                    "state {state} has {} action rows, document says {a}",
                    per_action.len()
                )));
            }
            for (action, row) in per_action.iter().enumerate() {
                if row.len() != s {
                    return Err(IoError::Document(format!(
                        "transition row (s={state}, a={action}) has {} entries, document says {s}",
                        row.len()
                    )));
                }
                flat.extend_from_slice(row);
            }
        }
        let terminal = match &self.terminal {
            None => None,
            Some(indices) => {
                let mut mask = vec![false; s];
                for &index in indices {
                    if index >= s {
                        return Err(IoError::Document(format!(
                            "terminal index {index} out of range for {s} states"
                        )));
                    }
                    mask[index] = true;
                }
                Some(mask)
            }
        };
        Ok(FiniteMdp::new(s, a, flat, self.discount, terminal)?)
    }

    /// Labeled reward tables in label order, with bounds inferred from the
    /// stored entries.
    pub fn labeled_rewards(&self) -> Result<Vec<(String, RewardTable)>, IoError> {
        let (s, a) = (self.num_states, self.num_actions);
        let mut out = Vec::with_capacity(self.rewards.len());
        for (label, matrix) in &self.rewards {
            if matrix.len() != s {
                return Err(IoError::Document(format!(
                    "reward '{label}' has {} state rows, document says {s}",
                    matrix.len()
                )));
            }
            let mut flat = Vec::with_capacity(s * a);
            for (state, row) in matrix.iter().enumerate() {
                if row.len() != a {
                    return Err(IoError::Document(format!(
                        "reward '{label}' row {state} has {} entries, document says {a}",
                        row.len()
                    )));
                }
                flat.extend_from_slice(row);
            }
            let table = RewardTable::with_inferred_bound(s, a, flat)
                .map_err(|e| IoError::Document(format!("reward '{label}': {e}")))?;
            out.push((label.clone(), table));
        }
        Ok(out)
    }

    pub fn task_set(&self) -> Result<TaskSet, IoError> {
        let labeled = self.labeled_rewards()?;
        if labeled.is_empty() {
            return Err(IoError::Document("document has no rewards".into()));
        }
        Ok(TaskSet::new(labeled)?)
    }
}

// ---------------------------------------------------------------------------
// Result documents.
// ---------------------------------------------------------------------------

/// Solver output for one task: tables plus the diagnostics needed to judge
/// convergence. `policy` holds probabilities; log-probabilities are derived
/// on reload.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDocument {
    pub task: String,
    pub method: String,
    pub temperature: f64,
    pub tol: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub q: Vec<Vec<f64>>,
    pub value: Vec<f64>,
    pub policy: Vec<Vec<f64>>,
}

impl SolutionDocument {
    pub fn from_solution(task: &str, method: &str, tol: f64, solution: &SoftSolution) -> Self {
        let (s, a) = (solution.q.num_states(), solution.q.num_actions());
        SolutionDocument {
            task: task.to_string(),
            method: method.to_string(),
            temperature: solution.q.temperature(),
            tol,
            iterations: solution.diagnostics.iterations,
            final_residual: solution.diagnostics.final_residual,
            q: (0..s).map(|state| solution.q.row(state).to_vec()).collect(),
            value: (0..s).map(|state| solution.value.value(state)).collect(),
            policy: (0..s)
                .map(|state| (0..a).map(|action| solution.policy.prob(state, action)).collect())
                .collect(),
        }
    }
}

/// Certificate report: summary scalars up front, full evidence matrices
/// after. `divergence_factor` records which divergence coefficient produced
/// the bound so reports from the halved and unhalved variants stay
/// distinguishable.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDocument {
    pub tasks: (String, String),
    pub subset: (usize, usize),
    pub temperature: f64,
    pub divergence_factor: f64,
    pub vacuous: bool,
    pub valid: bool,
    pub max_c_star: f64,
    pub max_d_star: f64,
    pub min_lemma_upper_slack: f64,
    pub min_lemma_lower_slack: f64,
    pub min_theorem_slack: f64,
    pub min_corollary_slack: f64,
    pub min_slack: f64,
    pub c_star: Vec<Vec<f64>>,
    pub d_star: Vec<Vec<f64>>,
    pub lemma_upper_slack: Vec<Vec<f64>>,
    pub lemma_lower_slack: Vec<Vec<f64>>,
    pub theorem_slack: Vec<Vec<f64>>,
    pub corollary_slack: Vec<f64>,
}

impl CertificateDocument {
    pub fn from_certificate(labels: (&str, &str), certificate: &BoundCertificate) -> Self {
        let nest = |m: &crate::compose::SaMatrix| -> Vec<Vec<f64>> {
            (0..m.num_states()).map(|state| m.row(state).to_vec()).collect()
        };
        CertificateDocument {
            tasks: (labels.0.to_string(), labels.1.to_string()),
            subset: certificate.subset,
            temperature: certificate.temperature,
            divergence_factor: certificate.divergence_factor,
            vacuous: certificate.vacuous,
            valid: certificate.is_valid(),
            max_c_star: certificate.max_c_star(),
            max_d_star: certificate.max_d_star(),
            min_lemma_upper_slack: certificate.min_lemma_upper_slack(),
            min_lemma_lower_slack: certificate.min_lemma_lower_slack(),
            min_theorem_slack: certificate.min_theorem_slack(),
            min_corollary_slack: certificate.min_corollary_slack(),
            min_slack: certificate.min_slack(),
            c_star: nest(&certificate.c_star),
            d_star: nest(&certificate.d_star),
            lemma_upper_slack: nest(&certificate.lemma_upper_slack),
            lemma_lower_slack: nest(&certificate.lemma_lower_slack),
            theorem_slack: nest(&certificate.theorem_slack),
            corollary_slack: certificate.corollary_slack.clone(),
        }
    }
}
