//! Input files and result documents.
//!
//! Every result document carries `schema_version` and `command`. Documents
//! are plain serde structs, so anything the CLI emits parses back to the same
//! value.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use coopt::{EpsilonCertificate, GameModel, HermitianOperator, ProblemFile};

pub const SCHEMA_VERSION: u32 = 1;

/// Reads and deserializes a JSON file. Errors name the offending field path
/// together with the line and column reported by the parser.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_json(&text).with_context(|| format!("{}", path.display()))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            anyhow::anyhow!("{inner}")
        } else {
            anyhow::anyhow!("field `{path}`: {inner}")
        }
    })
}

pub fn load_problem(path: &Path, hbar: Option<f64>) -> Result<GameModel> {
    let mut spec: ProblemFile = read_json(path)?;
    if hbar.is_some() {
        spec.hbar = hbar;
    }
    GameModel::validate(spec).with_context(|| format!("{}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub n: usize,
    pub potential: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HamiltonianFile {
    Diagonal(Vec<f64>),
    Dense(Vec<Vec<f64>>),
    Grid(GridSpec),
}

impl HamiltonianFile {
    pub fn build(self) -> coopt::Result<HermitianOperator> {
        match self {
            Self::Diagonal(d) => HermitianOperator::diagonal(d),
            Self::Dense(rows) => HermitianOperator::dense(rows),
            Self::Grid(g) => coopt::build_grid_hamiltonian(g.xmin, g.xmax, g.n, &g.potential),
        }
    }
}

/// Strategy profile input for `verify`. A `solve` result is also accepted,
/// since it carries the same `agents[].name` / `agents[].probabilities`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub agents: Vec<AgentProbabilities>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProbabilities {
    pub name: String,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentGain {
    pub name: String,
    pub gain: f64,
    pub best_action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonDoc {
    pub epsilon: f64,
    pub agents: Vec<AgentGain>,
}

impl EpsilonDoc {
    pub fn new(model: &GameModel, cert: &EpsilonCertificate) -> Self {
        Self {
            epsilon: cert.epsilon,
            agents: model
                .agents()
                .iter()
                .zip(cert.gains.iter().zip(&cert.best_actions))
                .map(|(a, (&gain, &best_action))| AgentGain {
                    name: a.name.clone(),
                    gain,
                    best_action,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedAgent {
    pub name: String,
    pub variable: String,
    pub probabilities: Vec<f64>,
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDoc {
    pub schema_version: u32,
    pub command: String,
    pub mode: coopt::Mode,
    pub alpha: f64,
    pub hbar: f64,
    pub init: String,
    pub seed: Option<u64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_change: f64,
    pub agents: Vec<SolvedAgent>,
    /// Utility models only.
    pub epsilon: Option<EpsilonDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashDoc {
    pub schema_version: u32,
    pub command: String,
    pub agents: Vec<String>,
    /// One action index per agent, in `agents` order.
    pub equilibria: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyDoc {
    pub schema_version: u32,
    pub command: String,
    pub certificate: EpsilonDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumState {
    pub index: usize,
    pub lambda: f64,
    pub residual: f64,
    pub converged: bool,
    pub steps: usize,
    pub evolution_time: f64,
    pub matched_eigenvalue_index: Option<usize>,
    pub oracle_eigenvalue: Option<f64>,
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumDoc {
    pub schema_version: u32,
    pub command: String,
    pub dimension: usize,
    pub hbar: f64,
    pub dt: f64,
    pub tol: f64,
    pub states: Vec<QuantumState>,
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}
