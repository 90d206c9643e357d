//! Problem representation: variables, agents and their objectives.
//!
//! A [`ProblemFile`] is the raw, serializable document. [`GameModel::validate`]
//! checks every invariant, reports all violations at once and resolves
//! variable names to indices. Every agent controls exactly one variable, so
//! agent `i` and variable `model.agent(i).variable` are interchangeable.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

pub const DEFAULT_HBAR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Agents minimize energies `E_i(x)`.
    Energy,
    /// Agents maximize nonnegative utilities `u_i(x)`.
    Utility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub cardinality: usize,
}

/// Row-major table over the joint assignments of `order`; the last variable
/// varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub order: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSpec {
    pub with: String,
    /// `table[own_action][other_action]`.
    pub table: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveSpec {
    Dense(DenseSpec),
    Pairwise(Vec<PairwiseSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    pub acts_on: String,
    pub objective: ObjectiveSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    pub mode: Mode,
    pub variables: Vec<DomainSpec>,
    pub agents: Vec<AgentSpec>,
}

/// Dense objective over a subset of the model's variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    /// Variable indices, in table order.
    pub axes: Vec<usize>,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl DenseTensor {
    /// Flat index of the entry selected by a full joint assignment of the model.
    pub fn index_of(&self, assignment: &[usize]) -> usize {
        self.axes
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&axis, &dim)| acc * dim + assignment[axis])
    }

    pub fn at(&self, assignment: &[usize]) -> f64 {
        self.values[self.index_of(assignment)]
    }

    /// Decodes a flat index into per-axis actions (same order as `axes`).
    pub fn decode(&self, mut flat: usize, out: &mut [usize]) {
        for k in (0..self.dims.len()).rev() {
            out[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTerm {
    pub other: usize,
    pub own_cardinality: usize,
    pub other_cardinality: usize,
    /// Row-major `(own_action, other_action)`.
    pub table: Vec<f64>,
}

impl PairwiseTerm {
    pub fn at(&self, own: usize, other: usize) -> f64 {
        self.table[own * self.other_cardinality + other]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentObjective {
    DenseEnergy(DenseTensor),
    PairwiseEnergy(Vec<PairwiseTerm>),
    DenseUtility(DenseTensor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub name: String,
    pub variable: usize,
    pub objective: AgentObjective,
}

impl Agent {
    /// Energy (or utility, in utility mode) at a full joint assignment.
    pub fn objective_at(&self, assignment: &[usize]) -> f64 {
        match &self.objective {
            AgentObjective::DenseEnergy(t) | AgentObjective::DenseUtility(t) => t.at(assignment),
            AgentObjective::PairwiseEnergy(terms) => terms
                .iter()
                .map(|t| t.at(assignment[self.variable], assignment[t.other]))
                .sum(),
        }
    }
}

/// A validated problem. Immutable; share it freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct GameModel {
    variables: Vec<DomainSpec>,
    agents: Vec<Agent>,
    hbar: f64,
    mode: Mode,
}

impl GameModel {
    /// Checks every invariant of `spec`. On failure the error lists all
    /// violations, each anchored at its field path.
    pub fn validate(spec: ProblemFile) -> Result<Self> {
        let mut errs = Vec::new();

        let hbar = spec.hbar.unwrap_or(DEFAULT_HBAR);
        if !(hbar.is_finite() && hbar > 0.0) {
            errs.push(Violation::new("hbar", format!("must be a finite positive number, got {hbar}")));
        }

        let mut var_index = HashMap::new();
        for (k, v) in spec.variables.iter().enumerate() {
            if v.cardinality < 2 {
                errs.push(Violation::new(
                    format!("variables[{k}].cardinality"),
                    format!("must be at least 2, got {}", v.cardinality),
                ));
            }
            if *var_index.entry(v.name.as_str()).or_insert(k) != k {
                errs.push(Violation::new(
                    format!("variables[{k}].name"),
                    format!("duplicate variable `{}`", v.name),
                ));
            }
        }
        if spec.variables.is_empty() {
            errs.push(Violation::new("variables", "at least one variable is required"));
        }

        let mut agent_names = HashSet::new();
        let mut controlled = vec![false; spec.variables.len()];
        let mut agents = Vec::with_capacity(spec.agents.len());
        for (k, a) in spec.agents.iter().enumerate() {
            let at = format!("agents[{k}]");
            if !agent_names.insert(a.name.as_str()) {
                errs.push(Violation::new(format!("{at}.name"), format!("duplicate agent `{}`", a.name)));
            }
            let Some(&variable) = var_index.get(a.acts_on.as_str()) else {
                errs.push(Violation::new(
                    format!("{at}.acts_on"),
                    format!("unknown variable `{}`", a.acts_on),
                ));
                continue;
            };
            if std::mem::replace(&mut controlled[variable], true) {
                errs.push(Violation::new(
                    format!("{at}.acts_on"),
                    format!("variable `{}` already has an agent", a.acts_on),
                ));
            }
            let objective = match &a.objective {
                ObjectiveSpec::Dense(d) => {
                    let tensor = resolve_dense(d, variable, &spec.variables, &var_index, &at, spec.mode, &mut errs);
                    tensor.map(|t| match spec.mode {
                        Mode::Energy => AgentObjective::DenseEnergy(t),
                        Mode::Utility => AgentObjective::DenseUtility(t),
                    })
                }
                ObjectiveSpec::Pairwise(terms) => {
                    if spec.mode == Mode::Utility {
                        errs.push(Violation::new(
                            format!("{at}.objective.pairwise"),
                            "pairwise objectives are only allowed in energy mode",
                        ));
                        None
                    } else {
                        resolve_pairwise(terms, variable, &spec.variables, &var_index, &at, &mut errs)
                            .map(AgentObjective::PairwiseEnergy)
                    }
                }
            };
            if let Some(objective) = objective {
                agents.push(Agent {
                    name: a.name.clone(),
                    variable,
                    objective,
                });
            }
        }
        for (k, c) in controlled.iter().enumerate() {
            if !c {
                errs.push(Violation::new(
                    format!("variables[{k}]"),
                    format!("variable `{}` has no agent", spec.variables[k].name),
                ));
            }
        }

        if errs.is_empty() {
            Ok(Self {
                variables: spec.variables,
                agents,
                hbar,
                mode: spec.mode,
            })
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn variables(&self) -> &[DomainSpec] {
        &self.variables
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &Agent {
        &self.agents[i]
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of actions available to agent `i`.
    pub fn cardinality(&self, agent: usize) -> usize {
        self.variables[self.agents[agent].variable].cardinality
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        (0..self.num_agents()).map(|i| self.cardinality(i)).collect()
    }

    /// Agent index controlling each variable.
    pub fn agent_of_variable(&self) -> Vec<usize> {
        let mut out = vec![0; self.variables.len()];
        for (i, a) in self.agents.iter().enumerate() {
            out[a.variable] = i;
        }
        out
    }

    /// Total number of joint assignments, saturating.
    pub fn joint_size(&self) -> u128 {
        self.variables
            .iter()
            .fold(1u128, |acc, v| acc.saturating_mul(v.cardinality as u128))
    }

    /// Same model with a different ħ.
    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        let mut spec = self.to_spec();
        spec.hbar = Some(hbar);
        Self::validate(spec)
    }

    /// Converts back to the serializable document.
    pub fn to_spec(&self) -> ProblemFile {
        let name = |v: usize| self.variables[v].name.clone();
        let agents = self
            .agents
            .iter()
            .map(|a| {
                let objective = match &a.objective {
                    AgentObjective::DenseEnergy(t) | AgentObjective::DenseUtility(t) => {
                        ObjectiveSpec::Dense(DenseSpec {
                            order: t.axes.iter().map(|&v| name(v)).collect(),
                            values: t.values.clone(),
                        })
                    }
                    AgentObjective::PairwiseEnergy(terms) => ObjectiveSpec::Pairwise(
                        terms
                            .iter()
                            .map(|t| PairwiseSpec {
                                with: name(t.other),
                                table: t.table.chunks(t.other_cardinality).map(<[f64]>::to_vec).collect(),
                            })
                            .collect(),
                    ),
                };
                AgentSpec {
                    name: a.name.clone(),
                    acts_on: name(a.variable),
                    objective,
                }
            })
            .collect();
        ProblemFile {
            hbar: Some(self.hbar),
            mode: self.mode,
            variables: self.variables.clone(),
            agents,
        }
    }

    /// Replaces every pairwise objective by its dense equivalent.
    pub fn densified(&self) -> Result<Self> {
        let mut spec = self.to_spec();
        for a in &mut spec.agents {
            if let ObjectiveSpec::Pairwise(terms) = &a.objective {
                a.objective = ObjectiveSpec::Dense(densify(&a.acts_on, terms, &spec.variables)?);
            }
        }
        Self::validate(spec)
    }

    /// Utility-mode equivalent `u_i = exp(-E_i/ħ)` of an energy-mode model.
    pub fn to_utility(&self) -> Result<Self> {
        if self.mode == Mode::Utility {
            return Ok(self.clone());
        }
        let mut spec = self.densified()?.to_spec();
        for a in &mut spec.agents {
            if let ObjectiveSpec::Dense(d) = &a.objective {
                a.objective = ObjectiveSpec::Dense(energy_to_utility(d, self.hbar));
            }
        }
        spec.mode = Mode::Utility;
        Self::validate(spec)
    }
}

fn resolve_dense(
    d: &DenseSpec,
    own: usize,
    variables: &[DomainSpec],
    var_index: &HashMap<&str, usize>,
    at: &str,
    mode: Mode,
    errs: &mut Vec<Violation>,
) -> Option<DenseTensor> {
    let before = errs.len();
    let mut axes = Vec::with_capacity(d.order.len());
    let mut seen = HashSet::new();
    for (k, name) in d.order.iter().enumerate() {
        match var_index.get(name.as_str()) {
            Some(&v) => {
                if !seen.insert(v) {
                    errs.push(Violation::new(
                        format!("{at}.objective.dense.order[{k}]"),
                        format!("duplicate variable `{name}`"),
                    ));
                }
                axes.push(v);
            }
            None => errs.push(Violation::new(
                format!("{at}.objective.dense.order[{k}]"),
                format!("unknown variable `{name}`"),
            )),
        }
    }
    if !seen.contains(&own) && errs.len() == before {
        errs.push(Violation::new(
            format!("{at}.objective.dense.order"),
            format!("must contain the agent's own variable `{}`", variables[own].name),
        ));
    }
    if errs.len() != before {
        return None;
    }
    let dims: Vec<usize> = axes.iter().map(|&v| variables[v].cardinality).collect();
    let expected = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    if expected != Some(d.values.len()) {
        errs.push(Violation::new(
            format!("{at}.objective.dense.values"),
            format!(
                "expected {} values (product of cardinalities {:?}), got {}",
                expected.map_or_else(|| "too many".to_string(), |e| e.to_string()),
                dims,
                d.values.len()
            ),
        ));
        return None;
    }
    check_values(&d.values, mode, &format!("{at}.objective.dense.values"), errs);
    (errs.len() == before).then(|| DenseTensor {
        axes,
        dims,
        values: d.values.clone(),
    })
}

fn check_values(values: &[f64], mode: Mode, field: &str, errs: &mut Vec<Violation>) {
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        errs.push(Violation::new(format!("{field}[{k}]"), "must be finite"));
    }
    if mode == Mode::Utility {
        if let Some(k) = values.iter().position(|&v| v < 0.0) {
            errs.push(Violation::new(
                format!("{field}[{k}]"),
                format!("utilities must be nonnegative, got {}", values[k]),
            ));
        }
    }
}

fn resolve_pairwise(
    terms: &[PairwiseSpec],
    own: usize,
    variables: &[DomainSpec],
    var_index: &HashMap<&str, usize>,
    at: &str,
    errs: &mut Vec<Violation>,
) -> Option<Vec<PairwiseTerm>> {
    let before = errs.len();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(terms.len());
    for (k, term) in terms.iter().enumerate() {
        let field = format!("{at}.objective.pairwise[{k}]");
        let Some(&other) = var_index.get(term.with.as_str()) else {
            errs.push(Violation::new(format!("{field}.with"), format!("unknown variable `{}`", term.with)));
            continue;
        };
        if other == own {
            errs.push(Violation::new(format!("{field}.with"), "must name a variable other than the agent's own"));
            continue;
        }
        if !seen.insert(other) {
            errs.push(Violation::new(format!("{field}.with"), format!("duplicate term for `{}`", term.with)));
            continue;
        }
        let (rows, cols) = (variables[own].cardinality, variables[other].cardinality);
        if term.table.len() != rows || term.table.iter().any(|r| r.len() != cols) {
            errs.push(Violation::new(
                format!("{field}.table"),
                format!("expected a {rows}x{cols} table"),
            ));
            continue;
        }
        let table: Vec<f64> = term.table.concat();
        check_values(&table, Mode::Energy, &format!("{field}.table"), errs);
        out.push(PairwiseTerm {
            other,
            own_cardinality: rows,
            other_cardinality: cols,
            table,
        });
    }
    (errs.len() == before).then_some(out)
}

/// `u = exp(-E/ħ)` elementwise; the table layout is unchanged.
pub fn energy_to_utility(objective: &DenseSpec, hbar: f64) -> DenseSpec {
    DenseSpec {
        order: objective.order.clone(),
        values: objective.values.iter().map(|e| (-e / hbar).exp()).collect(),
    }
}

/// Dense table of `E(x) = Σ_j E_j(x_own, x_j)` over `[own, term variables...]`.
pub fn densify(own: &str, terms: &[PairwiseSpec], variables: &[DomainSpec]) -> Result<DenseSpec> {
    let card = |name: &str| {
        variables
            .iter()
            .find(|v| v.name == name)
            .map(|v| v.cardinality)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    };
    let mut order = vec![own.to_string()];
    let mut dims = vec![card(own)?];
    for t in terms {
        order.push(t.with.clone());
        dims.push(card(&t.with)?);
        if t.table.len() != dims[0] || t.table.iter().any(|r| r.len() != *dims.last().unwrap()) {
            return Err(Error::Shape(format!("pairwise table for `{}`", t.with)));
        }
    }
    let size: usize = dims.iter().product();
    let mut values = vec![0.0; size];
    let mut idx = vec![0usize; dims.len()];
    for value in values.iter_mut() {
        *value = terms
            .iter()
            .enumerate()
            .map(|(k, t)| t.table[idx[0]][idx[k + 1]])
            .sum();
        advance(&mut idx, &dims);
    }
    Ok(DenseSpec { order, values })
}

/// Mixed-radix odometer; returns false when it wraps past the last assignment.
pub(crate) fn advance(idx: &mut [usize], dims: &[usize]) -> bool {
    for k in (0..dims.len()).rev() {
        idx[k] += 1;
        if idx[k] < dims[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// Small library of standard games used by tests, examples and the CLI.
pub mod games {
    use super::*;

    fn two_player(mode: Mode, names: [&str; 2], u1: [f64; 4], u2: [f64; 4]) -> ProblemFile {
        let vars = ["x1", "x2"];
        ProblemFile {
            hbar: None,
            mode,
            variables: vars
                .iter()
                .map(|v| DomainSpec {
                    name: v.to_string(),
                    cardinality: 2,
                })
                .collect(),
            agents: names
                .iter()
                .zip(vars)
                .zip([u1, u2])
                .map(|((name, var), u)| AgentSpec {
                    name: name.to_string(),
                    acts_on: var.to_string(),
                    objective: ObjectiveSpec::Dense(DenseSpec {
                        order: vars.iter().map(|s| s.to_string()).collect(),
                        values: u.to_vec(),
                    }),
                })
                .collect(),
        }
    }

    /// Generic 2×2 game from the two payoff matrices `u1[x1][x2]`, `u2[x1][x2]`.
    pub fn bimatrix(mode: Mode, u1: [[f64; 2]; 2], u2: [[f64; 2]; 2]) -> ProblemFile {
        let flat = |m: [[f64; 2]; 2]| [m[0][0], m[0][1], m[1][0], m[1][1]];
        two_player(mode, ["row", "col"], flat(u1), flat(u2))
    }

    /// Prisoner's dilemma with action 0 = cooperate, 1 = defect.
    pub fn prisoners_dilemma(t: f64, r: f64, p: f64, s: f64) -> ProblemFile {
        two_player(
            Mode::Utility,
            ["player1", "player2"],
            [r, s, t, p],
            [r, t, s, p],
        )
    }

    /// Matching pennies shifted to payoffs in {1, 2}.
    pub fn matching_pennies() -> ProblemFile {
        two_player(
            Mode::Utility,
            ["matcher", "mismatcher"],
            [2.0, 1.0, 1.0, 2.0],
            [1.0, 2.0, 2.0, 1.0],
        )
    }

    /// Both players get 1 on agreement and 0 otherwise.
    pub fn coordination() -> ProblemFile {
        two_player(
            Mode::Utility,
            ["player1", "player2"],
            [1.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 1.0],
        )
    }

    /// Energy 0 on agreement and 1 on disagreement, for both agents.
    pub fn agreement_energy() -> ProblemFile {
        two_player(
            Mode::Energy,
            ["agent1", "agent2"],
            [0.0, 1.0, 1.0, 0.0],
            [0.0, 1.0, 1.0, 0.0],
        )
    }

    /// One agent minimizing the given energies.
    pub fn single_agent(energies: &[f64], hbar: f64) -> ProblemFile {
        ProblemFile {
            hbar: Some(hbar),
            mode: Mode::Energy,
            variables: vec![DomainSpec {
                name: "x".into(),
                cardinality: energies.len(),
            }],
            agents: vec![AgentSpec {
                name: "agent".into(),
                acts_on: "x".into(),
                objective: ObjectiveSpec::Dense(DenseSpec {
                    order: vec!["x".into()],
                    values: energies.to_vec(),
                }),
            }],
        }
    }
}
