//! Discrete-time expected-return iteration.
//!
//! One synchronous step maps a strategy profile `p(t-1)` to
//!
//! ```text
//! Ψ_i(x_i) = Σ_{x without x_i} w_i(x) · Π_{j≠i} p_j(x_j, t-1)
//! p_i(x_i, t) = Ψ_i(x_i)^α / Σ_{x_i'} Ψ_i(x_i')^α
//! ```
//!
//! with `w_i = exp(-E_i/ħ)` for energy models and `w_i = u_i` for utility
//! models. All sums are carried out in the log domain, so small ħ and large α
//! neither overflow nor underflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{advance, AgentObjective, GameModel, Mode};
use crate::numerics::log_sum_exp;
use crate::rng::SeededRng;

/// α at or above this value is treated as the best-response limit.
pub const ALPHA_CAP: f64 = 1e6;

/// Relative Ψ tolerance for ties in the best-response limit.
pub const TIE_TOL: f64 = 1e-15;

/// Tolerance on `Σ p = 1` accepted from callers.
pub const PROFILE_SUM_TOL: f64 = 1e-12;

/// One probability distribution per agent over its own actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    probs: Vec<Vec<f64>>,
}

impl StrategyProfile {
    /// Checks nonnegativity and `Σ p = 1` (within `1e-12`) for every agent.
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        for (i, p) in probs.iter().enumerate() {
            if p.is_empty() || p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "agent {i}: probabilities must be finite and nonnegative"
                )));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > PROFILE_SUM_TOL {
                return Err(Error::InvalidArgument(format!("agent {i}: probabilities sum to {s}, not 1")));
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(model: &GameModel) -> Self {
        Self {
            probs: model.cardinalities().iter().map(|&c| vec![1.0 / c as f64; c]).collect(),
        }
    }

    /// Normalized positive pseudo-random distributions drawn with [`SeededRng`],
    /// agent by agent and action by action.
    pub fn random(model: &GameModel, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let probs = model
            .cardinalities()
            .iter()
            .map(|&c| {
                let raw: Vec<f64> = (0..c).map(|_| rng.unit_open_closed()).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|x| x / s).collect()
            })
            .collect();
        Self { probs }
    }

    /// Point mass on one action per agent.
    pub fn pure(model: &GameModel, actions: &[usize]) -> Result<Self> {
        let cards = model.cardinalities();
        if actions.len() != cards.len() || actions.iter().zip(&cards).any(|(a, c)| a >= c) {
            return Err(Error::Shape("pure profile does not match the model".into()));
        }
        Ok(Self {
            probs: cards
                .iter()
                .zip(actions)
                .map(|(&c, &a)| (0..c).map(|k| if k == a { 1.0 } else { 0.0 }).collect())
                .collect(),
        })
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    pub fn agents(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.probs
    }

    pub fn check_shape(&self, model: &GameModel) -> Result<()> {
        let cards = model.cardinalities();
        if self.probs.len() != cards.len() || self.probs.iter().zip(&cards).any(|(p, &c)| p.len() != c) {
            return Err(Error::Shape(format!(
                "profile has {} agents with sizes {:?}, model expects {:?}",
                self.probs.len(),
                self.probs.iter().map(Vec::len).collect::<Vec<_>>(),
                cards
            )));
        }
        Ok(())
    }

    /// ∞-norm of the difference over all agents and actions.
    pub fn max_change(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .flatten()
            .zip(other.probs.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Per-agent argmax, lowest index on ties.
    pub fn argmax(&self) -> Vec<usize> {
        self.probs.iter().map(|p| argmax_lowest(p)).collect()
    }
}

pub(crate) fn argmax_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// Per-agent expected returns `Ψ_i(x_i)`, stored as logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedReturnField {
    log_psi: Vec<Vec<f64>>,
}

impl ExpectedReturnField {
    pub fn from_log(log_psi: Vec<Vec<f64>>) -> Self {
        Self { log_psi }
    }

    pub fn log_values(&self) -> &[Vec<f64>] {
        &self.log_psi
    }

    /// Linear-domain values.
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.log_psi.iter().map(|a| a.iter().map(|v| v.exp()).collect()).collect()
    }
}

fn log_weight(mode: Mode, hbar: f64, value: f64) -> f64 {
    match mode {
        Mode::Energy => -value / hbar,
        Mode::Utility => value.ln(),
    }
}

fn log_probs(profile: &StrategyProfile) -> Vec<Vec<f64>> {
    profile.probs.iter().map(|p| p.iter().map(|x| x.ln()).collect()).collect()
}

/// Exact-enumeration expected returns for models with dense objectives.
///
/// Only the variables an objective mentions are enumerated; every other
/// variable sums out to `Σ p_j = 1`.
pub fn expected_return_update(model: &GameModel, profile: &StrategyProfile) -> Result<ExpectedReturnField> {
    profile.check_shape(model)?;
    let logp = log_probs(profile);
    let owner = model.agent_of_variable();
    let mut out = Vec::with_capacity(model.num_agents());
    for i in 0..model.num_agents() {
        out.push(dense_log_returns(model, i, &logp, &owner)?);
    }
    Ok(ExpectedReturnField { log_psi: out })
}

fn dense_log_returns(model: &GameModel, i: usize, logp: &[Vec<f64>], owner: &[usize]) -> Result<Vec<f64>> {
    let agent = model.agent(i);
    let tensor = match &agent.objective {
        AgentObjective::DenseEnergy(t) | AgentObjective::DenseUtility(t) => t,
        AgentObjective::PairwiseEnergy(_) => {
            return Err(Error::InvalidArgument(format!(
                "agent `{}` has a pairwise objective; densify the model or use the factorized update",
                agent.name
            )))
        }
    };
    let own_axis = tensor.axes.iter().position(|&v| v == agent.variable).expect("validated");
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); model.cardinality(i)];
    let mut idx = vec![0usize; tensor.dims.len()];
    for &value in &tensor.values {
        let mut log_term = log_weight(model.mode(), model.hbar(), value);
        for (k, (&axis, &action)) in tensor.axes.iter().zip(&idx).enumerate() {
            if k != own_axis {
                log_term += logp[owner[axis]][action];
            }
        }
        terms[idx[own_axis]].push(log_term);
        advance(&mut idx, &tensor.dims);
    }
    terms.iter().map(|t| log_sum_exp(t)).collect()
}

/// Expected returns for pairwise energies, one term at a time:
/// `ln Ψ_i(x_i) = Σ_j ln Σ_{x_j} exp(-E_ij(x_i, x_j)/ħ) p_j(x_j)`.
pub fn expected_return_update_factorized(
    model: &GameModel,
    profile: &StrategyProfile,
) -> Result<ExpectedReturnField> {
    profile.check_shape(model)?;
    let logp = log_probs(profile);
    let owner = model.agent_of_variable();
    let mut out = Vec::with_capacity(model.num_agents());
    for i in 0..model.num_agents() {
        out.push(pairwise_log_returns(model, i, &logp, &owner)?);
    }
    Ok(ExpectedReturnField { log_psi: out })
}

fn pairwise_log_returns(model: &GameModel, i: usize, logp: &[Vec<f64>], owner: &[usize]) -> Result<Vec<f64>> {
    let agent = model.agent(i);
    let AgentObjective::PairwiseEnergy(terms) = &agent.objective else {
        return Err(Error::InvalidArgument(format!(
            "agent `{}` does not have a pairwise objective",
            agent.name
        )));
    };
    let hbar = model.hbar();
    let mut log_psi = vec![0.0; model.cardinality(i)];
    let mut buf = Vec::new();
    for term in terms {
        let lp = &logp[owner[term.other]];
        for (own, acc) in log_psi.iter_mut().enumerate() {
            buf.clear();
            buf.extend(lp.iter().enumerate().map(|(o, l)| -term.at(own, o) / hbar + l));
            *acc += log_sum_exp(&buf)?;
        }
    }
    Ok(log_psi)
}

/// Picks the factorized path for pairwise agents and enumeration otherwise.
pub fn expected_returns(model: &GameModel, profile: &StrategyProfile) -> Result<ExpectedReturnField> {
    profile.check_shape(model)?;
    let logp = log_probs(profile);
    let owner = model.agent_of_variable();
    let log_psi = (0..model.num_agents())
        .map(|i| match model.agent(i).objective {
            AgentObjective::PairwiseEnergy(_) => pairwise_log_returns(model, i, &logp, &owner),
            _ => dense_log_returns(model, i, &logp, &owner),
        })
        .collect::<Result<_>>()?;
    Ok(ExpectedReturnField { log_psi })
}

/// `p_i ∝ Ψ_i^α`, normalized in the log domain.
///
/// α at or above [`ALPHA_CAP`] yields the best response: a point mass on the
/// largest Ψ, lowest action index among values within [`TIE_TOL`] relative.
pub fn normalize_policy(field: &ExpectedReturnField, alpha: f64) -> Result<StrategyProfile> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let mut probs = Vec::with_capacity(field.log_psi.len());
    for (i, log_psi) in field.log_psi.iter().enumerate() {
        let best = log_psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY || log_psi.iter().any(|v| v.is_nan()) {
            return Err(Error::DegenerateReturns { agent: i });
        }
        if alpha >= ALPHA_CAP {
            let cutoff = best + (1.0 - TIE_TOL).ln();
            let winner = log_psi.iter().position(|&v| v >= cutoff).expect("max is present");
            probs.push((0..log_psi.len()).map(|k| if k == winner { 1.0 } else { 0.0 }).collect());
            continue;
        }
        // shift by the largest exponent, then normalize in linear domain
        let weights: Vec<f64> = log_psi.iter().map(|v| (alpha * (v - best)).exp()).collect();
        let z: f64 = weights.iter().sum();
        probs.push(weights.iter().map(|w| w / z).collect());
    }
    Ok(StrategyProfile { probs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Keep every step's profile and field in the trace.
    pub record_trace: bool,
}

impl IterationConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            tol: 1e-10,
            max_iter: 10_000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub max_change: f64,
    /// Present when the trace was recorded in full.
    pub profile: Option<StrategyProfile>,
    pub field: Option<ExpectedReturnField>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub steps: Vec<TraceStep>,
}

impl IterationTrace {
    /// `step,max_change` rows.
    pub fn write_summary_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "max_change"])?;
        for s in &self.steps {
            w.write_record([s.step.to_string(), s.max_change.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Long format `step,agent,action,p,psi`; needs a fully recorded trace.
    pub fn write_detail_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "agent", "action", "p", "psi"])?;
        for s in &self.steps {
            let (Some(profile), Some(field)) = (&s.profile, &s.field) else {
                return Err(Error::InvalidArgument("trace was recorded without detail".into()));
            };
            for (i, (p, psi)) in profile.agents().iter().zip(field.values()).enumerate() {
                for (a, (p, psi)) in p.iter().zip(psi).enumerate() {
                    w.write_record([
                        s.step.to_string(),
                        i.to_string(),
                        a.to_string(),
                        p.to_string(),
                        psi.to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub profile: StrategyProfile,
    pub converged: bool,
    pub iterations: usize,
    pub max_change: f64,
    /// Ψ evaluated at the final profile.
    pub field: ExpectedReturnField,
}

/// Runs the synchronous map from `init` until the profile moves by at most
/// `tol` in ∞-norm, or `max_iter` steps. Not converging is reported through
/// [`FixedPointResult::converged`], not as an error.
pub fn iterate_to_fixed_point(
    model: &GameModel,
    config: &IterationConfig,
    init: &StrategyProfile,
) -> Result<(FixedPointResult, IterationTrace)> {
    if !(config.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {}", config.tol)));
    }
    if config.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    init.check_shape(model)?;

    let mut trace = IterationTrace::default();
    let mut current = init.clone();
    let mut change = f64::INFINITY;
    let mut steps = 0;
    while steps < config.max_iter {
        steps += 1;
        let field = expected_returns(model, &current).map_err(|e| at_step(e, steps))?;
        let next = normalize_policy(&field, config.alpha).map_err(|e| at_step(e, steps))?;
        if next.probs.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                step: steps,
                what: "strategy profile".into(),
            });
        }
        change = next.max_change(&current);
        trace.steps.push(TraceStep {
            step: steps,
            max_change: change,
            profile: config.record_trace.then(|| next.clone()),
            field: config.record_trace.then_some(field),
        });
        current = next;
        if change <= config.tol {
            break;
        }
    }
    let field = expected_returns(model, &current)?;
    Ok((
        FixedPointResult {
            converged: change <= config.tol,
            iterations: steps,
            max_change: change,
            profile: current,
            field,
        },
        trace,
    ))
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::DegenerateReturns { agent } => Error::NonFinite {
            step,
            what: format!("agent {agent} has no positive expected return"),
        },
        other => other,
    }
}
