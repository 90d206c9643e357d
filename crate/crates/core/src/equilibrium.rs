//! ε-approximate Nash certification, pure-Nash enumeration and the α sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete_dynamics::{iterate_to_fixed_point, IterationConfig, StrategyProfile};
use crate::error::{Error, Result};
use crate::model::{advance, GameModel, Mode};

/// Largest joint-assignment count [`enumerate_pure_nash`] will scan.
pub const MAX_PURE_PROFILES: u128 = 1_000_000;

fn require_utility(model: &GameModel) -> Result<()> {
    match model.mode() {
        Mode::Utility => Ok(()),
        Mode::Energy => Err(Error::WrongMode { expected: "utility" }),
    }
}

fn joint_dims(model: &GameModel) -> Vec<usize> {
    model.variables().iter().map(|v| v.cardinality).collect()
}

/// Expected objective of `agent` under the product distribution `profile`.
fn expectation(model: &GameModel, profile: &StrategyProfile, agent: usize) -> f64 {
    let dims = joint_dims(model);
    let owner = model.agent_of_variable();
    let a = model.agent(agent);
    let mut x = vec![0usize; dims.len()];
    let mut total = 0.0;
    loop {
        let w: f64 = x.iter().enumerate().map(|(v, &xv)| profile.agent(owner[v])[xv]).product();
        if w != 0.0 {
            total += w * a.objective_at(&x);
        }
        if !advance(&mut x, &dims) {
            break;
        }
    }
    total
}

/// `Σ_x u_agent(x) Π_j p_j(x_j)` by exact enumeration.
pub fn expected_payoff(model: &GameModel, profile: &StrategyProfile, agent: usize) -> Result<f64> {
    require_utility(model)?;
    profile.check_shape(model)?;
    if agent >= model.num_agents() {
        return Err(Error::InvalidArgument(format!("agent index {agent} out of range")));
    }
    Ok(expectation(model, profile, agent))
}

/// Expected energy of `agent`; the energy-mode counterpart of [`expected_payoff`].
pub fn expected_energy(model: &GameModel, profile: &StrategyProfile, agent: usize) -> Result<f64> {
    if model.mode() != Mode::Energy {
        return Err(Error::WrongMode { expected: "energy" });
    }
    profile.check_shape(model)?;
    Ok(expectation(model, profile, agent))
}

/// Payoff of every pure action of `agent` against the others' mixed strategies.
fn pure_action_payoffs(model: &GameModel, profile: &StrategyProfile, agent: usize) -> Vec<f64> {
    let dims = joint_dims(model);
    let owner = model.agent_of_variable();
    let a = model.agent(agent);
    let mut out = vec![0.0; model.cardinality(agent)];
    let mut x = vec![0usize; dims.len()];
    loop {
        let w: f64 = x
            .iter()
            .enumerate()
            .filter(|&(v, _)| v != a.variable)
            .map(|(v, &xv)| profile.agent(owner[v])[xv])
            .product();
        if w != 0.0 {
            out[x[a.variable]] += w * a.objective_at(&x);
        }
        if !advance(&mut x, &dims) {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCertificate {
    pub epsilon: f64,
    /// Best pure-deviation gain per agent, clamped at 0.
    pub gains: Vec<f64>,
    pub best_actions: Vec<usize>,
}

/// Largest payoff gain any agent can obtain by a unilateral pure deviation.
pub fn epsilon_of_profile(model: &GameModel, profile: &StrategyProfile) -> Result<EpsilonCertificate> {
    require_utility(model)?;
    profile.check_shape(model)?;
    let mut gains = Vec::with_capacity(model.num_agents());
    let mut best_actions = Vec::with_capacity(model.num_agents());
    for i in 0..model.num_agents() {
        let payoffs = pure_action_payoffs(model, profile, i);
        let current: f64 = payoffs.iter().zip(profile.agent(i)).map(|(u, p)| u * p).sum();
        let best = crate::discrete_dynamics::argmax_lowest(&payoffs);
        gains.push((payoffs[best] - current).max(0.0));
        best_actions.push(best);
    }
    Ok(EpsilonCertificate {
        epsilon: gains.iter().copied().fold(0.0, f64::max),
        gains,
        best_actions,
    })
}

/// Every pure profile (actions indexed by agent) at which no agent has a
/// strictly improving unilateral deviation.
pub fn enumerate_pure_nash(model: &GameModel) -> Result<Vec<Vec<usize>>> {
    require_utility(model)?;
    let size = model.joint_size();
    if size > MAX_PURE_PROFILES {
        return Err(Error::TooLarge(size));
    }
    let dims = joint_dims(model);
    let mut x = vec![0usize; dims.len()];
    let mut out = Vec::new();
    loop {
        let stable = model.agents().iter().all(|a| {
            let current = a.objective_at(&x);
            let mut y = x.clone();
            (0..dims[a.variable]).all(|alt| {
                y[a.variable] = alt;
                a.objective_at(&y) <= current
            })
        });
        if stable {
            out.push(model.agents().iter().map(|a| x[a.variable]).collect());
        }
        if !advance(&mut x, &dims) {
            break;
        }
    }
    Ok(out)
}

/// Exhaustive minimum of the summed energy `Σ_i E_i(x)` and one minimizer.
pub fn global_minimum(model: &GameModel) -> Result<(f64, Vec<usize>)> {
    if model.mode() != Mode::Energy {
        return Err(Error::WrongMode { expected: "energy" });
    }
    let size = model.joint_size();
    if size > MAX_PURE_PROFILES {
        return Err(Error::TooLarge(size));
    }
    let dims = joint_dims(model);
    let mut x = vec![0usize; dims.len()];
    let mut best = (f64::INFINITY, x.clone());
    loop {
        let e = total_energy(model, &x);
        if e < best.0 {
            best = (e, x.clone());
        }
        if !advance(&mut x, &dims) {
            break;
        }
    }
    Ok(best)
}

fn total_energy(model: &GameModel, x: &[usize]) -> f64 {
    model.agents().iter().map(|a| a.objective_at(x)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    /// Runs per α; restart 0 starts uniform, restart `r > 0` from
    /// `StrategyProfile::random(base_seed + r)`.
    pub restarts: usize,
    pub base_seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alphas: Vec::new(),
            restarts: 1,
            base_seed: 0,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// One (α, seed) cell. Empty optional fields serialize as empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    /// Utility models only.
    pub epsilon: Option<f64>,
    /// Mean expected payoff (utility) or mean negated expected energy (energy).
    pub welfare: Option<f64>,
    /// Energy models only.
    pub global_hit: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub const HEADER: [&'static str; 7] = ["alpha", "seed", "converged", "iterations", "epsilon", "welfare", "global_hit"];

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(Self::HEADER)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?;
        Ok(Self { rows })
    }
}

/// Runs the fixed-point iteration for every (α, restart) cell. Cells run in
/// parallel and are returned in (α order, restart order). A failing cell is
/// recorded as non-converged with empty statistics.
pub fn alpha_sweep(model: &GameModel, config: &SweepConfig) -> Result<SweepReport> {
    if config.alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha grid is empty".into()));
    }
    if let Some(a) = config.alphas.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {a}")));
    }
    if config.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let optimum = match model.mode() {
        Mode::Energy if model.joint_size() <= MAX_PURE_PROFILES => Some(global_minimum(model)?.0),
        _ => None,
    };
    let cells: Vec<(f64, usize)> = config
        .alphas
        .iter()
        .flat_map(|&a| (0..config.restarts).map(move |r| (a, r)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(alpha, restart)| sweep_cell(model, config, alpha, restart, optimum))
        .collect();
    Ok(SweepReport { rows })
}

fn sweep_cell(model: &GameModel, config: &SweepConfig, alpha: f64, restart: usize, optimum: Option<f64>) -> SweepRow {
    let seed = config.base_seed.wrapping_add(restart as u64);
    let init = if restart == 0 {
        StrategyProfile::uniform(model)
    } else {
        StrategyProfile::random(model, seed)
    };
    let iteration = IterationConfig {
        alpha,
        tol: config.tol,
        max_iter: config.max_iter,
        record_trace: false,
    };
    let failed = SweepRow {
        alpha,
        seed,
        converged: false,
        iterations: 0,
        epsilon: None,
        welfare: None,
        global_hit: None,
    };
    let Ok((result, _)) = iterate_to_fixed_point(model, &iteration, &init) else {
        return failed;
    };
    let n = model.num_agents() as f64;
    let p = &result.profile;
    let (epsilon, welfare, global_hit) = match model.mode() {
        Mode::Utility => {
            let eps = epsilon_of_profile(model, p).ok().map(|c| c.epsilon);
            let w = (0..model.num_agents()).map(|i| expectation(model, p, i)).sum::<f64>() / n;
            (eps, Some(w), None)
        }
        Mode::Energy => {
            let w = -(0..model.num_agents()).map(|i| expectation(model, p, i)).sum::<f64>() / n;
            let hit = optimum.map(|best| {
                let decoded = decode_assignment(model, &p.argmax());
                total_energy(model, &decoded) <= best + 1e-12 * (1.0 + best.abs())
            });
            (None, Some(w), hit)
        }
    };
    SweepRow {
        converged: result.converged,
        iterations: result.iterations,
        epsilon,
        welfare,
        global_hit,
        ..failed
    }
}

/// Per-agent actions to a joint assignment indexed by variable.
fn decode_assignment(model: &GameModel, actions: &[usize]) -> Vec<usize> {
    let mut x = vec![0; model.variables().len()];
    for (a, &act) in model.agents().iter().zip(actions) {
        x[a.variable] = act;
    }
    x
}
