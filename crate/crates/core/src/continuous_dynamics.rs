//! Continuous-time (dissipative) wavefunction dynamics.
//!
//! Each agent carries a real unit vector `ψ_i` over its actions and evolves by
//!
//! ```text
//! -ħ dψ_i/dt = H_i ψ_i
//! ```
//!
//! either with a fixed symmetric operator ([`evolve_linear`]) or with the
//! effective Hamiltonian `H_i = diag(e_i)`, `e_i(x_i) = E[E_i | x_i]` under the
//! other agents' `|ψ_j|²` ([`evolve_coupled`]). Every RK4 step is followed by
//! renormalization, so the flow is projective: its fixed points are exactly the
//! eigenvectors of `H_i`, and high-energy components are damped, driving
//! generic states to the ground state.

use crate::error::{Error, Result};
use crate::model::{advance, AgentObjective, GameModel, Mode};
use crate::numerics::{dot, norm2, rk4_step, HermitianOperator};
use crate::rng::SeededRng;

/// Accepted deviation of an initial state from unit norm.
pub const INITIAL_NORM_TOL: f64 = 1e-10;

/// Real unit vectors, one per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    amplitudes: Vec<Vec<f64>>,
}

impl WaveState {
    /// Checks finiteness and unit norm (within [`INITIAL_NORM_TOL`]), then
    /// renormalizes unless the norm is already 1 to rounding.
    pub fn new(amplitudes: Vec<Vec<f64>>) -> Result<Self> {
        let mut amplitudes = amplitudes;
        for (i, psi) in amplitudes.iter_mut().enumerate() {
            if psi.is_empty() || psi.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("agent {i}: amplitudes must be finite")));
            }
            let n = norm2(psi);
            if (n - 1.0).abs() > INITIAL_NORM_TOL {
                return Err(Error::InvalidArgument(format!("agent {i}: state has norm {n}, expected 1")));
            }
            if (n - 1.0).abs() > 4.0 * f64::EPSILON {
                psi.iter_mut().for_each(|v| *v /= n);
            }
        }
        Ok(Self { amplitudes })
    }

    /// Uniform amplitudes `1/√cardinality` for every agent.
    pub fn uniform(cardinalities: &[usize]) -> Self {
        Self {
            amplitudes: cardinalities
                .iter()
                .map(|&c| vec![1.0 / (c as f64).sqrt(); c])
                .collect(),
        }
    }

    /// Normalized draws from `(-1, 1]` (see [`crate::rng`]).
    pub fn random(cardinalities: &[usize], seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        Self {
            amplitudes: cardinalities
                .iter()
                .map(|&c| {
                    let v: Vec<f64> = (0..c).map(|_| rng.symmetric()).collect();
                    let n = norm2(&v);
                    v.into_iter().map(|x| x / n).collect()
                })
                .collect(),
        }
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.amplitudes[i]
    }

    pub fn agents(&self) -> &[Vec<f64>] {
        &self.amplitudes
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.amplitudes
    }

    /// `|ψ_i|²` for every agent.
    pub fn densities(&self) -> Vec<Vec<f64>> {
        self.amplitudes.iter().map(|a| a.iter().map(|v| v * v).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    /// Rayleigh quotient `⟨ψ|H|ψ⟩`.
    pub lambda: f64,
    /// `||Hψ - λψ||₂`, restricted to the deflated subspace when deflating.
    pub residual: f64,
    /// Index into an oracle's ascending eigenvalues, filled by
    /// [`StationaryReport::match_oracle`].
    pub matched_eigenvalue_index: Option<usize>,
    pub evolution_time: f64,
}

impl StationaryReport {
    pub fn match_oracle(&mut self, oracle: &crate::numerics::EigenDecomposition, tol: f64) {
        self.matched_eigenvalue_index = oracle.match_eigenvalue(self.lambda, tol);
    }
}

/// Returns `(λ, ||Hψ − λψ||₂)` with `λ = ⟨ψ|H|ψ⟩`.
pub fn stationarity_check(h: &HermitianOperator, psi: &[f64]) -> Result<(f64, f64)> {
    if psi.len() != h.dim() {
        return Err(Error::Shape(format!("state has {} entries, operator is {}x{0}", psi.len(), h.dim())));
    }
    let hpsi = h.apply(psi);
    Ok(rayleigh_residual(&hpsi, psi, &[]))
}

/// λ and residual from a precomputed `Hψ`, projecting the residual off `deflate`.
fn rayleigh_residual(hpsi: &[f64], psi: &[f64], deflate: &[Vec<f64>]) -> (f64, f64) {
    let lambda = dot(psi, hpsi);
    let mut r: Vec<f64> = hpsi.iter().zip(psi).map(|(h, p)| h - lambda * p).collect();
    project_out(&mut r, deflate);
    (lambda, norm2(&r))
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

/// Diagonal operator `e_i(x_i) = Σ_{x without x_i} E_i(x) Π_{j≠i} |ψ_j(x_j)|²`.
pub fn effective_hamiltonian(model: &GameModel, state: &WaveState, agent: usize) -> Result<HermitianOperator> {
    if model.mode() != Mode::Energy {
        return Err(Error::WrongMode { expected: "energy" });
    }
    check_state_shape(model, state)?;
    if agent >= model.num_agents() {
        return Err(Error::InvalidArgument(format!("agent index {agent} out of range")));
    }
    let densities = state.densities();
    let owner = model.agent_of_variable();
    let a = model.agent(agent);
    let mut diag = vec![0.0; model.cardinality(agent)];
    match &a.objective {
        AgentObjective::DenseEnergy(t) => {
            let own_axis = t.axes.iter().position(|&v| v == a.variable).expect("validated");
            let mut idx = vec![0usize; t.dims.len()];
            for &e in &t.values {
                let w: f64 = t
                    .axes
                    .iter()
                    .zip(&idx)
                    .enumerate()
                    .filter(|&(k, _)| k != own_axis)
                    .map(|(_, (&axis, &action))| densities[owner[axis]][action])
                    .product();
                diag[idx[own_axis]] += e * w;
                advance(&mut idx, &t.dims);
            }
        }
        AgentObjective::PairwiseEnergy(terms) => {
            for term in terms {
                let rho = &densities[owner[term.other]];
                for (own, d) in diag.iter_mut().enumerate() {
                    *d += rho.iter().enumerate().map(|(o, r)| term.at(own, o) * r).sum::<f64>();
                }
            }
        }
        AgentObjective::DenseUtility(_) => unreachable!("energy mode"),
    }
    HermitianOperator::diagonal(diag)
}

fn check_state_shape(model: &GameModel, state: &WaveState) -> Result<()> {
    let cards = model.cardinalities();
    if state.amplitudes.len() != cards.len() || state.amplitudes.iter().zip(&cards).any(|(a, &c)| a.len() != c) {
        return Err(Error::Shape("wave state does not match the model".into()));
    }
    Ok(())
}

/// Standard 1-D Hamiltonian `-½ d²/dx² + V(x)` on a uniform grid with
/// Dirichlet boundaries (second-order central differences).
pub fn build_grid_hamiltonian(xmin: f64, xmax: f64, n_points: usize, potential: &[f64]) -> Result<HermitianOperator> {
    if n_points < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 grid points, got {n_points}")));
    }
    if !(xmin.is_finite() && xmax.is_finite() && xmax > xmin) {
        return Err(Error::InvalidArgument(format!("invalid grid interval [{xmin}, {xmax}]")));
    }
    if potential.len() != n_points {
        return Err(Error::Shape(format!(
            "potential has {} values for {n_points} grid points",
            potential.len()
        )));
    }
    let h = (xmax - xmin) / (n_points - 1) as f64;
    let diag = 1.0 / (h * h);
    let off = -0.5 / (h * h);
    let mut rows = vec![vec![0.0; n_points]; n_points];
    for k in 0..n_points {
        rows[k][k] = diag + potential[k];
        if k + 1 < n_points {
            rows[k][k + 1] = off;
            rows[k + 1][k] = off;
        }
    }
    HermitianOperator::dense(rows)
}

/// Grid coordinates matching [`build_grid_hamiltonian`].
pub fn grid_points(xmin: f64, xmax: f64, n_points: usize) -> Vec<f64> {
    let h = (xmax - xmin) / (n_points - 1) as f64;
    (0..n_points).map(|k| xmin + k as f64 * h).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub hbar: f64,
    /// Step size; `None` picks `0.01·ħ / scale` where `scale` bounds the
    /// spectral radius (Gershgorin).
    pub dt: Option<f64>,
    pub t_max: f64,
    /// Stationarity threshold on the eigen-residual.
    pub tol: f64,
    /// Record a snapshot every this many steps (the initial and final states
    /// are always recorded); 0 records only those two.
    pub record_stride: usize,
    /// Orthonormal vectors projected out of the state after every step
    /// (linear evolution only).
    pub deflate: Vec<Vec<f64>>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            dt: None,
            t_max: 1000.0,
            tol: 1e-8,
            record_stride: 0,
            deflate: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: WaveState,
    pub lambdas: Vec<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub trajectory: Vec<Snapshot>,
    pub reports: Vec<StationaryReport>,
    pub converged: bool,
    pub steps: usize,
    pub dt: f64,
}

impl Evolution {
    pub fn final_state(&self) -> &WaveState {
        &self.trajectory.last().expect("initial state is always recorded").state
    }

    /// `t,agent,action,psi,lambda,residual` rows.
    pub fn write_trajectory_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        write_trajectory_rows(&mut w, &self.trajectory, None)?;
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Writes the header followed by every snapshot; `agent_offset` relabels the
/// agent column (used for stacked deflated states).
pub fn write_trajectory_rows<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    trajectory: &[Snapshot],
    agent_offset: Option<usize>,
) -> Result<()> {
    if agent_offset.unwrap_or(0) == 0 {
        w.write_record(["t", "agent", "action", "psi", "lambda", "residual"])?;
    }
    for s in trajectory {
        for (i, psi) in s.state.agents().iter().enumerate() {
            let agent = i + agent_offset.unwrap_or(0);
            for (a, v) in psi.iter().enumerate() {
                w.write_record([
                    s.t.to_string(),
                    agent.to_string(),
                    a.to_string(),
                    v.to_string(),
                    s.lambdas[i].to_string(),
                    s.residuals[i].to_string(),
                ])?;
            }
        }
    }
    Ok(())
}

fn resolve_dt(opts: &EvolveOptions, scale: f64) -> Result<f64> {
    if !(opts.hbar.is_finite() && opts.hbar > 0.0) {
        return Err(Error::InvalidArgument(format!("hbar must be positive, got {}", opts.hbar)));
    }
    if !(opts.t_max > 0.0 && opts.tol > 0.0) {
        return Err(Error::InvalidArgument("t_max and tol must be positive".into()));
    }
    let dt = match opts.dt {
        Some(dt) => dt,
        None if scale > 0.0 => 0.01 * opts.hbar / scale,
        None => 0.01 * opts.hbar,
    };
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if dt * scale / opts.hbar > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} is too large: dt * spectral radius / hbar = {} > 1",
            dt * scale / opts.hbar
        )));
    }
    Ok(dt)
}

/// Single-operator evolution, advanced one RK4 step at a time.
#[derive(Debug, Clone)]
pub struct LinearFlow<'a> {
    h: &'a HermitianOperator,
    psi: Vec<f64>,
    hbar: f64,
    dt: f64,
    deflate: &'a [Vec<f64>],
    steps: usize,
}

impl<'a> LinearFlow<'a> {
    pub fn new(h: &'a HermitianOperator, psi0: &[f64], opts: &'a EvolveOptions) -> Result<Self> {
        if psi0.len() != h.dim() {
            return Err(Error::Shape(format!("state has {} entries, operator is {}x{0}", psi0.len(), h.dim())));
        }
        for (k, b) in opts.deflate.iter().enumerate() {
            if b.len() != h.dim() {
                return Err(Error::Shape(format!("deflation vector {k} has the wrong length")));
            }
        }
        let dt = resolve_dt(opts, h.gershgorin_radius())?;
        let mut psi = WaveState::new(vec![psi0.to_vec()])?.into_inner().remove(0);
        if !opts.deflate.is_empty() {
            project_out(&mut psi, &opts.deflate);
            let n = norm2(&psi);
            if n < 1e-8 {
                return Err(Error::InvalidArgument(
                    "initial state lies in the span of the deflation vectors".into(),
                ));
            }
            psi.iter_mut().for_each(|v| *v /= n);
        }
        Ok(Self {
            h,
            psi,
            hbar: opts.hbar,
            dt,
            deflate: &opts.deflate,
            steps: 0,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.psi
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `(λ, residual)` of the current state.
    pub fn measure(&self) -> (f64, f64) {
        rayleigh_residual(&self.h.apply(&self.psi), &self.psi, self.deflate)
    }

    pub fn step(&mut self) -> Result<()> {
        let (h, scale) = (self.h, -1.0 / self.hbar);
        let mut next = rk4_step(
            |y, out: &mut [f64]| {
                h.apply_into(y, out);
                out.iter_mut().for_each(|v| *v *= scale);
            },
            &self.psi,
            self.dt,
        )
        .map_err(|e| with_step(e, self.steps + 1))?;
        project_out(&mut next, self.deflate);
        let n = norm2(&next);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NonFinite {
                step: self.steps + 1,
                what: "state norm".into(),
            });
        }
        next.iter_mut().for_each(|v| *v /= n);
        self.psi = next;
        self.steps += 1;
        Ok(())
    }
}

fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { step, what },
        other => other,
    }
}

fn max_steps(t_max: f64, dt: f64) -> usize {
    (t_max / dt).ceil() as usize
}

/// Evolves `psi0` under a fixed operator until `||Hψ − λψ||₂ ≤ tol` or `t_max`.
pub fn evolve_linear(h: &HermitianOperator, psi0: &[f64], opts: &EvolveOptions) -> Result<Evolution> {
    let mut flow = LinearFlow::new(h, psi0, opts)?;
    let limit = max_steps(opts.t_max, flow.dt);
    let mut trajectory = Vec::new();
    let snapshot = |flow: &LinearFlow, (l, r): (f64, f64)| Snapshot {
        t: flow.time(),
        state: WaveState {
            amplitudes: vec![flow.psi.clone()],
        },
        lambdas: vec![l],
        residuals: vec![r],
    };
    let mut m = flow.measure();
    trajectory.push(snapshot(&flow, m));
    while m.1 > opts.tol && flow.steps < limit {
        flow.step()?;
        m = flow.measure();
        if opts.record_stride > 0 && flow.steps.is_multiple_of(opts.record_stride) {
            trajectory.push(snapshot(&flow, m));
        }
    }
    if trajectory.last().map(|s| s.t) != Some(flow.time()) {
        trajectory.push(snapshot(&flow, m));
    }
    Ok(Evolution {
        reports: vec![StationaryReport {
            lambda: m.0,
            residual: m.1,
            matched_eigenvalue_index: None,
            evolution_time: flow.time(),
        }],
        converged: m.1 <= opts.tol,
        steps: flow.steps,
        dt: flow.dt,
        trajectory,
    })
}

/// The `k` lowest stationary states, each found by evolving with every
/// previously found state deflated. The first state starts from `psi0`; later
/// states start from seeded random vectors (`seed + index`) so that symmetry
/// of `psi0` cannot hide an excited state.
pub fn lowest_states(
    h: &HermitianOperator,
    k: usize,
    psi0: &[f64],
    seed: u64,
    opts: &EvolveOptions,
) -> Result<Vec<Evolution>> {
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::with_capacity(k);
    for index in 0..k {
        let start = if index == 0 {
            psi0.to_vec()
        } else {
            WaveState::random(&[h.dim()], seed.wrapping_add(index as u64)).into_inner().remove(0)
        };
        let local = EvolveOptions {
            deflate: found.clone(),
            ..opts.clone()
        };
        let evo = evolve_linear(h, &start, &local)?;
        found.push(evo.final_state().agent(0).to_vec());
        out.push(evo);
    }
    Ok(out)
}

/// Synchronous coupled evolution of all agents under their effective
/// Hamiltonians, rebuilt from the same snapshot at the start of each step.
pub fn evolve_coupled(model: &GameModel, state0: &WaveState, opts: &EvolveOptions) -> Result<Evolution> {
    if model.mode() != Mode::Energy {
        return Err(Error::WrongMode { expected: "energy" });
    }
    check_state_shape(model, state0)?;
    if !opts.deflate.is_empty() {
        return Err(Error::InvalidArgument("deflation is only supported for linear evolution".into()));
    }
    // effective energies are convex combinations of the objective values
    let scale = model
        .agents()
        .iter()
        .map(|a| match &a.objective {
            AgentObjective::DenseEnergy(t) => t.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
            AgentObjective::PairwiseEnergy(terms) => terms
                .iter()
                .map(|t| t.table.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
                .sum(),
            AgentObjective::DenseUtility(_) => 0.0,
        })
        .fold(0.0, f64::max);
    let dt = resolve_dt(opts, scale)?;
    let limit = max_steps(opts.t_max, dt);
    let n = model.num_agents();

    let mut state = WaveState::new(state0.amplitudes.clone())?;
    let mut trajectory = Vec::new();
    let mut steps = 0usize;

    let measure = |state: &WaveState| -> Result<(Vec<HermitianOperator>, Vec<f64>, Vec<f64>)> {
        let hs = (0..n)
            .map(|i| effective_hamiltonian(model, state, i))
            .collect::<Result<Vec<_>>>()?;
        let (mut ls, mut rs) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for (h, psi) in hs.iter().zip(&state.amplitudes) {
            let (l, r) = stationarity_check(h, psi)?;
            ls.push(l);
            rs.push(r);
        }
        Ok((hs, ls, rs))
    };

    let (mut hs, mut ls, mut rs) = measure(&state)?;
    trajectory.push(Snapshot {
        t: 0.0,
        state: state.clone(),
        lambdas: ls.clone(),
        residuals: rs.clone(),
    });
    let stationary = |rs: &[f64]| rs.iter().all(|&r| r <= opts.tol);
    while !stationary(&rs) && steps < limit {
        steps += 1;
        let mut next = Vec::with_capacity(n);
        for (h, psi) in hs.iter().zip(&state.amplitudes) {
            let mut v = rk4_step(
                |y, out: &mut [f64]| {
                    h.apply_into(y, out);
                    out.iter_mut().for_each(|x| *x /= -opts.hbar);
                },
                psi,
                dt,
            )
            .map_err(|e| with_step(e, steps))?;
            let norm = norm2(&v);
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::NonFinite {
                    step: steps,
                    what: "state norm".into(),
                });
            }
            v.iter_mut().for_each(|x| *x /= norm);
            next.push(v);
        }
        state = WaveState { amplitudes: next };
        (hs, ls, rs) = measure(&state)?;
        if opts.record_stride > 0 && steps.is_multiple_of(opts.record_stride) {
            trajectory.push(Snapshot {
                t: steps as f64 * dt,
                state: state.clone(),
                lambdas: ls.clone(),
                residuals: rs.clone(),
            });
        }
    }
    let t_end = steps as f64 * dt;
    if trajectory.last().map(|s| s.t) != Some(t_end) {
        trajectory.push(Snapshot {
            t: t_end,
            state: state.clone(),
            lambdas: ls.clone(),
            residuals: rs.clone(),
        });
    }
    Ok(Evolution {
        reports: ls
            .iter()
            .zip(&rs)
            .map(|(&lambda, &residual)| StationaryReport {
                lambda,
                residual,
                matched_eigenvalue_index: None,
                evolution_time: t_end,
            })
            .collect(),
        converged: stationary(&rs),
        steps,
        dt,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::games::*;
    use crate::numerics::jacobi_eigen;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn random_symmetric(n: usize, seed: u64) -> HermitianOperator {
        let mut rng = SeededRng::new(seed);
        let mut m = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in a..n {
                let x = rng.symmetric();
                m[a][b] = x;
                m[b][a] = x;
            }
        }
        HermitianOperator::dense(m).unwrap()
    }

    #[test]
    fn stationarity_examples() {
        let h = HermitianOperator::diagonal(vec![1.0, 2.0, 3.0]).unwrap();
        let (l, r) = stationarity_check(&h, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!((l, r), (2.0, 0.0));

        let h = HermitianOperator::diagonal(vec![1.0, 2.0]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (l, r) = stationarity_check(&h, &[s, s]).unwrap();
        assert_relative_eq!(l, 1.5, max_relative = 1e-15);
        // Hψ − λψ = (−0.5, 0.5)/√2
        assert_relative_eq!(r, 0.5, max_relative = 1e-15);

        let id = HermitianOperator::diagonal(vec![1.0; 3]).unwrap();
        let psi = WaveState::random(&[3], 1).into_inner().remove(0);
        let (l, r) = stationarity_check(&id, &psi).unwrap();
        assert_relative_eq!(l, 1.0, max_relative = 1e-15);
        assert!(r < 1e-15);

        assert!(matches!(stationarity_check(&id, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn grid_hamiltonian_small_instance() {
        let h = build_grid_hamiltonian(0.0, 2.0, 3, &[0.0; 3]).unwrap();
        assert_eq!(
            h.to_dense_rows(),
            [vec![1.0, -0.5, 0.0], vec![-0.5, 1.0, -0.5], vec![0.0, -0.5, 1.0]]
        );
        assert!(build_grid_hamiltonian(0.0, 1.0, 2, &[0.0; 2]).is_err());
        assert!(build_grid_hamiltonian(0.0, 1.0, 4, &[0.0; 3]).is_err());
        assert!(build_grid_hamiltonian(1.0, 0.0, 3, &[0.0; 3]).is_err());
    }

    #[test]
    fn grid_potential_shift_moves_spectrum() {
        let xs = grid_points(-2.0, 2.0, 15);
        let v: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let c = 0.75;
        let a = jacobi_eigen(&build_grid_hamiltonian(-2.0, 2.0, 15, &v).unwrap()).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let b = jacobi_eigen(&build_grid_hamiltonian(-2.0, 2.0, 15, &shifted).unwrap()).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((y - x - c).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_oscillator_ground_energy() {
        let xs = grid_points(-8.0, 8.0, 201);
        let v: Vec<f64> = xs.iter().map(|x| 0.5 * x * x).collect();
        let h = build_grid_hamiltonian(-8.0, 8.0, 201, &v).unwrap();
        let e = jacobi_eigen(&h).unwrap();
        assert!((e.eigenvalues[0] - 0.5).abs() < 5e-3);
        assert!((e.eigenvalues[1] - 1.5).abs() < 2e-2);
    }

    #[test]
    fn zero_operator_keeps_state() {
        let h = HermitianOperator::diagonal(vec![0.0; 3]).unwrap();
        let psi0 = WaveState::random(&[3], 2).into_inner().remove(0);
        let evo = evolve_linear(&h, &psi0, &EvolveOptions::default()).unwrap();
        assert!(evo.converged);
        assert_eq!(evo.steps, 0);
        assert_eq!(evo.reports[0].lambda, 0.0);
        assert_eq!(evo.reports[0].residual, 0.0);
        assert_eq!(evo.final_state().agent(0), psi0.as_slice());
    }

    #[test]
    fn two_level_system_relaxes_to_ground_state() {
        let h = HermitianOperator::diagonal(vec![1.0, 2.0]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let evo = evolve_linear(&h, &[s, s], &EvolveOptions::default()).unwrap();
        assert!(evo.converged);
        let psi = evo.final_state().agent(0);
        assert!((psi[0] - 1.0).abs() < 1e-12 && psi[1].abs() < 1e-8);
        assert!((evo.reports[0].lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_operator_reaches_lowest_eigenvalue() {
        for seed in 0..5 {
            let h = random_symmetric(8, seed);
            let psi0 = WaveState::random(&[8], seed + 100).into_inner().remove(0);
            let opts = EvolveOptions { dt: Some(0.5 / h.gershgorin_radius()), t_max: 1e5, ..Default::default() };
            let evo = evolve_linear(&h, &psi0, &opts).unwrap();
            assert!(evo.converged, "seed {seed}");
            let oracle = jacobi_eigen(&h).unwrap();
            assert!((evo.reports[0].lambda - oracle.eigenvalues[0]).abs() <= 1e-6);
        }
    }

    #[test]
    fn deflation_finds_excited_states() {
        let h = random_symmetric(6, 42);
        let oracle = jacobi_eigen(&h).unwrap();
        let opts = EvolveOptions { dt: Some(0.5 / h.gershgorin_radius()), t_max: 1e5, ..Default::default() };
        let psi0 = WaveState::uniform(&[6]).into_inner().remove(0);
        let states = lowest_states(&h, 3, &psi0, 9, &opts).unwrap();
        for (k, evo) in states.iter().enumerate() {
            assert!(evo.converged);
            assert!((evo.reports[0].lambda - oracle.eigenvalues[k]).abs() < 1e-6, "state {k}");
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let h = HermitianOperator::diagonal(vec![1.0, 100.0]).unwrap();
        let opts = EvolveOptions { dt: Some(0.02), ..Default::default() };
        assert!(evolve_linear(&h, &[1.0, 0.0], &opts).is_err());
        assert!(evolve_linear(&h, &[1.0, 1.0], &EvolveOptions::default()).is_err());
    }

    #[test]
    fn effective_hamiltonian_examples() {
        let m = GameModel::validate(single_agent(&[0.3, -1.0, 2.0], 1.0)).unwrap();
        let h = effective_hamiltonian(&m, &WaveState::uniform(&[3]), 0).unwrap();
        assert_eq!(h, HermitianOperator::Diagonal(vec![0.3, -1.0, 2.0]));

        let mut spec = agreement_energy();
        for a in &mut spec.agents {
            if let crate::model::ObjectiveSpec::Dense(d) = &mut a.objective {
                d.values = vec![2.5; 4];
            }
        }
        let m = GameModel::validate(spec).unwrap();
        let h = effective_hamiltonian(&m, &WaveState::random(&[2, 2], 3), 1).unwrap();
        for k in 0..2 {
            assert_relative_eq!(h.entry(k, k), 2.5, max_relative = 1e-15);
        }

        let m = GameModel::validate(agreement_energy()).unwrap();
        let state = WaveState::new(vec![vec![0.6, 0.8], vec![1.0, 0.0]]).unwrap();
        assert_eq!(effective_hamiltonian(&m, &state, 0).unwrap(), HermitianOperator::Diagonal(vec![0.0, 1.0]));

        let pd = GameModel::validate(prisoners_dilemma(5.0, 3.0, 1.0, 0.0)).unwrap();
        assert!(matches!(
            effective_hamiltonian(&pd, &WaveState::uniform(&[2, 2]), 0),
            Err(Error::WrongMode { .. })
        ));
    }

    #[test]
    fn pairwise_effective_hamiltonian_matches_dense() {
        let spec = crate::model::ProblemFile {
            hbar: Some(1.0),
            mode: Mode::Energy,
            variables: (0..3)
                .map(|k| crate::model::DomainSpec { name: format!("v{k}"), cardinality: 2 + k })
                .collect(),
            agents: (0..3)
                .map(|i| crate::model::AgentSpec {
                    name: format!("a{i}"),
                    acts_on: format!("v{i}"),
                    objective: crate::model::ObjectiveSpec::Pairwise(
                        (0..3)
                            .filter(|&j| j != i)
                            .map(|j| crate::model::PairwiseSpec {
                                with: format!("v{j}"),
                                table: (0..2 + i)
                                    .map(|a| (0..2 + j).map(|b| ((a * 7 + b * 3 + i) % 5) as f64 - 2.0).collect())
                                    .collect(),
                            })
                            .collect(),
                    ),
                })
                .collect(),
        };
        let m = GameModel::validate(spec).unwrap();
        let d = m.densified().unwrap();
        let state = WaveState::random(&[2, 3, 4], 17);
        for i in 0..3 {
            let a = effective_hamiltonian(&m, &state, i).unwrap();
            let b = effective_hamiltonian(&d, &state, i).unwrap();
            for k in 0..a.dim() {
                assert!((a.entry(k, k) - b.entry(k, k)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn coupled_single_agent_matches_linear() {
        let energies = [0.7, -0.4, 1.1, 0.2];
        let m = GameModel::validate(single_agent(&energies, 1.0)).unwrap();
        let h = HermitianOperator::diagonal(energies.to_vec()).unwrap();
        let psi0 = WaveState::random(&[4], 8);
        let opts = EvolveOptions { record_stride: 1, t_max: 5.0, ..Default::default() };
        let a = evolve_coupled(&m, &psi0, &opts).unwrap();
        let b = evolve_linear(&h, psi0.agent(0), &opts).unwrap();
        assert_eq!(a.trajectory.len(), b.trajectory.len());
        for (x, y) in a.trajectory.iter().zip(&b.trajectory) {
            for (p, q) in x.state.agent(0).iter().zip(y.state.agent(0)) {
                assert!((p - q).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn coupled_zero_energy_is_static() {
        let m = GameModel::validate(bimatrix(Mode::Energy, [[0.0; 2]; 2], [[0.0; 2]; 2])).unwrap();
        let s = WaveState::random(&[2, 2], 1);
        let evo = evolve_coupled(&m, &s, &EvolveOptions::default()).unwrap();
        assert!(evo.converged);
        assert_eq!(evo.final_state(), &s);
    }

    #[test]
    fn coupled_agreement_game_locks_in() {
        let m = GameModel::validate(agreement_energy()).unwrap();
        let a = [0.6f64.sqrt(), 0.4f64.sqrt()];
        let s = WaveState::new(vec![a.to_vec(), a.to_vec()]).unwrap();
        let evo = evolve_coupled(&m, &s, &EvolveOptions::default()).unwrap();
        assert!(evo.converged);
        for i in 0..2 {
            let psi = evo.final_state().agent(i);
            assert!(psi[0] > 1.0 - 1e-12, "agent {i}: {psi:?}");
            assert!(evo.reports[i].lambda.abs() < 1e-8);
            assert!(evo.reports[i].residual <= 1e-8);
        }
    }

    #[test]
    fn coupled_rejects_utility_models() {
        let m = GameModel::validate(coordination()).unwrap();
        assert!(evolve_coupled(&m, &WaveState::uniform(&[2, 2]), &EvolveOptions::default()).is_err());
    }

    #[test]
    fn trajectory_csv_layout() {
        let h = HermitianOperator::diagonal(vec![1.0, 2.0]).unwrap();
        let opts = EvolveOptions { record_stride: 100, ..Default::default() };
        let evo = evolve_linear(&h, &[0.6, 0.8], &opts).unwrap();
        let mut buf = Vec::new();
        evo.write_trajectory_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,agent,action,psi,lambda,residual"));
        assert_eq!(lines.next(), Some("0,0,0,0.6,1.6400000000000001,0.47999999999999987"));
        assert_eq!(text.lines().count(), 1 + 2 * evo.trajectory.len());
    }

    proptest! {
        #[test]
        fn norm_and_rayleigh_descent(seed in any::<u64>(), n in 2usize..7) {
            let h = random_symmetric(n, seed);
            let psi0 = WaveState::random(&[n], seed ^ 1).into_inner().remove(0);
            let opts = EvolveOptions { dt: Some(0.9 / h.gershgorin_radius()), ..Default::default() };
            let mut flow = LinearFlow::new(&h, &psi0, &opts).unwrap();
            let mut prev = flow.measure().0;
            for _ in 0..300 {
                flow.step().unwrap();
                prop_assert!((norm2(flow.state()) - 1.0).abs() <= 1e-12);
                let l = flow.measure().0;
                prop_assert!(l <= prev + 1e-9);
                prev = l;
            }
        }

        #[test]
        fn diagonal_ground_state_selection(d in prop::collection::vec(-3.0f64..3.0, 2..6), seed in any::<u64>()) {
            let h = HermitianOperator::diagonal(d.clone()).unwrap();
            let mut sorted = d.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted[1] - sorted[0] > 0.05);
            let psi0: Vec<f64> = WaveState::random(&[d.len()], seed).into_inner().remove(0).iter().map(|v| v.abs()).collect();
            let n = norm2(&psi0);
            let psi0: Vec<f64> = psi0.iter().map(|v| v / n).collect();
            let evo = evolve_linear(&h, &psi0, &EvolveOptions { dt: Some(0.5 / h.gershgorin_radius()), t_max: 1e4, ..Default::default() }).unwrap();
            let psi = evo.final_state().agent(0);
            let mags: Vec<f64> = psi.iter().map(|v| v.abs()).collect();
            prop_assert_eq!(crate::discrete_dynamics::argmax_lowest(&mags), crate::discrete_dynamics::argmax_lowest(&d.iter().map(|v| -v).collect::<Vec<_>>()));
        }
    }
}
