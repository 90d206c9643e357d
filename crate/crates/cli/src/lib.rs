//! `coopt` command-line front end.

pub mod documents;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use coopt::continuous_dynamics::write_trajectory_rows;
use coopt::{
    alpha_sweep, enumerate_pure_nash, epsilon_of_profile, iterate_to_fixed_point, jacobi_eigen, lowest_states,
    EvolveOptions, IterationConfig, Mode, StrategyProfile, SweepConfig, WaveState,
};

use documents::*;

/// Match tolerance between an evolved eigenvalue and the Jacobi oracle.
const ORACLE_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "coopt", version, about = "Cooperative-optimization solvers for games and ground states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the expected-return map to a fixed point.
    Solve(SolveArgs),
    /// Run the fixed-point iteration over a grid of alpha values.
    Sweep(SweepArgs),
    /// Imaginary-time evolution under a Hamiltonian file.
    Quantum(QuantumArgs),
    /// List the pure Nash equilibria of a utility game.
    Nash(NashArgs),
    /// Certify a strategy profile as an epsilon-approximate Nash equilibrium.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitMode {
    Uniform,
    Random,
}

impl InitMode {
    fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Random => "random",
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Result file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = InitMode::Uniform)]
    pub init: InitMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `step,max_change` CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Long-format `step,agent,action,p,psi` CSV.
    #[arg(long)]
    pub trace_detail: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// `a:b:log:N`, `a:b:lin:N`, or a comma-separated list.
    #[arg(long)]
    pub alpha_grid: String,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Base seed; restart r uses seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct QuantumArgs {
    #[arg(long)]
    pub hamiltonian: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub hbar: f64,
    /// Default: 0.01 * hbar / (Gershgorin bound on the spectral radius).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 1000.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Number of lowest stationary states to compute (deflation).
    #[arg(long, default_value_t = 1)]
    pub states: usize,
    #[arg(long, value_enum, default_value_t = InitMode::Uniform)]
    pub init: InitMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `t,agent,action,psi,lambda,residual` CSV; `agent` is the state index.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Trajectory sampling interval in steps.
    #[arg(long, default_value_t = 1000)]
    pub record_every: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct NashArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Converged => 0,
            Self::NotConverged => 2,
        }
    }

    fn from_flag(converged: bool) -> Self {
        if converged {
            Self::Converged
        } else {
            Self::NotConverged
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Quantum(a) => quantum(a),
        Command::Nash(a) => nash(a),
        Command::Verify(a) => verify(a),
    }
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

/// Parses `a:b:log:N`, `a:b:lin:N` or `a,b,c`. Endpoints are exact.
pub fn parse_alpha_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [a, b, kind, n] => {
            let a: f64 = a.trim().parse().with_context(|| format!("bad grid start `{a}`"))?;
            let b: f64 = b.trim().parse().with_context(|| format!("bad grid end `{b}`"))?;
            let n: usize = n.trim().parse().with_context(|| format!("bad grid size `{n}`"))?;
            ensure!(n >= 1, "grid size must be at least 1");
            let t = |k: usize| if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
            let mut g: Vec<f64> = match *kind {
                "log" => {
                    ensure!(a > 0.0 && b > 0.0, "log grid endpoints must be positive");
                    (0..n).map(|k| a * (b / a).powf(t(k))).collect()
                }
                "lin" => (0..n).map(|k| a + (b - a) * t(k)).collect(),
                other => bail!("unknown grid kind `{other}` (expected log or lin)"),
            };
            g[0] = a;
            if n > 1 {
                g[n - 1] = b;
            }
            g
        }
        [_] => text
            .split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad alpha `{s}`")))
            .collect::<Result<_>>()?,
        _ => bail!("alpha grid must be a:b:log:N, a:b:lin:N or a comma-separated list"),
    };
    ensure!(
        grid.iter().all(|a| a.is_finite() && *a > 0.0),
        "alpha values must be finite and positive"
    );
    Ok(grid)
}

fn solve(args: SolveArgs) -> Result<Outcome> {
    let model = load_problem(&args.problem, args.hbar)?;
    let init = match args.init {
        InitMode::Uniform => StrategyProfile::uniform(&model),
        InitMode::Random => StrategyProfile::random(&model, args.seed),
    };
    let config = IterationConfig {
        alpha: args.alpha,
        tol: args.tol,
        max_iter: args.max_iter,
        record_trace: args.trace_detail.is_some(),
    };
    let (result, trace) = iterate_to_fixed_point(&model, &config, &init)?;

    if let Some(path) = &args.trace {
        trace.write_summary_csv(create(path)?)?;
    }
    if let Some(path) = &args.trace_detail {
        trace.write_detail_csv(create(path)?)?;
    }

    let epsilon = match model.mode() {
        Mode::Utility => Some(EpsilonDoc::new(&model, &epsilon_of_profile(&model, &result.profile)?)),
        Mode::Energy => None,
    };
    let psi = result.field.values();
    let doc = SolveDoc {
        schema_version: SCHEMA_VERSION,
        command: "solve".into(),
        mode: model.mode(),
        alpha: args.alpha,
        hbar: model.hbar(),
        init: args.init.name().into(),
        seed: (args.init == InitMode::Random).then_some(args.seed),
        converged: result.converged,
        iterations: result.iterations,
        max_change: result.max_change,
        agents: model
            .agents()
            .iter()
            .zip(result.profile.agents().iter().zip(psi))
            .map(|(a, (p, psi))| SolvedAgent {
                name: a.name.clone(),
                variable: model.variables()[a.variable].name.clone(),
                probabilities: p.clone(),
                psi,
            })
            .collect(),
        epsilon,
    };
    emit(&args.output, &to_json(&doc)?)?;
    Ok(Outcome::from_flag(result.converged))
}

fn sweep(args: SweepArgs) -> Result<Outcome> {
    let model = load_problem(&args.problem, args.hbar)?;
    let config = SweepConfig {
        alphas: parse_alpha_grid(&args.alpha_grid)?,
        restarts: args.restarts,
        base_seed: args.seed,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let report = alpha_sweep(&model, &config)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    emit(&args.output, std::str::from_utf8(&buf)?)?;
    Ok(Outcome::Converged)
}

fn quantum(args: QuantumArgs) -> Result<Outcome> {
    ensure!(args.states >= 1, "--states must be at least 1");
    let file: HamiltonianFile = read_json(&args.hamiltonian)?;
    let h = file.build().with_context(|| format!("{}", args.hamiltonian.display()))?;
    ensure!(args.states <= h.dim(), "--states exceeds the operator dimension {}", h.dim());
    let psi0 = match args.init {
        InitMode::Uniform => WaveState::uniform(&[h.dim()]),
        InitMode::Random => WaveState::random(&[h.dim()], args.seed),
    }
    .into_inner()
    .remove(0);
    let opts = EvolveOptions {
        hbar: args.hbar,
        dt: args.dt,
        t_max: args.t_max,
        tol: args.tol,
        record_stride: args.record_every,
        deflate: Vec::new(),
    };
    let evolutions = lowest_states(&h, args.states, &psi0, args.seed, &opts)?;
    let oracle = (h.dim() <= coopt::numerics::JACOBI_MAX_DIM)
        .then(|| jacobi_eigen(&h))
        .transpose()?;

    if let Some(path) = &args.trace {
        let mut w = csv::Writer::from_writer(create(path)?);
        for (k, evo) in evolutions.iter().enumerate() {
            write_trajectory_rows(&mut w, &evo.trajectory, Some(k))?;
        }
        w.flush()?;
    }

    let states: Vec<QuantumState> = evolutions
        .iter()
        .enumerate()
        .map(|(index, evo)| {
            let mut report = evo.reports[0].clone();
            if let Some(o) = &oracle {
                report.match_oracle(o, ORACLE_MATCH_TOL);
            }
            QuantumState {
                index,
                lambda: report.lambda,
                residual: report.residual,
                converged: evo.converged,
                steps: evo.steps,
                evolution_time: report.evolution_time,
                matched_eigenvalue_index: report.matched_eigenvalue_index,
                oracle_eigenvalue: oracle.as_ref().map(|o| o.eigenvalues[index]),
                psi: evo.final_state().agent(0).to_vec(),
            }
        })
        .collect();
    let converged = states.iter().all(|s| s.converged);
    let doc = QuantumDoc {
        schema_version: SCHEMA_VERSION,
        command: "quantum".into(),
        dimension: h.dim(),
        hbar: args.hbar,
        dt: evolutions[0].dt,
        tol: args.tol,
        states,
    };
    emit(&args.output, &to_json(&doc)?)?;
    Ok(Outcome::from_flag(converged))
}

fn nash(args: NashArgs) -> Result<Outcome> {
    let model = load_problem(&args.problem, None)?;
    let doc = NashDoc {
        schema_version: SCHEMA_VERSION,
        command: "nash".into(),
        agents: model.agents().iter().map(|a| a.name.clone()).collect(),
        equilibria: enumerate_pure_nash(&model)?,
    };
    emit(&args.output, &to_json(&doc)?)?;
    Ok(Outcome::Converged)
}

fn verify(args: VerifyArgs) -> Result<Outcome> {
    let model = load_problem(&args.problem, args.hbar)?;
    let file: ProfileFile = read_json(&args.profile)?;
    let mut probs = Vec::with_capacity(model.num_agents());
    for a in model.agents() {
        let entry = file
            .agents
            .iter()
            .find(|p| p.name == a.name)
            .with_context(|| format!("{}: no probabilities for agent `{}`", args.profile.display(), a.name))?;
        probs.push(entry.probabilities.clone());
    }
    let profile = StrategyProfile::new(probs).with_context(|| format!("{}", args.profile.display()))?;
    let cert = epsilon_of_profile(&model, &profile)?;
    let doc = VerifyDoc {
        schema_version: SCHEMA_VERSION,
        command: "verify".into(),
        certificate: EpsilonDoc::new(&model, &cert),
    };
    emit(&args.output, &to_json(&doc)?)?;
    Ok(Outcome::Converged)
}
