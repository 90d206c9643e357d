//! Cooperative-optimization dynamics.
//!
//! Each agent of an n-agent society scores its own actions by the expected
//! return `Ψ_i(x_i)` of its objective against the other agents' current action
//! distributions, then picks actions with probability `∝ Ψ_i^α`. Iterating this
//! map ([`discrete_dynamics`]) gives a family of equilibria interpolating
//! between a uniform compromise (`α → 0`) and best response (`α → ∞`); the
//! [`equilibrium`] module certifies them as ε-approximate Nash equilibria.
//!
//! The continuous-time counterpart ([`continuous_dynamics`]) is a dissipative
//! (imaginary-time) Schrödinger flow whose stationary states are eigenvectors
//! of the per-agent effective Hamiltonians. [`numerics`] carries the shared
//! kernels, including a Jacobi eigensolver used as an independent oracle.

pub mod continuous_dynamics;
pub mod discrete_dynamics;
pub mod equilibrium;
mod error;
pub mod model;
pub mod numerics;
pub mod rng;

pub use continuous_dynamics::{
    build_grid_hamiltonian, effective_hamiltonian, evolve_coupled, evolve_linear, lowest_states,
    stationarity_check, Evolution, EvolveOptions, StationaryReport, WaveState,
};
pub use discrete_dynamics::{
    expected_return_update, expected_return_update_factorized, expected_returns,
    iterate_to_fixed_point, normalize_policy, ExpectedReturnField, FixedPointResult,
    IterationConfig, IterationTrace, StrategyProfile,
};
pub use equilibrium::{
    alpha_sweep, enumerate_pure_nash, epsilon_of_profile, expected_payoff, EpsilonCertificate,
    SweepConfig, SweepReport, SweepRow,
};
pub use error::{Error, Result, Violation};
pub use model::{GameModel, Mode, ProblemFile};
pub use numerics::{jacobi_eigen, log_sum_exp, rk4_step, EigenDecomposition, HermitianOperator};
