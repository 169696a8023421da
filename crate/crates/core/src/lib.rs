//! Nash equilibrium computation for N-player general-sum, infinite-horizon,
//! deterministic linear-quadratic dynamic games.
//!
//! The crate provides the game model ([`model`]), value iteration, the joint
//! policy iteration and three policy-gradient variants ([`solvers`]), and
//! reproducible instance generators ([`gen`]).

pub mod error;
pub mod gen;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod solvers;

pub use error::{LqdgError, Result};
pub use metrics::normalized_error;
pub use model::{
    are_residual, check_equilibrium_conditions, closed_loop_matrix, cost, effective_dynamics,
    evaluate_policies, solve_discrete_lyapunov, spectral_radius, stage_weight, state_covariance,
    GameInstance, PolicySet, StabilityReport, ValueSet,
};
pub use solvers::{
    assemble_policy_update_system, gauss_newton_pg, gradient, natural_pg, policy_iteration,
    run_solver, run_solver_observed, vanilla_pg, value_iteration, Algorithm, IterationRecord,
    SolveResult, SolveStatus, SolverConfig,
};
