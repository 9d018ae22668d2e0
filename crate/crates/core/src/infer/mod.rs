//! Per-node concave maximum-likelihood estimation of activation
//! probabilities, sparsity-penalized structure discovery, and tied-parameter
//! learning on layered observations.
//!
//! Each node's log-likelihood is maximized over `q_hat_ji = ln(1 - p_ji)` on
//! the box `[q_hat_min, 0]`. The activation-level constraint is eliminated
//! analytically (it is tight at the optimum), leaving a concave objective
//! that a projected gradient ascent with Barzilai-Borwein steps and Armijo
//! backtracking solves to global optimality up to tolerance.

mod learn;
mod problem;
mod solver;

pub use learn::{
    learn_structure, learn_structure_detailed, learn_tied_layered, learn_tied_layered_detailed,
    InferredNetwork, NodeDiagnostics,
};
pub use problem::{
    assemble_node_problem, assemble_tied_node_problem, ActivationRecord, NodeProblem,
};
pub use solver::{solve_node, solve_node_with_trace, SolverConfig, SolverState};
