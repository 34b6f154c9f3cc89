//! Actuator placement for linear networks `ẋ = Ax + B(S)u`.
//!
//! The objective is the regularized average control energy
//! `tr((W_T(S) + εI)⁻¹)`, minimized over actuator sets that keep the pair
//! `(A, B(S))` structurally controllable. Forward and reverse greedy solvers
//! run over the corresponding matroids; `guarantees` evaluates their ex-post
//! bounds and `oracle` holds brute-force reference engines.

pub mod cli;
pub mod epsilon;
pub mod error;
pub mod feasibility;
pub mod gramian;
pub mod greedy;
pub mod guarantees;
mod linalg;
pub mod network;
pub mod oracle;

pub use epsilon::{proper_epsilon, EpsilonRun, EpsilonStep};
pub use error::{Error, Result};
pub use feasibility::{
    build_bipartite, forward_feasible, max_flow, max_matching_cardinality, min_cardinality,
    reverse_feasible, reverse_flow_graph, BipartiteAux, FlowNetwork,
};
pub use gramian::{gramian, marginal_gain, metric_f, metric_f_eps, min_eigenvalue, Gramian, NodeGramians};
pub use greedy::{
    forward_greedy, forward_greedy_over, reverse_greedy, reverse_greedy_over, solve_forward, solve_reverse,
    Direction, GreedyPick, GreedyTrace, Modular, PlacementObjective, PlacementResult, SetFunction,
};
pub use guarantees::{
    evaluate_forward_guarantee, evaluate_reverse_guarantee, exact_ratio_and_curvature,
    forward_energy_guarantee, forward_reverse_duality_check, greedy_gamma_alpha_reverse,
    greedy_gamma_forward, reverse_energy_guarantee, z_bar, z_u, GreedyEstimate, GuaranteeReport,
    ReverseGreedyEstimates,
};
pub use network::{
    build_swing_model, generate_by_degrees, network_to_json, parse_network, parse_swing_csv,
    strongly_connected, ActuatorSet, Branch, Bus, DirectedNetwork,
};
pub use oracle::{
    brute_force_optimal, brute_force_optimal_by, counterexample_alpha, counterexample_gamma,
    gramian_quadrature, random_baseline, randomized_structurally_controllable, AlphaCounterexample,
    Metric, OracleConfig, TabulatedFunction,
};
