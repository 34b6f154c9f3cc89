//! Choosing `ε` so that the greedy set's true energy `F` stays within a
//! factor `1 + ξ` of the regularized value it was optimized for.
//!
//! Starting from `ε₀`, solve, measure `λ₁` of the chosen set's Gramian and,
//! while `ε ≥ ξ λ₁`, restart with `ε = ξ λ₁ / 2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gramian::{min_eigenvalue_of, SINGULAR_RTOL};
use crate::greedy::{solve_forward_with, solve_reverse_with, Direction, PlacementObjective, PlacementResult};
use crate::linalg::spectral_norm_sym;
use crate::network::{ActuatorSet, DirectedNetwork};

pub const DEFAULT_XI: f64 = 2.0;
pub const DEFAULT_EPS0: f64 = 1e-3;
pub const DEFAULT_MAX_ITERATIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonStep {
    pub eps: f64,
    pub chosen: ActuatorSet,
    pub lambda_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRun {
    pub xi: f64,
    pub method: Direction,
    pub iterations: Vec<EpsilonStep>,
    pub final_eps: f64,
    pub final_result: PlacementResult,
    /// `F(S_ε)` of the returned set.
    pub f_exact: f64,
    /// `(1 + ξ) F_ε(S_ε)`.
    pub bound: f64,
    pub guarantee_holds: bool,
}

pub fn proper_epsilon(
    net: &DirectedNetwork,
    k: usize,
    t: f64,
    xi: f64,
    eps0: f64,
    method: Direction,
) -> Result<EpsilonRun> {
    proper_epsilon_capped(net, k, t, xi, eps0, method, DEFAULT_MAX_ITERATIONS)
}

pub fn proper_epsilon_capped(
    net: &DirectedNetwork,
    k: usize,
    t: f64,
    xi: f64,
    eps0: f64,
    method: Direction,
    max_iterations: usize,
) -> Result<EpsilonRun> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::NonpositiveParameter { name: "xi", value: xi });
    }
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(Error::NonpositiveParameter { name: "eps0", value: eps0 });
    }
    let base = PlacementObjective::new(net, t, eps0, method)?;
    let mut eps = eps0;
    let mut iterations = Vec::new();
    let mut last_lambda = 0.0;
    for _ in 0..max_iterations.max(1) {
        let objective = base.with_eps(eps)?;
        let result = match method {
            Direction::Forward => solve_forward_with(net, &objective, k)?,
            Direction::Reverse => solve_reverse_with(net, &objective, k)?,
        };
        let w = objective.cache().matrix(result.chosen.as_slice())?;
        let lambda_min = min_eigenvalue_of(&w);
        last_lambda = lambda_min;
        if !(lambda_min > SINGULAR_RTOL * spectral_norm_sym(&w)) {
            return Err(Error::SingularGramianEncountered { lambda_min });
        }
        iterations.push(EpsilonStep { eps, chosen: result.chosen.clone(), lambda_min });
        if eps < xi * lambda_min {
            let f_exact = objective
                .cache()
                .f(result.chosen.as_slice())
                .map_err(|_| Error::SingularGramianEncountered { lambda_min })?;
            let bound = (1.0 + xi) * result.f_eps;
            return Ok(EpsilonRun {
                xi,
                method,
                iterations,
                final_eps: eps,
                f_exact,
                bound,
                guarantee_holds: f_exact < bound,
                final_result: result,
            });
        }
        eps = 0.5 * xi * lambda_min;
    }
    Err(Error::SingularGramianEncountered { lambda_min: last_lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;

    fn example1() -> DirectedNetwork {
        parse_network(
            r#"{"n":4,"edges":[
            {"from":2,"to":1,"w":-0.5},{"from":3,"to":1,"w":-0.8},{"from":4,"to":1,"w":-0.6},
            {"from":1,"to":2,"w":1},{"from":1,"to":3,"w":1},{"from":1,"to":4,"w":1}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn example1_both_methods() {
        let net = example1();
        for method in [Direction::Forward, Direction::Reverse] {
            let run = proper_epsilon(&net, 2, 2.0, 2.0, 1e-3, method).unwrap();
            assert!(run.guarantee_holds);
            assert!(run.f_exact < 3.0 * run.final_result.f_eps);
            let last = run.iterations.last().unwrap();
            assert!(last.eps < run.xi * last.lambda_min);
            for pair in run.iterations.windows(2) {
                assert_eq!(pair[1].eps, 0.5 * run.xi * pair[0].lambda_min);
                assert!(pair[1].eps <= 0.5 * pair[0].eps);
            }
        }
    }

    #[test]
    fn immediate_exit_keeps_eps0() {
        let net = example1();
        // full actuation on a short horizon has a comfortable λ₁
        let run = proper_epsilon(&net, 4, 1.0, 2.0, 1e-6, Direction::Forward).unwrap();
        assert_eq!(run.iterations.len(), 1);
        assert_eq!(run.final_eps, 1e-6);
    }

    #[test]
    fn parameter_checks() {
        let net = example1();
        assert_eq!(
            proper_epsilon(&net, 2, 1.0, 0.0, 1e-3, Direction::Forward).unwrap_err(),
            Error::NonpositiveParameter { name: "xi", value: 0.0 }
        );
        assert_eq!(
            proper_epsilon(&net, 2, 1.0, 2.0, -1.0, Direction::Forward).unwrap_err(),
            Error::NonpositiveParameter { name: "eps0", value: -1.0 }
        );
    }
}
