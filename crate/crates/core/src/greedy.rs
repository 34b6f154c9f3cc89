//! Forward and reverse greedy over a matroid, plus the placement drivers that
//! bind them to `F_ε` and the feasibility oracles.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::{forward_feasible, min_cardinality, reverse_feasible};
use crate::gramian::NodeGramians;
use crate::network::{ActuatorSet, DirectedNetwork};

/// Deterministic set function on subsets of `0..ground_size()`. Subsets are
/// passed as ascending index slices.
pub trait SetFunction: Sync {
    fn ground_size(&self) -> usize;
    fn evaluate(&self, subset: &[usize]) -> Result<f64>;

    fn gain(&self, base: &ActuatorSet, v: usize) -> Result<f64> {
        Ok(self.evaluate(base.with(v).as_slice())? - self.evaluate(base.as_slice())?)
    }
}

impl<F: SetFunction + ?Sized> SetFunction for &F {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }
    fn evaluate(&self, subset: &[usize]) -> Result<f64> {
        (**self).evaluate(subset)
    }
}

/// `f(S) = Σ_{v ∈ S} w_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Modular {
    pub weights: Vec<f64>,
}

impl SetFunction for Modular {
    fn ground_size(&self) -> usize {
        self.weights.len()
    }
    fn evaluate(&self, subset: &[usize]) -> Result<f64> {
        Ok(subset.iter().map(|&v| self.weights[v]).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyPick {
    /// 1-based iteration `t`.
    pub iteration: usize,
    pub node: usize,
    /// `ρ_t`, the marginal gain of `node` on the set before this iteration.
    pub gain: f64,
    /// Candidates tried before `node` in this iteration and refused by the oracle.
    pub rejected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyTrace {
    pub direction: Direction,
    pub picks: Vec<GreedyPick>,
    pub final_set: ActuatorSet,
    /// `f` of the running set, starting with `f(∅)`.
    pub objective_values: Vec<f64>,
}

impl GreedyTrace {
    pub fn nodes(&self) -> Vec<usize> {
        self.picks.iter().map(|p| p.node).collect()
    }

    /// The running set after `t` picks.
    pub fn prefix(&self, t: usize) -> ActuatorSet {
        self.picks[..t].iter().map(|p| p.node).collect()
    }
}

fn run_greedy<F, O>(
    direction: Direction,
    f: &F,
    candidates: &[usize],
    oracle: O,
    target: usize,
) -> Result<GreedyTrace>
where
    F: SetFunction + ?Sized,
    O: Fn(&ActuatorSet) -> Result<bool>,
{
    let mut set = ActuatorSet::empty();
    let mut considered = vec![false; f.ground_size()];
    let mut remaining = candidates.len();
    let mut current = f.evaluate(&[])?;
    let mut picks = Vec::new();
    let mut objective_values = vec![current];

    while remaining > 0 && set.len() < target {
        let open: Vec<usize> = candidates.iter().copied().filter(|&v| !considered[v]).collect();
        // gains are valid for this iteration only
        let values: Vec<Result<f64>> = open
            .par_iter()
            .map(|&v| f.evaluate(set.with(v).as_slice()))
            .collect();
        let mut gains = Vec::with_capacity(open.len());
        for (v, value) in open.iter().zip(values) {
            gains.push((*v, value? - current));
        }

        let mut rejected = Vec::new();
        let mut committed = false;
        while !gains.is_empty() {
            let mut best = 0;
            for i in 1..gains.len() {
                let better = match direction {
                    Direction::Forward => gains[i].1 > gains[best].1,
                    Direction::Reverse => gains[i].1 < gains[best].1,
                };
                // ties keep the earlier, smaller index
                if better {
                    best = i;
                }
            }
            let (v, gain) = gains.remove(best);
            considered[v] = true;
            remaining -= 1;
            let grown = set.with(v);
            if oracle(&grown)? {
                set = grown;
                current = f.evaluate(set.as_slice())?;
                objective_values.push(current);
                picks.push(GreedyPick { iteration: picks.len() + 1, node: v, gain, rejected });
                committed = true;
                break;
            }
            rejected.push(v);
        }
        if !committed {
            break;
        }
    }

    if set.len() < target {
        return Err(Error::InfeasibleAtSize { reached: set.len(), target });
    }
    Ok(GreedyTrace { direction, picks, final_set: set, objective_values })
}

/// Forward greedy over the whole ground set: grow `S` by the feasible node of
/// largest gain until `|S| = K`.
pub fn forward_greedy<F, O>(f: &F, oracle: O, k: usize) -> Result<GreedyTrace>
where
    F: SetFunction + ?Sized,
    O: Fn(&ActuatorSet) -> Result<bool>,
{
    let ground: Vec<usize> = (0..f.ground_size()).collect();
    run_greedy(Direction::Forward, f, &ground, oracle, k)
}

/// [`forward_greedy`] restricted to `candidates` (ascending).
pub fn forward_greedy_over<F, O>(f: &F, candidates: &[usize], oracle: O, k: usize) -> Result<GreedyTrace>
where
    F: SetFunction + ?Sized,
    O: Fn(&ActuatorSet) -> Result<bool>,
{
    run_greedy(Direction::Forward, f, candidates, oracle, k)
}

/// Reverse greedy: grow the exclusion set `R` by the feasible node of
/// smallest gain in `f` until `|R| = N`.
pub fn reverse_greedy<F, O>(f: &F, oracle: O, n_excl: usize) -> Result<GreedyTrace>
where
    F: SetFunction + ?Sized,
    O: Fn(&ActuatorSet) -> Result<bool>,
{
    let ground: Vec<usize> = (0..f.ground_size()).collect();
    run_greedy(Direction::Reverse, f, &ground, oracle, n_excl)
}

/// [`reverse_greedy`] restricted to `candidates` (ascending).
pub fn reverse_greedy_over<F, O>(f: &F, candidates: &[usize], oracle: O, n_excl: usize) -> Result<GreedyTrace>
where
    F: SetFunction + ?Sized,
    O: Fn(&ActuatorSet) -> Result<bool>,
{
    run_greedy(Direction::Reverse, f, candidates, oracle, n_excl)
}

/// `F_ε` backed by cached per-node Gramians, in either orientation:
/// forward `f(S) = -F_ε(S)`, reverse `f(R) = F_ε(A \ R)` with `A` the
/// actuatable nodes.
#[derive(Debug, Clone)]
pub struct PlacementObjective {
    cache: NodeGramians,
    eps: f64,
    direction: Direction,
    actuatable: Vec<usize>,
}

impl PlacementObjective {
    pub fn new(net: &DirectedNetwork, t: f64, eps: f64, direction: Direction) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::EpsNonpositive(eps));
        }
        let all: Vec<usize> = (0..net.n()).collect();
        Ok(Self {
            cache: NodeGramians::new(net, t, &all)?,
            eps,
            direction,
            actuatable: net.actuatable_nodes(),
        })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::EpsNonpositive(eps));
        }
        Ok(Self { eps, ..self.clone() })
    }

    pub fn reversed(&self) -> Self {
        let direction = match self.direction {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        };
        Self { direction, ..self.clone() }
    }

    pub fn cache(&self) -> &NodeGramians {
        &self.cache
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// `F_ε` of an actuator set.
    pub fn f_eps(&self, s: &[usize]) -> Result<f64> {
        self.cache.f_eps(s, self.eps)
    }

    /// Actuator set described by `subset` in this objective's orientation.
    pub fn actuators_of(&self, subset: &[usize]) -> ActuatorSet {
        match self.direction {
            Direction::Forward => ActuatorSet::from_nodes(subset.iter().copied()),
            Direction::Reverse => {
                let excluded = ActuatorSet::from_nodes(subset.iter().copied());
                excluded.complement_in(&self.actuatable)
            }
        }
    }
}

impl SetFunction for PlacementObjective {
    fn ground_size(&self) -> usize {
        self.cache.n()
    }

    fn evaluate(&self, subset: &[usize]) -> Result<f64> {
        match self.direction {
            Direction::Forward => Ok(-self.f_eps(subset)?),
            Direction::Reverse => self.f_eps(self.actuators_of(subset).as_slice()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementResult {
    pub chosen: ActuatorSet,
    pub f_eps: f64,
    /// `F` of the chosen set, absent when its Gramian is numerically singular.
    pub f_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<GreedyTrace>,
    /// Seconds.
    pub wall_time: f64,
}

impl PlacementResult {
    pub(crate) fn from_set(
        objective: &PlacementObjective,
        chosen: ActuatorSet,
        trace: Option<GreedyTrace>,
        start: Instant,
    ) -> Result<Self> {
        let f_eps = objective.f_eps(chosen.as_slice())?;
        let f_exact = objective.cache().f(chosen.as_slice()).ok();
        Ok(Self { chosen, f_eps, f_exact, trace, wall_time: start.elapsed().as_secs_f64() })
    }
}

/// Range checks shared by every placement entry point.
pub(crate) fn check_cardinality(net: &DirectedNetwork, k: usize) -> Result<()> {
    let available = net.actuatable_nodes().len();
    if k > available {
        return Err(Error::KAboveActuatable { k, available });
    }
    let k_min = match min_cardinality(net) {
        Ok(k_min) => k_min,
        Err(Error::Infeasible) => available + 1,
        Err(e) => return Err(e),
    };
    if k < k_min {
        return Err(Error::KBelowMinimum { k, k_min });
    }
    Ok(())
}

pub fn solve_forward(net: &DirectedNetwork, k: usize, t: f64, eps: f64) -> Result<PlacementResult> {
    let objective = PlacementObjective::new(net, t, eps, Direction::Forward)?;
    solve_forward_with(net, &objective, k)
}

/// [`solve_forward`] reusing an existing objective (and its Gramian cache).
pub fn solve_forward_with(
    net: &DirectedNetwork,
    objective: &PlacementObjective,
    k: usize,
) -> Result<PlacementResult> {
    let start = Instant::now();
    check_cardinality(net, k)?;
    let objective = match objective.direction() {
        Direction::Forward => objective.clone(),
        Direction::Reverse => objective.reversed(),
    };
    let candidates = net.actuatable_nodes();
    let trace = forward_greedy_over(&objective, &candidates, |s| forward_feasible(net, s, k), k)?;
    let chosen = trace.final_set.clone();
    PlacementResult::from_set(&objective, chosen, Some(trace), start)
}

pub fn solve_reverse(net: &DirectedNetwork, k: usize, t: f64, eps: f64) -> Result<PlacementResult> {
    let objective = PlacementObjective::new(net, t, eps, Direction::Reverse)?;
    solve_reverse_with(net, &objective, k)
}

/// [`solve_reverse`] reusing an existing objective (and its Gramian cache).
pub fn solve_reverse_with(
    net: &DirectedNetwork,
    objective: &PlacementObjective,
    k: usize,
) -> Result<PlacementResult> {
    let start = Instant::now();
    check_cardinality(net, k)?;
    let objective = match objective.direction() {
        Direction::Reverse => objective.clone(),
        Direction::Forward => objective.reversed(),
    };
    let candidates = net.actuatable_nodes();
    let n_excl = candidates.len() - k;
    let trace =
        reverse_greedy_over(&objective, &candidates, |r| reverse_feasible(net, r, k), n_excl)?;
    let chosen = objective.actuators_of(trace.final_set.as_slice());
    PlacementResult::from_set(&objective, chosen, Some(trace), start)
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

    fn free(k: usize) -> impl Fn(&ActuatorSet) -> Result<bool> {
        move |s| Ok(s.len() <= k)
    }

    #[test]
    fn modular_forward_is_optimal() {
        let f = Modular { weights: vec![5.0, 3.0, 1.0] };
        let trace = forward_greedy(&f, free(2), 2).unwrap();
        assert_eq!(trace.nodes(), vec![0, 1]);
        assert_eq!(trace.objective_values, vec![0.0, 5.0, 8.0]);
        assert_eq!(trace.picks[1].gain, 3.0);
    }

    #[test]
    fn modular_reverse_takes_smallest() {
        let f = Modular { weights: vec![4.0, 1.0, 3.0, 2.0] };
        let trace = reverse_greedy(&f, free(2), 2).unwrap();
        assert_eq!(trace.final_set, ActuatorSet::from_nodes([1, 3]));
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let f = Modular { weights: vec![1.0, 2.0, 2.0, 2.0] };
        assert_eq!(forward_greedy(&f, free(1), 1).unwrap().nodes(), vec![1]);
        let g = Modular { weights: vec![2.0, 1.0, 1.0] };
        assert_eq!(reverse_greedy(&g, free(1), 1).unwrap().nodes(), vec![1]);
    }

    #[test]
    fn rejected_candidates_stay_out() {
        let f = Modular { weights: vec![5.0, 3.0, 1.0] };
        // node 0 may never be added
        let trace = forward_greedy(&f, |s: &ActuatorSet| Ok(!s.contains(0)), 2).unwrap();
        assert_eq!(trace.nodes(), vec![1, 2]);
        assert_eq!(trace.picks[0].rejected, vec![0]);
        assert!(trace.picks[1].rejected.is_empty());
        let err = forward_greedy(&f, |s: &ActuatorSet| Ok(!s.contains(0)), 3).unwrap_err();
        assert_eq!(err, Error::InfeasibleAtSize { reached: 2, target: 3 });
    }

    #[test]
    fn example1_forward() {
        let net = example1();
        let res = solve_forward(&net, 2, 2.0, 1e-9).unwrap();
        assert_eq!(res.chosen, ActuatorSet::from_nodes([2, 3]));
        let trace = res.trace.unwrap();
        assert_eq!(trace.nodes(), vec![2, 3]);
        assert!(trace.objective_values.windows(2).all(|w| w[1] > w[0]));
        assert!((res.f_eps - 30.4846).abs() < 1e-3);
        assert!(res.f_exact.unwrap() > res.f_eps);
    }

    #[test]
    fn example1_reverse() {
        let net = example1();
        let res = solve_reverse(&net, 2, 2.0, 1e-9).unwrap();
        let trace = res.trace.unwrap();
        assert_eq!(trace.picks[0].node, 0);
        assert_eq!(res.chosen.len(), 2);
        assert!(forward_feasible(&net, &res.chosen, 2).unwrap());
        assert!(trace.picks.iter().all(|p| p.gain >= 0.0));
    }

    #[test]
    fn boundary_cardinalities() {
        let net = example1();
        let all = solve_forward(&net, 4, 1.0, 1e-3).unwrap();
        assert_eq!(all.chosen, ActuatorSet::full(4));
        let rev = solve_reverse(&net, 4, 1.0, 1e-3).unwrap();
        assert_eq!(rev.chosen, ActuatorSet::full(4));
        assert!(rev.trace.unwrap().picks.is_empty());
        assert_eq!(solve_forward(&net, 1, 1.0, 1e-3).unwrap_err(), Error::KBelowMinimum { k: 1, k_min: 2 });
        assert!(matches!(solve_reverse(&net, 5, 1.0, 1e-3), Err(Error::KAboveActuatable { .. })));
    }

    #[test]
    fn deterministic_traces() {
        let net = example1();
        let a = solve_forward(&net, 3, 1.5, 1e-4).unwrap();
        let b = solve_forward(&net, 3, 1.5, 1e-4).unwrap();
        assert_eq!(a.trace, b.trace);
        let c = solve_reverse(&net, 2, 1.5, 1e-4).unwrap();
        let d = solve_reverse(&net, 2, 1.5, 1e-4).unwrap();
        assert_eq!(c.trace, d.trace);
    }
}
