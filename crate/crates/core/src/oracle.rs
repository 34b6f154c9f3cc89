//! Reference engines the solvers are checked against: exhaustive and sampled
//! placement, a numeric structural-controllability test, a quadrature
//! Gramian, and two set functions on which the greedy algorithms do badly.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feasibility::forward_feasible;
use crate::gramian::Gramian;
use crate::greedy::{Direction, PlacementObjective, PlacementResult, SetFunction};
use crate::guarantees::{binomial, k_subsets};
use crate::linalg::symmetrize;
use crate::network::{ActuatorSet, DirectedNetwork};

pub const BRUTE_FORCE_LIMIT: u128 = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub seed: u64,
    pub weight_draws: usize,
    pub samples: usize,
    pub quadrature_steps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { seed: 0, weight_draws: 7, samples: 10_000, quadrature_steps: 4096 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weight_draws == 0 {
            return Err(Error::MalformedInput("weight_draws must be at least 1".into()));
        }
        if self.quadrature_steps < 16 {
            return Err(Error::MalformedInput("quadrature_steps must be at least 16".into()));
        }
        if self.samples == 0 {
            return Err(Error::MalformedInput("samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// What the exhaustive search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// `F_ε`.
    Regularized,
    /// `F`; sets with a singular Gramian are skipped.
    Exact,
}

/// Feasible `K`-set minimizing `F_ε`; ties go to the lexicographically
/// smallest set.
pub fn brute_force_optimal(net: &DirectedNetwork, k: usize, t: f64, eps: f64) -> Result<PlacementResult> {
    brute_force_optimal_by(net, k, t, eps, Metric::Regularized)
}

pub fn brute_force_optimal_by(
    net: &DirectedNetwork,
    k: usize,
    t: f64,
    eps: f64,
    metric: Metric,
) -> Result<PlacementResult> {
    let objective = PlacementObjective::new(net, t, eps, Direction::Forward)?;
    brute_force_with(net, &objective, k, metric)
}

pub fn brute_force_with(
    net: &DirectedNetwork,
    objective: &PlacementObjective,
    k: usize,
    metric: Metric,
) -> Result<PlacementResult> {
    let start = Instant::now();
    let candidates = net.actuatable_nodes();
    let count = binomial(candidates.len(), k);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::EnumerationTooLarge { count, limit: BRUTE_FORCE_LIMIT });
    }
    let subsets: Vec<ActuatorSet> = k_subsets(candidates.len(), k)
        .into_iter()
        .map(|s| s.iter().map(|i| candidates[i]).collect())
        .collect();
    let scored: Vec<Result<Option<f64>>> = subsets
        .par_iter()
        .map(|s| {
            if !forward_feasible(net, s, k)? {
                return Ok(None);
            }
            match metric {
                Metric::Regularized => objective.f_eps(s.as_slice()).map(Some),
                Metric::Exact => Ok(objective.cache().f(s.as_slice()).ok()),
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, score) in scored.into_iter().enumerate() {
        if let Some(v) = score? {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    let (i, _) = best.ok_or(Error::Infeasible)?;
    PlacementResult::from_set(objective, subsets[i].clone(), None, start)
}

/// Best feasible set among `samples` uniform `K`-subsets of the actuatable
/// nodes.
pub fn random_baseline(
    net: &DirectedNetwork,
    k: usize,
    t: f64,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<PlacementResult> {
    let objective = PlacementObjective::new(net, t, eps, Direction::Forward)?;
    random_baseline_with(net, &objective, k, samples, seed)
}

pub fn random_baseline_with(
    net: &DirectedNetwork,
    objective: &PlacementObjective,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<PlacementResult> {
    let start = Instant::now();
    if samples == 0 {
        return Err(Error::NoFeasibleSample(0));
    }
    let candidates = net.actuatable_nodes();
    if k > candidates.len() {
        return Err(Error::KAboveActuatable { k, available: candidates.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<ActuatorSet> = (0..samples)
        .map(|_| sample(&mut rng, candidates.len(), k).into_iter().map(|i| candidates[i]).collect())
        .collect();
    let scored: Vec<Result<Option<f64>>> = draws
        .par_iter()
        .map(|s| {
            if forward_feasible(net, s, k)? {
                objective.f_eps(s.as_slice()).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, score) in scored.into_iter().enumerate() {
        if let Some(v) = score? {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    let (i, _) = best.ok_or(Error::NoFeasibleSample(samples))?;
    PlacementResult::from_set(objective, draws[i].clone(), None, start)
}

/// Numeric structural-controllability test: redraw every nonzero weight
/// uniformly in `[0.5, 1.5]` with its sign kept and check the rank of the
/// controllability matrix. True iff some draw is controllable.
pub fn randomized_structurally_controllable(
    net: &DirectedNetwork,
    s: &ActuatorSet,
    draws: usize,
    seed: u64,
) -> bool {
    let n = net.n();
    if s.is_empty() || s.check_range(n).is_err() {
        return false;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws.max(1) {
        let a = net.weights().map(|w| {
            if w == 0.0 {
                0.0
            } else {
                w.signum() * rng.random_range(0.5..=1.5)
            }
        });
        if controllable(&a, s.as_slice()) {
            return true;
        }
    }
    false
}

fn controllable(a: &DMatrix<f64>, inputs: &[usize]) -> bool {
    let n = a.nrows();
    let m = inputs.len();
    let mut ctrb = DMatrix::<f64>::zeros(n, n * m);
    let mut block = DMatrix::<f64>::zeros(n, m);
    for (c, &v) in inputs.iter().enumerate() {
        block[(v, c)] = 1.0;
    }
    for p in 0..n {
        for mut col in block.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        ctrb.view_mut((0, p * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    let sv = ctrb.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    top > 0.0 && sv.iter().filter(|&&x| x > 1e-9 * top).count() == n
}

/// Taylor-series exponential with scaling and squaring, kept independent of
/// the Padé code used by the solver.
fn expm_taylor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).sum::<f64>();
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.25 {
        squarings += 1;
    }
    let scaled = a / 2f64.powi(squarings);
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Composite Simpson rule for `∫₀ᵀ e^{Aτ} B Bᵀ e^{Aᵀτ} dτ`; odd step counts
/// are rounded up.
pub fn gramian_quadrature(net: &DirectedNetwork, s: &ActuatorSet, t: f64, steps: usize) -> Gramian {
    let n = net.n();
    let steps = steps.max(16).div_ceil(2) * 2;
    let h = t / steps as f64;
    let step = expm_taylor(&(net.weights() * h));
    let mut phi = DMatrix::<f64>::identity(n, n);
    let mut w = DMatrix::<f64>::zeros(n, n);
    for i in 0..=steps {
        let weight = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for v in s.iter() {
            let c = phi.column(v);
            w += (&c * c.transpose()) * weight;
        }
        phi = &step * &phi;
    }
    w *= h / 3.0;
    symmetrize(&mut w);
    Gramian { matrix: w, horizon: t }
}

/// Set function given by its value on every subset mask of a small ground set.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedFunction {
    ground: usize,
    values: Vec<f64>,
}

impl TabulatedFunction {
    pub fn new(ground: usize, values: Vec<f64>) -> Result<Self> {
        if ground > 20 || values.len() != 1 << ground {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a ground set of {}",
                values.len(),
                ground
            )));
        }
        Ok(Self { ground, values })
    }
}

impl SetFunction for TabulatedFunction {
    fn ground_size(&self) -> usize {
        self.ground
    }
    fn evaluate(&self, subset: &[usize]) -> Result<f64> {
        let mut mask = 0usize;
        for &v in subset {
            if v >= self.ground {
                return Err(Error::NodeOutOfRange { node: v, n: self.ground });
            }
            mask |= 1 << v;
        }
        Ok(self.values[mask])
    }
}

/// Three-element increasing function with submodularity ratio
/// `δ/(2 - 4δ)` and zero curvature, for `0 < δ < 1/4`.
pub fn counterexample_gamma(delta: f64) -> Result<TabulatedFunction> {
    if !(delta > 0.0 && delta < 0.25) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    // masks: bit 0 = v1, bit 1 = v2, bit 2 = v3
    let values = vec![
        0.0,         // ∅
        delta,       // {v1}
        2.0 * delta, // {v2}
        1.0,         // {v1, v2}
        2.0 * delta, // {v3}
        1.0,         // {v1, v3}
        4.0 * delta, // {v2, v3}
        2.0,         // V
    ];
    TabulatedFunction::new(3, values)
}

/// `f(S) = min{1 + |S ∩ S̄|, |S|} + δ|S|` with `S̄ = {v1, …, vN}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaCounterexample {
    pub n: usize,
    pub big_n: usize,
    pub delta: f64,
}

impl SetFunction for AlphaCounterexample {
    fn ground_size(&self) -> usize {
        self.n
    }
    fn evaluate(&self, subset: &[usize]) -> Result<f64> {
        let size = subset.len();
        let inside = subset.iter().filter(|&&v| v < self.big_n).count();
        Ok((1 + inside).min(size) as f64 + self.delta * size as f64)
    }
}

pub fn counterexample_alpha(n: usize, big_n: usize, delta: f64) -> Result<AlphaCounterexample> {
    if !(big_n >= 1 && n > 2 * big_n) {
        return Err(Error::DimensionConstraintViolated(format!("need n > 2N >= 2, got n = {n}, N = {big_n}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    Ok(AlphaCounterexample { n, big_n, delta })
}
