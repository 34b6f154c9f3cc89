//! Finite-horizon controllability Gramian and the energy metrics built on it.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{expm, spectral_norm_sym, symmetrize, trace_inverse_spd};
use crate::network::{ActuatorSet, DirectedNetwork};

/// Relative eigenvalue threshold below which a Gramian counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct Gramian {
    pub matrix: DMatrix<f64>,
    pub horizon: f64,
}

impl Gramian {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn norm(&self) -> f64 {
        spectral_norm_sym(&self.matrix)
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::HorizonNonpositive(t))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::EpsNonpositive(eps))
    }
}

/// Van Loan: with `M = [[-A, BBᵀ], [0, Aᵀ]]·T` and `e^M = [[F11, F12], [0, F22]]`,
/// the Gramian is `F22ᵀ F12`.
fn van_loan(a: &DMatrix<f64>, nodes: &[usize], t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-a * t));
    m.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * t));
    for &v in nodes {
        m[(v, n + v)] = t;
    }
    let e = expm(&m);
    let f12 = e.view((0, n), (n, n));
    let f22 = e.view((n, n), (n, n));
    let mut w = f22.transpose() * f12;
    symmetrize(&mut w);
    w
}

/// `W_T(S) = ∫₀ᵀ e^{Aτ} B(S) B(S)ᵀ e^{Aᵀτ} dτ`.
pub fn gramian(net: &DirectedNetwork, s: &ActuatorSet, t: f64) -> Result<Gramian> {
    check_horizon(t)?;
    s.check_range(net.n())?;
    let n = net.n();
    let matrix = if s.is_empty() {
        DMatrix::zeros(n, n)
    } else {
        van_loan(net.weights(), s.as_slice(), t)
    };
    Ok(Gramian { matrix, horizon: t })
}

/// `tr((W + εI)⁻¹)`, with one symmetrize-and-jitter retry if Cholesky fails.
pub fn f_eps_of_matrix(w: &DMatrix<f64>, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let n = w.nrows();
    let shifted = w + DMatrix::<f64>::identity(n, n) * eps;
    if let Some(v) = trace_inverse_spd(&shifted) {
        return Ok(v);
    }
    let mut retry = shifted;
    symmetrize(&mut retry);
    let jitter = SINGULAR_RTOL * retry.trace().abs();
    for i in 0..n {
        retry[(i, i)] += jitter;
    }
    trace_inverse_spd(&retry).ok_or(Error::SingularGramian)
}

/// `tr(W⁻¹)`, refusing matrices whose smallest eigenvalue is below
/// `1e-14 ‖W‖`.
pub fn f_of_matrix(w: &DMatrix<f64>) -> Result<f64> {
    let eig = w.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 || min <= SINGULAR_RTOL * max {
        return Err(Error::SingularGramian);
    }
    trace_inverse_spd(w).ok_or(Error::SingularGramian)
}

pub fn metric_f_eps(net: &DirectedNetwork, s: &ActuatorSet, t: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let w = gramian(net, s, t)?;
    f_eps_of_matrix(&w.matrix, eps)
}

pub fn metric_f(net: &DirectedNetwork, s: &ActuatorSet, t: f64) -> Result<f64> {
    let w = gramian(net, s, t)?;
    f_of_matrix(&w.matrix)
}

pub fn min_eigenvalue(w: &Gramian) -> f64 {
    min_eigenvalue_of(&w.matrix)
}

pub(crate) fn min_eigenvalue_of(w: &DMatrix<f64>) -> f64 {
    if w.nrows() == 0 {
        return 0.0;
    }
    w.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `ρ_v(S) = F_ε(S) - F_ε(S ∪ {v})`.
pub fn marginal_gain(
    net: &DirectedNetwork,
    s: &ActuatorSet,
    v: usize,
    t: f64,
    eps: f64,
) -> Result<f64> {
    if v >= net.n() {
        return Err(Error::NodeOutOfRange { node: v, n: net.n() });
    }
    if s.contains(v) {
        return Err(Error::NodeAlreadyInSet(v));
    }
    Ok(metric_f_eps(net, s, t, eps)? - metric_f_eps(net, &s.with(v), t, eps)?)
}

/// Per-node Gramians `W_T({v})`. The Gramian is additive in `S`, so any
/// `W_T(S)` over the cached nodes is a sum of these.
#[derive(Debug, Clone)]
pub struct NodeGramians {
    n: usize,
    horizon: f64,
    per_node: Vec<Option<DMatrix<f64>>>,
}

impl NodeGramians {
    pub fn new(net: &DirectedNetwork, t: f64, nodes: &[usize]) -> Result<Self> {
        check_horizon(t)?;
        let n = net.n();
        if let Some(&bad) = nodes.iter().find(|&&v| v >= n) {
            return Err(Error::NodeOutOfRange { node: bad, n });
        }
        let computed: Vec<(usize, DMatrix<f64>)> =
            nodes.par_iter().map(|&v| (v, van_loan(net.weights(), &[v], t))).collect();
        let mut per_node = vec![None; n];
        for (v, w) in computed {
            per_node[v] = Some(w);
        }
        Ok(Self { n, horizon: t, per_node })
    }

    /// Caches every actuatable node.
    pub fn for_network(net: &DirectedNetwork, t: f64) -> Result<Self> {
        Self::new(net, t, &net.actuatable_nodes())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn matrix(&self, nodes: &[usize]) -> Result<DMatrix<f64>> {
        let mut w = DMatrix::zeros(self.n, self.n);
        for &v in nodes {
            match self.per_node.get(v) {
                Some(Some(wv)) => w += wv,
                Some(None) => return Err(Error::NotActuatable(v)),
                None => return Err(Error::NodeOutOfRange { node: v, n: self.n }),
            }
        }
        Ok(w)
    }

    pub fn gramian(&self, s: &ActuatorSet) -> Result<Gramian> {
        Ok(Gramian { matrix: self.matrix(s.as_slice())?, horizon: self.horizon })
    }

    pub fn f_eps(&self, nodes: &[usize], eps: f64) -> Result<f64> {
        f_eps_of_matrix(&self.matrix(nodes)?, eps)
    }

    pub fn f(&self, nodes: &[usize]) -> Result<f64> {
        f_of_matrix(&self.matrix(nodes)?)
    }

    pub fn min_eigenvalue(&self, nodes: &[usize]) -> Result<f64> {
        Ok(min_eigenvalue_of(&self.matrix(nodes)?))
    }
}
