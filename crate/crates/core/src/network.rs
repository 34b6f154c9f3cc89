//! Network model: the weighted sparsity pattern of `A`, which states may carry
//! an actuator, and the builders that produce such networks (JSON files,
//! degree-sequence graphs, linearized swing equations).
//!
//! Entry `A[(i, j)] != 0` is the directed edge `j -> i`: state `j` drives the
//! derivative of state `i`.

use std::collections::{BTreeSet, HashMap, VecDeque};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedNetwork {
    weights: DMatrix<f64>,
    actuatable: Vec<bool>,
    labels: Vec<String>,
}

impl DirectedNetwork {
    /// Builds a network from its weight matrix. Missing labels default to the
    /// 1-based node number.
    pub fn new(
        weights: DMatrix<f64>,
        actuatable: Option<Vec<bool>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let net = Self::new_unchecked(weights, actuatable, labels)?;
        if !strongly_connected(&net) {
            return Err(Error::NotStronglyConnected);
        }
        Ok(net)
    }

    /// Same as [`DirectedNetwork::new`] without the strong-connectivity check.
    pub(crate) fn new_unchecked(
        weights: DMatrix<f64>,
        actuatable: Option<Vec<bool>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 {
            return Err(Error::MalformedInput("network needs at least one node".into()));
        }
        if weights.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "weight matrix is {}x{}",
                n,
                weights.ncols()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::MalformedInput("non-finite weight".into()));
        }
        let actuatable = actuatable.unwrap_or_else(|| vec![true; n]);
        if actuatable.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "actuatable mask has {} entries for {} nodes",
                actuatable.len(),
                n
            )));
        }
        let labels = labels.unwrap_or_else(|| (1..=n).map(|i| i.to_string()).collect());
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                n
            )));
        }
        Ok(Self { weights, actuatable, labels })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn actuatable_mask(&self) -> &[bool] {
        &self.actuatable
    }

    pub fn is_actuatable(&self, v: usize) -> bool {
        self.actuatable[v]
    }

    pub fn all_actuatable(&self) -> bool {
        self.actuatable.iter().all(|&a| a)
    }

    /// Indices of the nodes that may carry an actuator, ascending.
    pub fn actuatable_nodes(&self) -> Vec<usize> {
        (0..self.n()).filter(|&v| self.actuatable[v]).collect()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.weights[(to, from)] != 0.0
    }

    /// Directed edges `(from, to, weight)` ordered by `from`, then `to`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for from in 0..n {
            for to in 0..n {
                let w = self.weights[(to, from)];
                if w != 0.0 {
                    out.push((from, to, w));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    pub fn out_neighbors(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&to| self.weights[(to, from)] != 0.0)
    }

    pub fn in_neighbors(&self, to: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&from| self.weights[(to, from)] != 0.0)
    }

    /// Label lookup, used by the CLI to read node sets.
    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Sorted, duplicate-free set of node indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActuatorSet(Vec<usize>);

impl ActuatorSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_nodes<I: IntoIterator<Item = usize>>(nodes: I) -> Self {
        let set: BTreeSet<usize> = nodes.into_iter().collect();
        Self(set.into_iter().collect())
    }

    /// All nodes `0..n`.
    pub fn full(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn with(&self, v: usize) -> Self {
        let mut out = self.clone();
        if let Err(pos) = out.0.binary_search(&v) {
            out.0.insert(pos, v);
        }
        out
    }

    pub fn without(&self, v: usize) -> Self {
        let mut out = self.clone();
        if let Ok(pos) = out.0.binary_search(&v) {
            out.0.remove(pos);
        }
        out
    }

    /// Members of `universe` that are not in `self`.
    pub fn complement_in(&self, universe: &[usize]) -> Self {
        Self(universe.iter().copied().filter(|&v| !self.contains(v)).collect())
    }

    pub fn union(&self, other: &ActuatorSet) -> Self {
        Self::from_nodes(self.iter().chain(other.iter()))
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&v) if v >= n => Err(Error::NodeOutOfRange { node: v, n }),
            _ => Ok(()),
        }
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl FromIterator<usize> for ActuatorSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::from_nodes(iter)
    }
}

/// True iff every node reaches every other node along directed edges.
pub fn strongly_connected(net: &DirectedNetwork) -> bool {
    let n = net.n();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let linked = if forward { net.has_edge(u, v) } else { net.has_edge(v, u) };
                if linked && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actuatable: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

/// One nonzero of `A`. Node numbers are 1-based: `from = j, to = i` sets `A[i][j] = w`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub from: usize,
    pub to: usize,
    pub w: f64,
}

impl NetworkFile {
    pub fn into_network(self) -> Result<DirectedNetwork> {
        let n = self.n;
        if n == 0 {
            return Err(Error::MalformedInput("n must be at least 1".into()));
        }
        let mut weights = DMatrix::zeros(n, n);
        for e in &self.edges {
            if e.from == 0 || e.from > n || e.to == 0 || e.to > n {
                return Err(Error::MalformedInput(format!(
                    "edge {} -> {} outside nodes 1..={}",
                    e.from, e.to, n
                )));
            }
            if !e.w.is_finite() || e.w == 0.0 {
                return Err(Error::MalformedInput(format!(
                    "edge {} -> {} has weight {}",
                    e.from, e.to, e.w
                )));
            }
            let slot = &mut weights[(e.to - 1, e.from - 1)];
            if *slot != 0.0 {
                return Err(Error::MalformedInput(format!(
                    "duplicate edge {} -> {}",
                    e.from, e.to
                )));
            }
            *slot = e.w;
        }
        DirectedNetwork::new(weights, self.actuatable, self.labels)
    }
}

impl From<&DirectedNetwork> for NetworkFile {
    fn from(net: &DirectedNetwork) -> Self {
        let default_labels = (1..=net.n()).all(|i| net.labels[i - 1] == i.to_string());
        NetworkFile {
            n: net.n(),
            edges: net
                .edges()
                .into_iter()
                .map(|(from, to, w)| EdgeEntry { from: from + 1, to: to + 1, w })
                .collect(),
            actuatable: (!net.all_actuatable()).then(|| net.actuatable.clone()),
            labels: (!default_labels).then(|| net.labels.clone()),
        }
    }
}

pub fn parse_network(text: &str) -> Result<DirectedNetwork> {
    let file: NetworkFile =
        serde_json::from_str(text).map_err(|e| Error::MalformedInput(e.to_string()))?;
    file.into_network()
}

pub fn network_to_json(net: &DirectedNetwork) -> String {
    serde_json::to_string_pretty(&NetworkFile::from(net)).expect("network serializes")
}

// ---------------------------------------------------------------------------
// Degree-sequence graphs

/// Symmetric unit-weight network realizing `degrees` exactly.
///
/// Havel-Hakimi gives an initial realization, `10 |E|` random double-edge
/// swaps randomize it, and further swaps join components until the graph is
/// connected.
pub fn generate_by_degrees(degrees: &[usize], seed: u64) -> Result<DirectedNetwork> {
    let n = degrees.len();
    if n == 0 {
        return Err(Error::MalformedInput("empty degree sequence".into()));
    }
    let mut edges = havel_hakimi(degrees)?;
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in &edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if edges.len() >= 2 {
        for _ in 0..10 * edges.len() {
            let i = rng.random_range(0..edges.len());
            let j = rng.random_range(0..edges.len());
            if i == j {
                continue;
            }
            let (a, b) = edges[i];
            let (mut c, mut d) = edges[j];
            if rng.random_bool(0.5) {
                std::mem::swap(&mut c, &mut d);
            }
            // (a,b),(c,d) -> (a,d),(c,b)
            if a == d || c == b || adj[a][d] || adj[c][b] {
                continue;
            }
            adj[a][b] = false;
            adj[b][a] = false;
            adj[c][d] = false;
            adj[d][c] = false;
            adj[a][d] = true;
            adj[d][a] = true;
            adj[c][b] = true;
            adj[b][c] = true;
            edges[i] = (a, d);
            edges[j] = (c, b);
        }
    }

    connect_components(&mut edges, &mut adj)?;

    let mut weights = DMatrix::zeros(n, n);
    for &(a, b) in &edges {
        weights[(a, b)] = 1.0;
        weights[(b, a)] = 1.0;
    }
    DirectedNetwork::new(weights, None, None)
}

fn havel_hakimi(degrees: &[usize]) -> Result<Vec<(usize, usize)>> {
    let n = degrees.len();
    let total: usize = degrees.iter().sum();
    if !total.is_multiple_of(2) || degrees.iter().any(|&d| d >= n.max(1) && d > 0) {
        return Err(Error::NotGraphical);
    }
    let mut remaining: Vec<usize> = degrees.to_vec();
    let mut edges = Vec::with_capacity(total / 2);
    loop {
        let mut order: Vec<usize> = (0..n).filter(|&v| remaining[v] > 0).collect();
        if order.is_empty() {
            break;
        }
        order.sort_by(|&x, &y| remaining[y].cmp(&remaining[x]).then(x.cmp(&y)));
        let v = order[0];
        let d = remaining[v];
        if d > order.len() - 1 {
            return Err(Error::NotGraphical);
        }
        remaining[v] = 0;
        for &u in &order[1..=d] {
            remaining[u] -= 1;
            edges.push((v.min(u), v.max(u)));
        }
    }
    Ok(edges)
}

fn components(n: usize, adj: &[Vec<bool>]) -> Vec<usize> {
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if adj[u][v] && comp[v] == usize::MAX {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

fn connected_without(adj: &[Vec<bool>], a: usize, b: usize) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![a];
    seen[a] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let skip = (u == a && v == b) || (u == b && v == a);
            if adj[u][v] && !skip && !seen[v] {
                if v == b {
                    return true;
                }
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    false
}

fn connect_components(edges: &mut [(usize, usize)], adj: &mut [Vec<bool>]) -> Result<()> {
    let n = adj.len();
    // every swap merges two components, so n rounds always suffice
    for _ in 0..n {
        let comp = components(n, adj);
        let count = comp.iter().max().map_or(0, |m| m + 1);
        if count <= 1 {
            return Ok(());
        }
        // an edge on a cycle can be rerouted without splitting its component
        let cyclic = edges
            .iter()
            .position(|&(a, b)| connected_without(adj, a, b))
            .ok_or(Error::ConnectivityUnreachable)?;
        let (a, b) = edges[cyclic];
        let other = edges
            .iter()
            .position(|&(c, _)| comp[c] != comp[a])
            .ok_or(Error::ConnectivityUnreachable)?;
        let (c, d) = edges[other];
        adj[a][b] = false;
        adj[b][a] = false;
        adj[c][d] = false;
        adj[d][c] = false;
        adj[a][c] = true;
        adj[c][a] = true;
        adj[b][d] = true;
        adj[d][b] = true;
        edges[cyclic] = (a.min(c), a.max(c));
        edges[other] = (b.min(d), b.max(d));
    }
    if components(n, adj).iter().all(|&c| c == 0) {
        Ok(())
    } else {
        Err(Error::ConnectivityUnreachable)
    }
}

/// Degrees of the 23-node study: node `i` (1-based) has degree `i` for
/// `i < 12` and `24 - i` otherwise.
pub fn staircase_degrees() -> Vec<usize> {
    (1..=23).map(|i| if i < 12 { i } else { 24 - i }).collect()
}

/// Randomized variant of [`staircase_degrees`]: nodes `i, i+1, i+2` for
/// `i = 1, 4, 7` draw degrees in `[i, i+2]`, nodes 10 and 11 in `[10, 11]`,
/// node 12 has degree 12 and node `i > 12` mirrors node `24 - i`.
pub fn randomized_staircase_degrees<R: Rng>(rng: &mut R) -> Vec<usize> {
    let mut deg = vec![0usize; 24];
    for base in [1usize, 4, 7] {
        for i in base..base + 3 {
            deg[i] = rng.random_range(base..=base + 2);
        }
    }
    for d in deg.iter_mut().take(12).skip(10) {
        *d = rng.random_range(10..=11);
    }
    deg[12] = 12;
    for i in 13..=23 {
        deg[i] = deg[24 - i];
    }
    deg[1..].to_vec()
}

// ---------------------------------------------------------------------------
// Linearized swing equations

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Bus {
    pub id: String,
    #[serde(rename = "M")]
    pub inertia: f64,
    #[serde(rename = "D")]
    pub damping: f64,
    #[serde(deserialize_with = "de_flag")]
    pub injectable: bool,
}

/// Line between two buses given by their positions in the bus list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
}

fn de_flag<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Ok(true),
        "0" | "false" | "no" | "n" => Ok(false),
        other => Err(serde::de::Error::custom(format!("bad boolean {other:?}"))),
    }
}

/// State-space network of `M θ̈ + D θ̇ = P - Σ a (θ_i - θ_j)`.
///
/// Buses with `M = 0` contribute the single state `θ` (actuatable when
/// injectable); buses with `M > 0` contribute `θ` (never actuatable) and `θ̇`
/// (actuatable when injectable).
pub fn build_swing_model(buses: &[Bus], branches: &[Branch]) -> Result<DirectedNetwork> {
    if buses.is_empty() {
        return Err(Error::MalformedInput("no buses".into()));
    }
    for bus in buses {
        if !(bus.damping > 0.0) || !bus.damping.is_finite() {
            return Err(Error::NonpositiveDamping(bus.id.clone()));
        }
        if !(bus.inertia >= 0.0) || !bus.inertia.is_finite() {
            return Err(Error::MalformedInput(format!("bus {} has inertia {}", bus.id, bus.inertia)));
        }
    }
    let nb = buses.len();
    let mut coupling = DMatrix::<f64>::zeros(nb, nb);
    for br in branches {
        if br.from >= nb || br.to >= nb || br.from == br.to {
            return Err(Error::MalformedInput(format!(
                "branch {} - {} is not between two distinct buses",
                br.from, br.to
            )));
        }
        if !(br.susceptance > 0.0) || !br.susceptance.is_finite() {
            return Err(Error::MalformedInput(format!(
                "branch {} - {} has susceptance {}",
                br.from, br.to, br.susceptance
            )));
        }
        coupling[(br.from, br.to)] += br.susceptance;
        coupling[(br.to, br.from)] += br.susceptance;
    }
    let mut adj = vec![vec![false; nb]; nb];
    for i in 0..nb {
        for j in 0..nb {
            adj[i][j] = coupling[(i, j)] != 0.0;
        }
    }
    if components(nb, &adj).iter().any(|&c| c != 0) {
        return Err(Error::DisconnectedGrid);
    }

    // angle state index per bus, plus the frequency state for inertial buses
    let mut theta = Vec::with_capacity(nb);
    let mut omega = Vec::with_capacity(nb);
    let mut n = 0;
    for bus in buses {
        theta.push(n);
        n += 1;
        if bus.inertia > 0.0 {
            omega.push(Some(n));
            n += 1;
        } else {
            omega.push(None);
        }
    }

    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut actuatable = vec![false; n];
    let mut labels = vec![String::new(); n];
    for (i, bus) in buses.iter().enumerate() {
        let total: f64 = coupling.row(i).sum();
        let p = theta[i];
        labels[p] = format!("theta_{}", bus.id);
        match omega[i] {
            None => {
                let scale = 1.0 / bus.damping;
                if total != 0.0 {
                    a[(p, p)] = -total * scale;
                }
                for j in 0..nb {
                    if coupling[(i, j)] != 0.0 {
                        a[(p, theta[j])] += coupling[(i, j)] * scale;
                    }
                }
                actuatable[p] = bus.injectable;
            }
            Some(q) => {
                let scale = 1.0 / bus.inertia;
                labels[q] = format!("omega_{}", bus.id);
                a[(p, q)] = 1.0;
                if total != 0.0 {
                    a[(q, p)] = -total * scale;
                }
                for j in 0..nb {
                    if coupling[(i, j)] != 0.0 {
                        a[(q, theta[j])] += coupling[(i, j)] * scale;
                    }
                }
                a[(q, q)] = -bus.damping * scale;
                actuatable[q] = bus.injectable;
            }
        }
    }

    if nb == 1 {
        // a lone inertial bus has no path from θ back to θ̇
        DirectedNetwork::new_unchecked(a, Some(actuatable), Some(labels))
    } else {
        DirectedNetwork::new(a, Some(actuatable), Some(labels))
    }
}

#[derive(Debug, Deserialize)]
struct BranchRow {
    from: String,
    to: String,
    b: f64,
}

/// Reads the `buses.csv` (`id,M,D,injectable`) and `branches.csv`
/// (`from,to,b`) pair and builds the swing model.
pub fn parse_swing_csv(buses_csv: &str, branches_csv: &str) -> Result<DirectedNetwork> {
    let mut buses = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(buses_csv.as_bytes());
    for row in rdr.deserialize::<Bus>() {
        buses.push(row.map_err(|e| Error::MalformedInput(format!("buses.csv: {e}")))?);
    }
    let index: HashMap<&str, usize> =
        buses.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
    if index.len() != buses.len() {
        return Err(Error::MalformedInput("duplicate bus id".into()));
    }
    let mut branches = Vec::new();
    let mut rdr =
        csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(branches_csv.as_bytes());
    for row in rdr.deserialize::<BranchRow>() {
        let row = row.map_err(|e| Error::MalformedInput(format!("branches.csv: {e}")))?;
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::MalformedInput(format!("unknown bus {id:?}")))
        };
        branches.push(Branch { from: lookup(&row.from)?, to: lookup(&row.to)?, susceptance: row.b });
    }
    build_swing_model(&buses, &branches)
}
