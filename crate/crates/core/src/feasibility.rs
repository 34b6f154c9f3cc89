//! Membership oracles for the structural-controllability matroids.
//!
//! Forward: `S` extends to a structurally controllable `K`-set iff the
//! maximum matching of `H_b(S)` has at least `n - K + |S|` edges. Reverse:
//! the exclusion set `R` leaves a structurally controllable `K`-subset iff
//! `H_r(V \ R)` carries a flow of value `n`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::network::{ActuatorSet, DirectedNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork {
    pub node_count: usize,
    pub arcs: Vec<Arc>,
    pub source: usize,
    pub sink: usize,
}

impl FlowNetwork {
    pub fn new(node_count: usize, source: usize, sink: usize) -> Self {
        assert!(source < node_count && sink < node_count && source != sink);
        Self { node_count, arcs: Vec::new(), source, sink }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, capacity: u64) {
        assert!(from < self.node_count && to < self.node_count);
        assert!(to != self.source && from != self.sink, "arc touches a terminal the wrong way");
        self.arcs.push(Arc { from, to, capacity });
    }

    pub fn capacity_between(&self, from: usize, to: usize) -> u64 {
        self.arcs.iter().filter(|a| a.from == from && a.to == to).map(|a| a.capacity).sum()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.arcs.iter().filter(|a| a.from == node).count()
    }
}

/// Edmonds-Karp: shortest augmenting paths found by BFS on the residual graph.
pub fn max_flow(net: &FlowNetwork) -> u64 {
    let n = net.node_count;
    // residual arcs stored in pairs: 2k forward, 2k+1 backward
    let mut head = Vec::with_capacity(2 * net.arcs.len());
    let mut cap = Vec::with_capacity(2 * net.arcs.len());
    let mut adj = vec![Vec::new(); n];
    for a in &net.arcs {
        adj[a.from].push(head.len());
        head.push(a.to);
        cap.push(a.capacity);
        adj[a.to].push(head.len());
        head.push(a.from);
        cap.push(0);
    }
    let mut total = 0u64;
    let mut via = vec![usize::MAX; n];
    loop {
        via.fill(usize::MAX);
        let mut queue = VecDeque::from([net.source]);
        let mut reached = false;
        'bfs: while let Some(u) = queue.pop_front() {
            for &e in &adj[u] {
                let v = head[e];
                if cap[e] > 0 && v != net.source && via[v] == usize::MAX {
                    via[v] = e;
                    if v == net.sink {
                        reached = true;
                        break 'bfs;
                    }
                    queue.push_back(v);
                }
            }
        }
        if !reached {
            return total;
        }
        let mut push = u64::MAX;
        let mut v = net.sink;
        while v != net.source {
            let e = via[v];
            push = push.min(cap[e]);
            v = head[e ^ 1];
        }
        let mut v = net.sink;
        while v != net.source {
            let e = via[v];
            cap[e] -= push;
            cap[e ^ 1] += push;
            v = head[e ^ 1];
        }
        total += push;
    }
}

/// `H_b(S)`: left side `V ∪ S″`, right side `V′`. `v_i - v′_j` for every
/// network edge `v_i -> v_j`, and `v″_k - v′_k` for every `v_k ∈ S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteAux {
    pub n: usize,
    /// Pairs `(i, j)` for the edges `v_i - v′_j`.
    pub edges: Vec<(usize, usize)>,
    /// Nodes `k` with an edge `v″_k - v′_k`, ascending.
    pub actuator_edges: Vec<usize>,
}

impl BipartiteAux {
    pub fn left_count(&self) -> usize {
        self.n + self.actuator_edges.len()
    }

    pub fn right_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len() + self.actuator_edges.len()
    }

    /// Unit-capacity flow network `source -> left -> right -> sink`.
    ///
    /// Layout: source 0, `v_i` at `1 + i`, `v″` entries after them, `v′_j`
    /// after those, sink last.
    pub fn to_flow(&self) -> FlowNetwork {
        let n = self.n;
        let m = self.actuator_edges.len();
        let left = |i: usize| 1 + i;
        let right = |j: usize| 1 + n + m + j;
        let sink = 1 + 2 * n + m;
        let mut f = FlowNetwork::new(sink + 1, 0, sink);
        for i in 0..n + m {
            f.add_arc(0, left(i), 1);
        }
        for &(i, j) in &self.edges {
            f.add_arc(left(i), right(j), 1);
        }
        for (idx, &k) in self.actuator_edges.iter().enumerate() {
            f.add_arc(left(n + idx), right(k), 1);
        }
        for j in 0..n {
            f.add_arc(right(j), sink, 1);
        }
        f
    }
}

pub fn build_bipartite(net: &DirectedNetwork, s: &ActuatorSet) -> BipartiteAux {
    BipartiteAux {
        n: net.n(),
        edges: net.edges().into_iter().map(|(from, to, _)| (from, to)).collect(),
        actuator_edges: s.as_slice().to_vec(),
    }
}

/// `|m̄(S)|`, the maximum matching size of `H_b(S)`.
pub fn max_matching_cardinality(net: &DirectedNetwork, s: &ActuatorSet) -> usize {
    max_flow(&build_bipartite(net, s).to_flow()) as usize
}

fn check_actuatable(net: &DirectedNetwork, set: &ActuatorSet) -> Result<()> {
    set.check_range(net.n())?;
    match set.iter().find(|&v| !net.is_actuatable(v)) {
        Some(v) => Err(Error::NotActuatable(v)),
        None => Ok(()),
    }
}

/// Flow graph asking whether `S` extends, within the actuatable nodes, to a
/// set of at most `K` actuators whose `H_b` has a matching covering `V′`.
/// Nodes of `S″` are fed directly from the source; the remaining actuatable
/// `v″` share a bottleneck of capacity `K - |S|`.
fn completion_flow(net: &DirectedNetwork, s: &ActuatorSet, k: usize) -> FlowNetwork {
    let n = net.n();
    let extra: Vec<usize> = net.actuatable_nodes().into_iter().filter(|&v| !s.contains(v)).collect();
    // source, hub, V, S″, extra″, V′, sink
    let hub = 1;
    let left = |i: usize| 2 + i;
    let s_dd = |idx: usize| 2 + n + idx;
    let e_dd = |idx: usize| 2 + n + s.len() + idx;
    let right = |j: usize| 2 + n + s.len() + extra.len() + j;
    let sink = 2 + 2 * n + s.len() + extra.len();
    let mut f = FlowNetwork::new(sink + 1, 0, sink);
    for i in 0..n {
        f.add_arc(0, left(i), 1);
    }
    for (from, to, _) in net.edges() {
        f.add_arc(left(from), right(to), 1);
    }
    for (idx, v) in s.iter().enumerate() {
        f.add_arc(0, s_dd(idx), 1);
        f.add_arc(s_dd(idx), right(v), 1);
    }
    f.add_arc(0, hub, (k - s.len()) as u64);
    for (idx, &v) in extra.iter().enumerate() {
        f.add_arc(hub, e_dd(idx), 1);
        f.add_arc(e_dd(idx), right(v), 1);
    }
    for j in 0..n {
        f.add_arc(right(j), sink, 1);
    }
    f
}

/// Membership `S ∈ C̃_K`: `S` is contained in some structurally
/// controllable actuator set of size `K`.
pub fn forward_feasible(net: &DirectedNetwork, s: &ActuatorSet, k: usize) -> Result<bool> {
    if s.len() > k {
        return Err(Error::CardinalityExceeded { size: s.len(), k });
    }
    check_actuatable(net, s)?;
    let n = net.n();
    if net.all_actuatable() {
        Ok(max_matching_cardinality(net, s) + k >= n + s.len())
    } else {
        Ok(max_flow(&completion_flow(net, s, k)) as usize == n)
    }
}

/// `H_r(V \ R)`. Layout: source 0, `s″` at 1, `v_i` at `2 + i`, the
/// `v″` of the non-excluded actuatable nodes next, `v′_j` after them, sink last.
pub fn reverse_flow_graph(net: &DirectedNetwork, r: &ActuatorSet, k: usize) -> FlowNetwork {
    let n = net.n();
    let kept: Vec<usize> = net.actuatable_nodes().into_iter().filter(|&v| !r.contains(v)).collect();
    let s_dd = 1;
    let left = |i: usize| 2 + i;
    let kept_dd = |idx: usize| 2 + n + idx;
    let right = |j: usize| 2 + n + kept.len() + j;
    let sink = 2 + 2 * n + kept.len();
    let mut f = FlowNetwork::new(sink + 1, 0, sink);
    for i in 0..n {
        f.add_arc(0, left(i), 1);
    }
    f.add_arc(0, s_dd, k as u64);
    for idx in 0..kept.len() {
        f.add_arc(s_dd, kept_dd(idx), 1);
    }
    for (from, to, _) in net.edges() {
        f.add_arc(left(from), right(to), 1);
    }
    for (idx, &v) in kept.iter().enumerate() {
        f.add_arc(kept_dd(idx), right(v), 1);
    }
    for j in 0..n {
        f.add_arc(right(j), sink, 1);
    }
    f
}

/// Membership `R ∈ R̃_K`: the actuatable nodes outside `R` still contain a
/// structurally controllable set of size at most `K`.
pub fn reverse_feasible(net: &DirectedNetwork, r: &ActuatorSet, k: usize) -> Result<bool> {
    let max = net.actuatable_nodes().len().saturating_sub(k);
    if r.len() > max {
        return Err(Error::TooManyExclusions { size: r.len(), max });
    }
    check_actuatable(net, r)?;
    Ok(max_flow(&reverse_flow_graph(net, r, k)) as usize == net.n())
}

/// Smallest `K` for which some `K`-set is structurally controllable:
/// `n - |m̄(∅)|`, but never below 1 since `B(∅) = 0` controls nothing. With a restricted actuatable mask the smallest `K` is found
/// by searching upward; `Infeasible` means no actuatable set works at all.
pub fn min_cardinality(net: &DirectedNetwork) -> Result<usize> {
    let lower = (net.n() - max_matching_cardinality(net, &ActuatorSet::empty())).max(1);
    if net.all_actuatable() {
        return Ok(lower);
    }
    let available = net.actuatable_nodes().len();
    for k in lower..=available {
        if forward_feasible(net, &ActuatorSet::empty(), k)? {
            return Ok(k);
        }
    }
    Err(Error::Infeasible)
}
