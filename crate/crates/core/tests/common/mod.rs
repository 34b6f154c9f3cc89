#![allow(dead_code)]

use actuplace::{parse_network, DirectedNetwork};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn example1() -> DirectedNetwork {
    parse_network(
        r#"{"n":4,"edges":[
        {"from":2,"to":1,"w":-0.5},{"from":3,"to":1,"w":-0.8},{"from":4,"to":1,"w":-0.6},
        {"from":1,"to":2,"w":1},{"from":1,"to":3,"w":1},{"from":1,"to":4,"w":1}]}"#,
    )
    .unwrap()
}

pub const EXAMPLE1_JSON: &str = r#"{"n":4,"edges":[
{"from":2,"to":1,"w":-0.5},{"from":3,"to":1,"w":-0.8},{"from":4,"to":1,"w":-0.6},
{"from":1,"to":2,"w":1},{"from":1,"to":3,"w":1},{"from":1,"to":4,"w":1}]}"#;

/// Network whose pattern is the bitmask `pattern` over the n² entries
/// (row-major), with weights drawn from `rng`.
pub fn from_pattern(n: usize, pattern: u64, rng: &mut ChaCha8Rng) -> DirectedNetwork {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if pattern >> (i * n + j) & 1 == 1 {
                a[(i, j)] = weight(rng);
            }
        }
    }
    DirectedNetwork::new(a, None, None).unwrap()
}

fn weight(rng: &mut ChaCha8Rng) -> f64 {
    let w: f64 = rng.random_range(0.3..1.2);
    if rng.random_bool(0.5) {
        w
    } else {
        -w
    }
}

/// Random strongly connected network on `n` nodes; each off-diagonal entry
/// is present with probability `p`, each self-loop with probability `p / 2`.
pub fn random_network(n: usize, p: f64, rng: &mut ChaCha8Rng) -> DirectedNetwork {
    loop {
        let mut pattern = 0u64;
        for i in 0..n {
            for j in 0..n {
                let q = if i == j { p / 2.0 } else { p };
                if rng.random_bool(q) {
                    pattern |= 1 << (i * n + j);
                }
            }
        }
        if pattern_strongly_connected(n, pattern) {
            return from_pattern(n, pattern, rng);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << n).map(move |m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
}

/// Transitive-closure check, independent of the library's BFS.
pub fn pattern_strongly_connected(n: usize, pattern: u64) -> bool {
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
        for (j, r) in row.iter_mut().enumerate() {
            if pattern >> (i * n + j) & 1 == 1 {
                *r = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach.iter().all(|row| row.iter().all(|&r| r))
}
