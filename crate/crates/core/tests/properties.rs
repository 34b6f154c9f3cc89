mod common;

use actuplace::feasibility::{forward_feasible, max_matching_cardinality, min_cardinality, reverse_feasible};
use actuplace::guarantees::{z_bar, z_u};
use actuplace::{
    build_swing_model, generate_by_degrees, gramian, metric_f_eps, network_to_json, parse_network, solve_forward,
    solve_reverse, strongly_connected, ActuatorSet, Branch, Bus, DirectedNetwork, Error,
};
use common::{from_pattern, pattern_strongly_connected, random_network, rng};
use proptest::prelude::*;

fn small_net() -> impl Strategy<Value = DirectedNetwork> {
    (1usize..=5, any::<u64>(), 0.25f64..0.7).prop_map(|(n, seed, p)| random_network(n, p, &mut rng(seed)))
}

fn subset_of(n: usize, mask: u32) -> ActuatorSet {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Maximum matching between right nodes `v'_i` and left nodes `V ∪ S''`
/// by exhaustive assignment.
fn brute_matching(net: &DirectedNetwork, s: &ActuatorSet) -> usize {
    let n = net.n();
    // left index j < n is v_j, n + s is the actuator node of s
    let options: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut left: Vec<usize> = (0..n).filter(|&j| net.weights()[(i, j)] != 0.0).collect();
            if s.contains(i) {
                left.push(n + i);
            }
            left
        })
        .collect();
    fn go(i: usize, options: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
        if i == options.len() {
            return 0;
        }
        let mut best = go(i + 1, options, used);
        for &l in &options[i] {
            if !used[l] {
                used[l] = true;
                best = best.max(1 + go(i + 1, options, used));
                used[l] = false;
            }
        }
        best
    }
    go(0, &options, &mut vec![false; 2 * n])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gramian_additive_symmetric_psd(net in small_net(), split in any::<u32>(), t in 0.2f64..2.5) {
        let n = net.n();
        let s1 = subset_of(n, split);
        let s2 = subset_of(n, !split);
        let w1 = gramian(&net, &s1, t).unwrap().matrix;
        let w2 = gramian(&net, &s2, t).unwrap().matrix;
        let w = gramian(&net, &s1.union(&s2), t).unwrap().matrix;
        let scale = w.norm().max(1e-300);
        prop_assert!((&w - &w1 - &w2).norm() <= 1e-9 * scale);
        prop_assert!((&w - w.transpose()).norm() <= 1e-10 * scale);
        let lambda = w.symmetric_eigen().eigenvalues.min();
        prop_assert!(lambda >= -1e-10 * scale);
    }

    #[test]
    fn f_eps_strictly_decreases_when_adding_a_node(net in small_net(), mask in any::<u32>(), v in 0usize..5, eps in 1e-4f64..1.0) {
        let n = net.n();
        let v = v % n;
        let s = subset_of(n, mask).without(v);
        let before = metric_f_eps(&net, &s, 1.0, eps).unwrap();
        let after = metric_f_eps(&net, &s.with(v), 1.0, eps).unwrap();
        prop_assert!(after < before);
        prop_assert!(after > 0.0);
    }

    #[test]
    fn strong_connectivity_matches_closure(n in 1usize..=5, pattern in any::<u64>(), seed in any::<u64>()) {
        let pattern = pattern & ((1u64 << (n * n)) - 1);
        let expected = pattern_strongly_connected(n, pattern);
        if expected {
            prop_assert!(strongly_connected(&from_pattern(n, pattern, &mut rng(seed))));
        } else {
            let mut a = nalgebra::DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if pattern >> (i * n + j) & 1 == 1 {
                        a[(i, j)] = 1.0;
                    }
                }
            }
            prop_assert_eq!(DirectedNetwork::new(a, None, None).unwrap_err(), Error::NotStronglyConnected);
        }
    }

    #[test]
    fn matching_agrees_with_exhaustive_assignment(net in small_net(), mask in any::<u32>()) {
        let s = subset_of(net.n(), mask);
        prop_assert_eq!(max_matching_cardinality(&net, &s), brute_matching(&net, &s));
    }

    #[test]
    fn network_json_round_trips(net in small_net()) {
        let text = network_to_json(&net);
        let back = parse_network(&text).unwrap();
        prop_assert_eq!(back.weights(), net.weights());
        prop_assert_eq!(back.labels(), net.labels());
    }

    #[test]
    fn degree_sequence_realization(degrees in prop::collection::vec(1usize..5, 2..12), seed in any::<u64>()) {
        match generate_by_degrees(&degrees, seed) {
            Ok(net) => {
                prop_assert!(strongly_connected(&net));
                for (v, &d) in degrees.iter().enumerate() {
                    prop_assert_eq!(net.out_neighbors(v).count(), d);
                    prop_assert_eq!(net.in_neighbors(v).count(), d);
                    prop_assert!(!net.has_edge(v, v));
                }
                let again = generate_by_degrees(&degrees, seed).unwrap();
                prop_assert_eq!(again.weights(), net.weights());
            }
            Err(Error::NotGraphical | Error::ConnectivityUnreachable) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn swing_state_count(inertial in prop::collection::vec(any::<bool>(), 2..8), injectable in prop::collection::vec(any::<bool>(), 8)) {
        let buses: Vec<Bus> = inertial
            .iter()
            .enumerate()
            .map(|(i, &m)| Bus {
                id: format!("b{i}"),
                inertia: if m { 1.5 } else { 0.0 },
                damping: 1.0,
                injectable: injectable[i],
            })
            .collect();
        let branches: Vec<Branch> =
            (1..buses.len()).map(|i| Branch { from: i - 1, to: i, susceptance: 2.0 }).collect();
        let net = build_swing_model(&buses, &branches).unwrap();
        let states = buses.len() + inertial.iter().filter(|&&m| m).count();
        prop_assert_eq!(net.n(), states);
        let actuatable = buses.iter().filter(|b| b.injectable).count();
        prop_assert_eq!(net.actuatable_nodes().len(), actuatable);
    }

    #[test]
    fn bounds_ordered_and_monotone(n in 1usize..60, gamma in 0.05f64..=1.0, alpha in 0.0f64..0.9) {
        let zb = z_bar(n, gamma, alpha).unwrap();
        let zu = z_u(n, gamma, alpha).unwrap();
        prop_assert!(zb >= 1.0 - 1e-12);
        prop_assert!(zb <= zu * (1.0 + 1e-12));
        prop_assert!(z_u(n + 1, gamma, alpha).unwrap() >= zu);
        prop_assert!(z_bar(n + 1, gamma, alpha).unwrap() >= zb);
        prop_assert!(z_u(n, gamma, alpha + 0.05).unwrap() >= zu);
        if gamma < 0.95 {
            prop_assert!(z_u(n, gamma + 0.05, alpha).unwrap() <= zu);
        }
    }

    #[test]
    fn greedy_is_deterministic_and_prefixes_stay_feasible(net in small_net(), pick in any::<usize>()) {
        let n = net.n();
        let k_min = min_cardinality(&net).unwrap();
        let k = k_min + pick % (n - k_min + 1);
        let fwd = solve_forward(&net, k, 1.0, 1e-3).unwrap();
        let again = solve_forward(&net, k, 1.0, 1e-3).unwrap();
        prop_assert_eq!(&fwd.trace, &again.trace);
        let trace = fwd.trace.unwrap();
        for i in 0..=trace.picks.len() {
            prop_assert!(forward_feasible(&net, &trace.prefix(i), k).unwrap());
        }
        prop_assert!(fwd.f_eps.is_finite() && fwd.f_eps > 0.0);

        let rev = solve_reverse(&net, k, 1.0, 1e-3).unwrap();
        prop_assert_eq!(rev.chosen.len(), k);
        let rtrace = rev.trace.unwrap();
        for i in 0..=rtrace.picks.len() {
            prop_assert!(reverse_feasible(&net, &rtrace.prefix(i), k).unwrap());
        }
        prop_assert!(forward_feasible(&net, &rev.chosen, k).unwrap());
    }
}
