use super::*;
use crate::engine::{cpm_step, least_squares_solution, stability_bound, CpmState};
use crate::testutil::{desired, random_atf, random_connected, random_vec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn bfs_reach(top: &Topology) -> usize {
    let n = top.n_nodes();
    let edges = top.edges();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(k) = stack.pop() {
        for &(a, b) in &edges {
            let other = if a == k { b } else if b == k { a } else { continue };
            if !seen[other] {
                seen[other] = true;
                stack.push(other);
            }
        }
    }
    seen.iter().filter(|s| **s).count()
}

#[test]
fn ring_neighbourhoods() {
    let r4 = ring_topology(4).unwrap();
    assert!((0..4).all(|k| r4.neighborhood(k).len() == 3));
    assert!((0..4).all(|k| r4.neighborhood(k).contains(&k)));
    let r2 = ring_topology(2).unwrap();
    assert!((0..2).all(|k| r2.neighborhood(k) == [0, 1]));
    let r9 = ring_topology(9).unwrap();
    assert_eq!(bfs_reach(&r9), 9);
    assert!(ring_topology(1).is_err());
}

#[test]
fn disconnected_graph_is_rejected() {
    assert!(matches!(Topology::from_edges(4, &[(0, 1), (2, 3)]), Err(Error::Topology(_))));
}

#[test]
fn system1_layout() {
    let (top, part) = system1_partition();
    assert_eq!(top.n_nodes(), 9);
    assert_eq!(part.n_mics(), 32);
    assert_eq!(part.n_speakers(), 9);
    for k in 0..9 {
        assert!([2, 4].contains(&part.mics(k).len()));
        assert_eq!(part.speakers(k), [k]);
        let bright = part.mics(k).iter().all(|&m| m < 16);
        let dark = part.mics(k).iter().all(|&m| m >= 16);
        assert!(bright ^ dark);
    }
    let bright_mics: usize = (0..9).filter(|&k| part.mics(k)[0] < 16).map(|k| part.mics(k).len()).sum();
    assert_eq!(bright_mics, 16);
    // Straddling split is refused.
    assert!(system1_partition_with(&[4, 4, 4, 2, 4, 4, 4, 4, 2]).is_err());
}

#[test]
fn system2_layout() {
    let (top, part) = system2_partition();
    assert_eq!(top.n_nodes(), 4);
    assert!((0..4).all(|k| part.mics(k).len() == 8));
    let mut counts: Vec<usize> = (0..4).map(|k| part.speakers(k).len()).collect();
    counts.sort();
    assert_eq!(counts, [2, 2, 2, 3]);
    assert_eq!(part.n_speakers(), 9);
    assert_eq!((0..4).filter(|&k| part.mics(k)[0] < 16).count(), 2);
}

#[test]
fn partition_violations() {
    assert!(Partition::new(vec![vec![0, 1], vec![1]], vec![vec![0], vec![]], 2, 1).is_err());
    assert!(Partition::new(vec![vec![0], vec![]], vec![vec![0], vec![]], 1, 1).is_err());
    assert!(Partition::new(vec![vec![0]], vec![vec![]], 1, 1).is_err());
    assert!(Partition::new(vec![vec![0], vec![1]], vec![vec![0], vec![]], 2, 1).is_ok());
}

#[test]
fn custom_system_requires_symmetric_neighbours() {
    let nodes = vec![
        NodeSpec { mics: vec![0], speakers: vec![0], neighbors: vec![1] },
        NodeSpec { mics: vec![1], speakers: vec![1], neighbors: vec![] },
    ];
    assert!(custom_system(&nodes, 2, 2).is_err());
    let nodes = vec![
        NodeSpec { mics: vec![0], speakers: vec![0], neighbors: vec![1] },
        NodeSpec { mics: vec![1], speakers: vec![1], neighbors: vec![0] },
    ];
    let (top, part) = custom_system(&nodes, 2, 2).unwrap();
    assert_eq!(top.neighborhood(0), [0, 1]);
    assert_eq!(part.speaker_owner(1), Some(1));
}

#[test]
fn uniform_weights() {
    let a = uniform_combination(&ring_topology(3).unwrap());
    for l in 0..3 {
        for k in 0..3 {
            assert_eq!(a.weight(l, k), 1.0 / 3.0);
        }
    }
    let single = uniform_combination(&Topology::from_edges(1, &[]).unwrap());
    assert_eq!(single.weight(0, 0), 1.0);
}

#[test]
fn metropolis_weights() {
    for n in 2..10 {
        let top = ring_topology(n).unwrap();
        let (m, u) = (metropolis_combination(&top), uniform_combination(&top));
        for l in 0..n {
            for k in 0..n {
                assert!((m.weight(l, k) - u.weight(l, k)).abs() < 1e-15);
            }
        }
    }
    // Star: hub 0 with |N| = 3, leaves with |N| = 2; off-diagonal 1/max = 1/3.
    let star = Topology::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
    let a = metropolis_combination(&star);
    assert!((a.weight(0, 0) - 1.0 / 3.0).abs() < 1e-15);
    assert!((a.weight(1, 1) - 2.0 / 3.0).abs() < 1e-15);
    assert!((a.weight(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(a.weight(1, 2), 0.0);
}

#[test]
fn combination_matrix_validation() {
    let top = ring_topology(3).unwrap();
    assert!(CombinationMatrix::new(&top, vec![0.5; 9]).is_err());
    let line = Topology::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let bad = vec![0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5];
    assert!(CombinationMatrix::new(&line, bad).is_err());
}

proptest! {
    #[test]
    fn combination_rules_are_left_stochastic(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let top = random_connected(&mut rng, n);
        for rule in [CombinationRule::Uniform, CombinationRule::Metropolis] {
            let a = CombinationMatrix::from_rule(&top, rule);
            let checked = CombinationMatrix::new(&top, a.entries.clone());
            prop_assert!(checked.is_ok(), "{:?}", checked.err());
            for k in 0..n {
                prop_assert!((a.column_sum(k) - 1.0).abs() <= 1e-12);
            }
            if rule == CombinationRule::Metropolis {
                for l in 0..n {
                    prop_assert!((a.row_sum(l) - 1.0).abs() <= 1e-12);
                }
            }
        }
    }
}

fn node(g: Vec<C64>, mu: f64) -> NodeState {
    let f = ControlFilter::new(g, 0.0).unwrap();
    NodeState { estimate: f.clone(), intermediate: f, step_size: mu }
}

#[test]
fn adapt_examples() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let h = random_atf(&mut rng, 6, 3);
    let d = desired(random_vec(&mut rng, 6));
    let local = LocalData::gather(&h, &d, &[1, 4]).unwrap();
    let g = random_vec(&mut rng, 3);
    assert_eq!(adapt(0, &node(g.clone(), 0.0), &local).unwrap().weights(), g);

    let h1 = AtfMatrix::from_rows(0.0, 1, vec![vec![C64::new(1.0, 0.0)]]).unwrap();
    let d1 = desired(vec![C64::new(1.0, 0.0)]);
    let local = LocalData::gather(&h1, &d1, &[0]).unwrap();
    let psi = adapt(0, &node(vec![C64::new(0.0, 0.0)], 0.5), &local).unwrap();
    assert_eq!(psi.weights(), [C64::new(0.5, 0.0)]);
}

#[test]
fn adapt_on_all_mics_equals_cpm() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let h = random_atf(&mut rng, 8, 4);
    let d = desired(random_vec(&mut rng, 8));
    let g = random_vec(&mut rng, 4);
    let all: Vec<usize> = (0..8).collect();
    let psi = adapt(0, &node(g.clone(), 0.05), &LocalData::gather(&h, &d, &all).unwrap()).unwrap();
    let cpm = cpm_step(&CpmState::new(ControlFilter::new(g, 0.0).unwrap(), 0.05).unwrap(), &h, &d).unwrap();
    for (a, b) in psi.weights().iter().zip(cpm.filter.weights()) {
        assert!((a - b).norm() <= 1e-15 * b.norm().max(1.0));
    }
}

#[test]
fn adapt_divergence_names_the_node() {
    let h = AtfMatrix::from_rows(0.0, 1, vec![vec![C64::new(1e200, 0.0)]]).unwrap();
    let d = desired(vec![C64::new(1e200, 0.0)]);
    let local = LocalData::gather(&h, &d, &[0]).unwrap();
    let err = adapt(3, &node(vec![C64::new(0.0, 0.0)], 1e200), &local).unwrap_err();
    assert!(matches!(err, Error::Divergence { node: Some(3), .. }));
}

#[test]
fn adapt_is_local() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let (top, part) = system2_partition();
    let h = random_atf(&mut rng, 32, 9);
    let d = desired(random_vec(&mut rng, 32));
    let g = random_vec(&mut rng, 9);
    for k in 0..top.n_nodes() {
        let mine = part.mics(k);
        let base = adapt(k, &node(g.clone(), 0.01), &LocalData::gather(&h, &d, mine).unwrap()).unwrap();
        let mut rows: Vec<Vec<C64>> = (0..32).map(|m| h.row(m).to_vec()).collect();
        let mut dv = d.values.clone();
        for m in (0..32).filter(|m| !mine.contains(m)) {
            rows[m] = random_vec(&mut rng, 9);
            dv[m] = C64::new(1e6, -1e6);
        }
        let h2 = AtfMatrix::from_rows(0.0, 16, rows).unwrap();
        let d2 = desired(dv);
        let other = adapt(k, &node(g.clone(), 0.01), &LocalData::gather(&h2, &d2, mine).unwrap()).unwrap();
        assert_eq!(base, other);
    }
}

#[test]
fn combine_examples() {
    let top = Topology::from_edges(2, &[(0, 1)]).unwrap();
    let a = CombinationMatrix::new(&top, vec![0.25, 0.25, 0.75, 0.75]).unwrap();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let p0 = ControlFilter::new(vec![one, zero], 0.0).unwrap();
    let p1 = ControlFilter::new(vec![zero, one], 0.0).unwrap();
    let g = combine(0, &[(1, &p1), (0, &p0)], &top, &a).unwrap();
    assert_eq!(g.weights(), [C64::new(0.25, 0.0), C64::new(0.75, 0.0)]);

    let same = ControlFilter::new(vec![C64::new(0.3, -2.0), one], 0.0).unwrap();
    let r3 = ring_topology(3).unwrap();
    let u = uniform_combination(&r3);
    let g = combine(1, &[(0, &same), (1, &same), (2, &same)], &r3, &u).unwrap();
    for (x, y) in g.weights().iter().zip(same.weights()) {
        assert!((x - y).norm() < 1e-15);
    }

    let single = Topology::from_edges(1, &[]).unwrap();
    let id = uniform_combination(&single);
    assert_eq!(combine(0, &[(0, &p0)], &single, &id).unwrap(), p0);
}

#[test]
fn combine_protocol_errors() {
    let r3 = ring_topology(3).unwrap();
    let u = uniform_combination(&r3);
    let p = ControlFilter::zeros(2, 0.0);
    assert!(matches!(combine(0, &[(0, &p), (1, &p)], &r3, &u), Err(Error::Protocol { node: 0, .. })));
    assert!(matches!(combine(0, &[(0, &p), (1, &p), (1, &p)], &r3, &u), Err(Error::Protocol { .. })));
    let r4 = ring_topology(4).unwrap();
    let u4 = uniform_combination(&r4);
    assert!(matches!(
        combine(0, &[(0, &p), (1, &p), (3, &p), (2, &p)], &r4, &u4),
        Err(Error::Protocol { .. })
    ));
}

#[test]
fn single_node_network_tracks_cpm() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (m, l) = (8, 4);
    let net = Network::single_node(m, l).unwrap();
    let mu = 0.02;
    let mut cpm = CpmState::new(ControlFilter::zeros(l, 0.0), mu).unwrap();
    let mut dist = NetworkState::uniform(1, mu, l, 0.0).unwrap();
    for _ in 0..200 {
        let h = random_atf(&mut rng, m, l);
        let d = desired(random_vec(&mut rng, m));
        cpm = cpm_step(&cpm, &h, &d).unwrap();
        dist = dpmd_iteration(&dist, &net, &h, &d).unwrap();
        let g = rendered_filter(&dist, &net.partition);
        for (a, b) in g.weights().iter().zip(cpm.filter.weights()) {
            assert!((a - b).norm() <= 1e-15 * b.norm().max(1e-300));
        }
    }
}

#[test]
fn zero_step_is_pure_averaging() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let (top, part) = system1_partition();
    let net = Network::with_rule(top, part, CombinationRule::Uniform).unwrap();
    let mut state = NetworkState::uniform(9, 0.0, 9, 0.0).unwrap();
    for node in state.nodes.iter_mut() {
        node.estimate = ControlFilter::new(random_vec(&mut rng, 9), 0.0).unwrap();
    }
    let h = random_atf(&mut rng, 32, 9);
    let d = desired(random_vec(&mut rng, 32));
    let mut prev = disagreement(&state);
    for _ in 0..30 {
        state = dpmd_iteration(&state, &net, &h, &d).unwrap();
        let now = disagreement(&state);
        assert!(now < prev, "{now} !< {prev}");
        prev = now;
    }
}

#[test]
fn three_ring_reaches_least_squares() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let (m, l) = (6, 3);
    let h = random_atf(&mut rng, m, l);
    let g_o = random_vec(&mut rng, l);
    // Consistent data: every node's local minimiser is the global one.
    let d = desired(h.mul_vec(&g_o).unwrap());
    let g_ls = least_squares_solution(&h, &d, 0.0).unwrap();
    let top = ring_topology(3).unwrap();
    let part = Partition::new(vec![vec![0, 1], vec![2, 3], vec![4, 5]], vec![vec![0], vec![1], vec![2]], m, l).unwrap();
    let net = Network::with_rule(top, part, CombinationRule::Uniform).unwrap();
    let mu = 0.5 * stability_bound(&h).unwrap();
    let mut state = NetworkState::uniform(3, mu, l, 0.0).unwrap();
    for _ in 0..20_000 {
        state = dpmd_iteration(&state, &net, &h, &d).unwrap();
    }
    for g in state.estimates() {
        let diff: Vec<C64> = g.weights().iter().zip(g_ls.weights()).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) / g_ls.norm() <= 1e-4);
    }
    assert!(disagreement(&state) < 1e-6);
}

#[test]
fn evaluation_order_is_irrelevant() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let (top, part) = system1_partition();
    let net = Network::with_rule(top, part, CombinationRule::Metropolis).unwrap();
    let h = random_atf(&mut rng, 32, 9);
    let d = desired(random_vec(&mut rng, 32));
    let mut state = NetworkState::uniform(9, 0.05, 9, 0.0).unwrap();
    for node in state.nodes.iter_mut() {
        node.estimate = ControlFilter::new(random_vec(&mut rng, 9), 0.0).unwrap();
    }
    let reference = dpmd_iteration(&state, &net, &h, &d).unwrap();

    let order = [4, 8, 0, 3, 7, 1, 6, 2, 5];
    let mut psis: Vec<Option<ControlFilter>> = vec![None; 9];
    for &k in &order {
        let local = LocalData::gather(&h, &d, net.partition.mics(k)).unwrap();
        psis[k] = Some(adapt(k, &state.nodes[k], &local).unwrap());
    }
    let mut estimates: Vec<Option<ControlFilter>> = vec![None; 9];
    for &k in order.iter().rev() {
        let mut msgs: Vec<(usize, &ControlFilter)> = net
            .topology
            .neighborhood(k)
            .iter()
            .map(|&l| (l, psis[l].as_ref().unwrap()))
            .collect();
        msgs.reverse();
        estimates[k] = Some(combine(k, &msgs, &net.topology, &net.combination).unwrap());
    }
    for k in 0..9 {
        assert_eq!(estimates[k].as_ref().unwrap(), &reference.nodes[k].estimate);
        assert_eq!(psis[k].as_ref().unwrap(), &reference.nodes[k].intermediate);
    }
}

#[test]
fn disagreement_examples() {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut s = NetworkState::uniform(2, 0.1, 2, 0.0).unwrap();
    assert_eq!(disagreement(&s), 0.0);
    s.nodes[0].estimate = ControlFilter::new(vec![one, zero], 0.0).unwrap();
    s.nodes[1].estimate = ControlFilter::new(vec![zero, one], 0.0).unwrap();
    assert!((disagreement(&s) - 2f64.sqrt()).abs() < 1e-15);
    let single = NetworkState::uniform(1, 0.1, 2, 0.0).unwrap();
    assert_eq!(disagreement(&single), 0.0);
}

#[test]
fn per_node_operation_counts() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let h = random_atf(&mut rng, 32, 9);
    let d = desired(random_vec(&mut rng, 32));
    for (top, part) in [system1_partition(), system2_partition()] {
        let net = Network::with_rule(top, part, CombinationRule::Uniform).unwrap();
        let counts = count_iteration_ops(&net, &h, &d).unwrap();
        for (k, c) in counts.iter().enumerate() {
            let ck = net.partition.mics(k).len() as u64;
            let nk = net.topology.neighborhood(k).len() as u64;
            assert_eq!(c.additions, (ck + nk - 1) * 9);
            assert_eq!(c.multiplications, (ck + nk + 1) * 9);
        }
    }
}
