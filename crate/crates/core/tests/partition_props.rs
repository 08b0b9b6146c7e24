use dqec::codes::{build_honeycomb, build_toric, make_schedule, CodeDef};
use dqec::partition::{
    build_connectivity_graph, make_layout, select_largest_node, spectral_partition,
    ConnectivityGraph, Mediation, Partition,
};
use proptest::prelude::*;

/// Smallest cut over all splits into halves of sizes ⌊n/2⌋ and ⌈n/2⌉.
fn brute_force_balanced_cut(g: &ConnectivityGraph) -> u64 {
    let n = g.vertices;
    let mut best = u64::MAX;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n / 2 {
            continue;
        }
        let side: Vec<usize> = (0..n).map(|v| ((mask >> v) & 1) as usize).collect();
        best = best.min(g.cut_weight(&side));
    }
    best
}

fn cycle(n: usize) -> ConnectivityGraph {
    ConnectivityGraph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
}

fn grid(w: usize, h: usize) -> ConnectivityGraph {
    let mut e = Vec::new();
    for i in 0..h {
        for j in 0..w {
            let v = i * w + j;
            if j + 1 < w {
                e.push((v, v + 1));
            }
            if i + 1 < h {
                e.push((v, v + w));
            }
        }
    }
    ConnectivityGraph::new(w * h, e)
}

fn bisection_cut(g: &ConnectivityGraph) -> u64 {
    let p = spectral_partition(g, g.vertices.div_ceil(2), 7).unwrap();
    assert_eq!(p.clusters.len(), 2);
    g.cut_weight(&p.cluster_of)
}

#[test]
fn cycle8_splits_into_contiguous_halves() {
    let g = cycle(8);
    let p = spectral_partition(&g, 4, 3).unwrap();
    assert_eq!(p.clusters.len(), 2);
    assert!(p.clusters.iter().all(|c| c.len() == 4));
    assert_eq!(g.cut_weight(&p.cluster_of), brute_force_balanced_cut(&g));
    assert_eq!(brute_force_balanced_cut(&g), 2);
}

#[test]
fn bisection_cut_within_twice_optimum() {
    let graphs = vec![
        cycle(5),
        cycle(6),
        cycle(9),
        cycle(12),
        grid(2, 3),
        grid(3, 3),
        grid(3, 4),
        grid(2, 6),
        grid(4, 3),
    ];
    for g in graphs {
        let opt = brute_force_balanced_cut(&g);
        let got = bisection_cut(&g);
        assert!(got <= 2 * opt, "{} vertices: cut {got} vs optimum {opt}", g.vertices);
    }
}

fn toric_partition(d: usize, n_q: usize, seed: u64) -> (dqec::codes::ScheduleTemplate, Partition) {
    let s = make_schedule(&CodeDef::Stabilizer(build_toric(d).unwrap())).unwrap();
    let g = build_connectivity_graph(&s);
    let p = spectral_partition(&g, n_q, seed).unwrap();
    (s, p)
}

#[test]
fn toric_graph_counts() {
    let s = make_schedule(&CodeDef::Stabilizer(build_toric(2).unwrap())).unwrap();
    let g = build_connectivity_graph(&s);
    assert_eq!(g.vertices, 16);
    // Brute-force enumeration of ancilla-data interactions.
    let mut pairs = std::collections::BTreeSet::new();
    for c in &s.checks {
        for q in c.data_qubits() {
            pairs.insert((q, c.ancilla().unwrap()));
        }
    }
    let total: u32 = g.edges.iter().map(|e| e.2).sum();
    assert_eq!(total as usize, s.checks.iter().map(|c| c.paulis.len()).sum::<usize>());
    assert!(g.edges.len() <= pairs.len());
}

#[test]
fn honeycomb_graph_has_one_edge_per_check() {
    let l = build_honeycomb(3, 3).unwrap();
    let s = make_schedule(&CodeDef::Floquet(l)).unwrap();
    let g = build_connectivity_graph(&s);
    assert_eq!(g.vertices, 18);
    assert_eq!(g.edges.len(), 27);
    assert!(g.edges.iter().all(|e| e.2 == 1));
}

#[test]
fn toric_cluster_counts() {
    for (d, n_q, expect) in [(4, 16, 4), (6, 16, 16), (6, 48, 4), (8, 48, 8)] {
        let (_, p) = toric_partition(d, n_q, 0);
        assert_eq!(p.clusters.len(), expect, "d={d} n_q={n_q}");
        assert!(p.max_cluster_size() <= n_q);
    }
}

#[test]
fn cluster_bound_on_all_codes() {
    let mut schedules = Vec::new();
    for d in 2..=8 {
        schedules.push(make_schedule(&CodeDef::Stabilizer(build_toric(d).unwrap())).unwrap());
    }
    for (a, b) in [(3, 3), (3, 6), (6, 6), (6, 9)] {
        schedules.push(make_schedule(&CodeDef::Floquet(build_honeycomb(a, b).unwrap())).unwrap());
    }
    for s in &schedules {
        let g = build_connectivity_graph(s);
        for n_q in [16, 48] {
            let p = spectral_partition(&g, n_q, 11).unwrap();
            assert!(p.max_cluster_size() <= n_q);
            let layout = make_layout(&p, s, n_q).unwrap();
            let data: usize = layout
                .clusters
                .iter()
                .map(|c| c.iter().filter(|&&q| q < s.data_qubits).count())
                .sum();
            assert_eq!(data, s.data_qubits);
            for pl in &layout.placements {
                match pl.mediation {
                    Mediation::Local => assert_eq!(pl.clusters.len(), 1),
                    Mediation::Bell => assert_eq!(pl.clusters.len(), 2),
                    Mediation::Ghz(n) => assert!(n == pl.clusters.len() && n > 2),
                }
            }
        }
    }
}

#[test]
fn partition_and_largest_node_are_deterministic() {
    let (s, p1) = toric_partition(4, 16, 5);
    let (_, p2) = toric_partition(4, 16, 5);
    assert_eq!(p1, p2);
    assert_eq!(select_largest_node(&p1, &s).unwrap(), select_largest_node(&p2, &s).unwrap());
}

#[test]
fn single_cluster_layout_is_local() {
    let s = make_schedule(&CodeDef::Stabilizer(build_toric(2).unwrap())).unwrap();
    let p = Partition::from_clusters(16, vec![(0..16).collect()]).unwrap();
    let layout = make_layout(&p, &s, 16).unwrap();
    assert_eq!(layout.nonlocal_checks().count(), 0);
    assert_eq!(layout.qpi_count, 4);
    assert_eq!(select_largest_node(&p, &s).unwrap(), 0);
}

#[test]
fn split_stabilizer_uses_ghz3() {
    // Data qubits of stabilizer 0 spread 2 + 1 + 1, ancilla with the pair.
    let s = make_schedule(&CodeDef::Stabilizer(build_toric(2).unwrap())).unwrap();
    let data: Vec<usize> = s.checks[0].data_qubits().collect();
    let anc = s.checks[0].ancilla().unwrap();
    let mut clusters = vec![vec![data[0], data[1], anc], vec![data[2]], vec![data[3]]];
    let used: std::collections::BTreeSet<usize> = clusters.concat().into_iter().collect();
    clusters[0].extend((0..16).filter(|q| !used.contains(q)));
    let p = Partition::from_clusters(16, clusters).unwrap();
    let layout = make_layout(&p, &s, 16).unwrap();
    assert_eq!(layout.placements[0].mediation, Mediation::Ghz(3));
    assert_eq!(layout.placements[0].root, 0);
    assert_eq!(layout.placements[0].bell_pairs(), vec![(0, 1), (0, 2)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn random_graphs_respect_bound(
        n in 1usize..40,
        raw in proptest::collection::vec((0usize..40, 0usize..40), 0..120),
        n_q in 2usize..12,
        seed in any::<u64>(),
    ) {
        let edges: Vec<(usize, usize)> = raw
            .into_iter()
            .map(|(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .collect();
        let g = ConnectivityGraph::new(n, edges);
        let p = spectral_partition(&g, n_q, seed).unwrap();
        prop_assert!(p.max_cluster_size() <= n_q);
        let mut all: Vec<usize> = p.clusters.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(spectral_partition(&g, n_q, seed).unwrap(), p);
    }
}
