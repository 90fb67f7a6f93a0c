use std::collections::BTreeSet;

use gredit::graph::{generate_sbm, induce_training_subgraph, split_stratified, NormalizedAdjacency, SbmParams};
use gredit::Graph64;

fn sbm(seed: u64) -> Graph64 {
    generate_sbm(&SbmParams {
        num_blocks: 3,
        nodes_per_block: 40,
        p_in: 0.2,
        p_out: 0.03,
        feature_dim: 4,
        feature_noise: 1.0,
        seed,
    })
    .unwrap()
}

#[test]
fn induced_subgraph_matches_brute_force_edge_filter() {
    for seed in 0..5 {
        let g = sbm(seed);
        let split = split_stratified(g.labels(), 3, 20, 10, seed).unwrap();
        let train = split.train_nodes();
        assert_eq!(train.len(), 60);
        let sub = induce_training_subgraph(&g, &split).unwrap();
        assert_eq!(sub.index_map, train);

        let in_train: BTreeSet<usize> = train.iter().copied().collect();
        let expected: BTreeSet<(usize, usize)> = g
            .edges()
            .iter()
            .filter(|(u, v)| in_train.contains(u) && in_train.contains(v))
            .copied()
            .collect();
        let got: BTreeSet<(usize, usize)> = sub
            .graph
            .edges()
            .iter()
            .map(|&(a, b)| {
                let (u, v) = (sub.index_map[a], sub.index_map[b]);
                (u.min(v), u.max(v))
            })
            .collect();
        assert_eq!(got, expected);
        for (local, &orig) in sub.index_map.iter().enumerate() {
            assert_eq!(sub.graph.labels()[local], g.labels()[orig]);
            assert_eq!(sub.graph.features().row(local), g.features().row(orig));
        }
    }
}

#[test]
fn isolated_training_nodes_keep_a_valid_adjacency() {
    let g = sbm(1).with_edges(Vec::new()).unwrap();
    let split = split_stratified(g.labels(), 3, 5, 5, 0).unwrap();
    let sub = induce_training_subgraph(&g, &split).unwrap();
    assert!(sub.graph.edges().is_empty());
    let a = NormalizedAdjacency::build(&sub.graph);
    for i in 0..sub.graph.num_nodes() {
        let row: Vec<_> = a.row(i).collect();
        assert_eq!(row, vec![(i, 1.0)]);
    }
}

#[test]
fn split_quotas_are_counted_exactly() {
    let labels: Vec<usize> = (0..300).map(|i| i / 100).collect();
    let split = split_stratified(&labels, 3, 20, 30, 4).unwrap();
    assert_eq!(split.train_nodes().len(), 60);
    assert_eq!(split.valid_nodes().len(), 90);
    assert_eq!(split.test_nodes().len(), 150);
    assert_eq!(split, split_stratified(&labels, 3, 20, 30, 4).unwrap());
}

#[test]
fn normalized_adjacency_matches_dense_formula_on_sbm() {
    let g = sbm(2);
    let n = g.num_nodes();
    let mut dense = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        dense[i][i] = 1.0;
    }
    for &(u, v) in g.edges() {
        dense[u][v] = 1.0;
        dense[v][u] = 1.0;
    }
    let deg: Vec<f64> = dense.iter().map(|r| r.iter().sum()).collect();
    let a = NormalizedAdjacency::build(&g).to_dense();
    for i in 0..n {
        for j in 0..n {
            let want = dense[i][j] / (deg[i].sqrt() * deg[j].sqrt());
            assert!((a[(i, j)] - want).abs() < 1e-12);
            assert_eq!(a[(i, j)], a[(j, i)]);
        }
    }
}
