use nlasso_core::graph::{EdgeSignal, EmpiricalGraph, NodeSignal};
use nlasso_core::{sbm_generate, tv_norm};
use proptest::prelude::*;

/// Random simple graph on up to 6 nodes, given as a node count and edge list.
fn small_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (1usize..=6).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let k = pairs.len();
        (
            Just(n),
            proptest::collection::vec(any::<bool>(), k),
            proptest::collection::vec(0.1f64..5.0, k),
        )
            .prop_map(move |(n, keep, weights)| {
                let edges = pairs
                    .iter()
                    .zip(keep.iter().zip(&weights))
                    .filter(|(_, (k, _))| **k)
                    .map(|(&(i, j), (_, &w))| (i, j, w))
                    .collect();
                (n, edges)
            })
    })
}

fn signal(len: usize, dim: usize, values: &[f64]) -> Vec<f64> {
    (0..len * dim)
        .map(|k| values[k % values.len()] * (1.0 + k as f64 * 0.37).sin())
        .collect()
}

/// Dense `|E|n × |V|n` incidence matrix, row-major.
fn dense_incidence(g: &EmpiricalGraph, dim: usize) -> Vec<Vec<f64>> {
    let cols = g.node_count() * dim;
    let mut d = vec![vec![0.0; cols]; g.edge_count() * dim];
    for (e, edge) in g.edges().iter().enumerate() {
        for c in 0..dim {
            d[e * dim + c][edge.head * dim + c] = 1.0;
            d[e * dim + c][edge.tail * dim + c] = -1.0;
        }
    }
    d
}

proptest! {
    #[test]
    fn incidence_matches_dense_and_is_adjoint(
        (n, edges) in small_graph(),
        dim in 1usize..4,
        seeds in proptest::collection::vec(-3.0f64..3.0, 1..8),
    ) {
        let g = EmpiricalGraph::new(n, edges).unwrap();
        let w = NodeSignal::from_flat(dim, signal(n, dim, &seeds)).unwrap();
        let u_vals: Vec<f64> = signal(g.edge_count(), dim, &seeds).iter().map(|x| 0.5 - x).collect();
        let u = EdgeSignal::from_flat(dim, u_vals).unwrap();
        let dw = g.apply_incidence(&w).unwrap();
        let dtu = g.apply_incidence_transpose(&u).unwrap();

        let dense = dense_incidence(&g, dim);
        for (r, row) in dense.iter().enumerate() {
            let expect: f64 = row.iter().zip(w.as_flat()).map(|(a, b)| a * b).sum();
            prop_assert!((dw.as_flat()[r] - expect).abs() <= 1e-12);
        }
        for c in 0..n * dim {
            let expect: f64 = dense.iter().zip(u.as_flat()).map(|(row, x)| row[c] * x).sum();
            prop_assert!((dtu.as_flat()[c] - expect).abs() <= 1e-12);
        }
        prop_assert!((dw.dot(&u) - w.dot(&dtu)).abs() <= 1e-12);
    }

    #[test]
    fn neighborhoods_are_symmetric_and_degrees_sum((n, edges) in small_graph()) {
        let g = EmpiricalGraph::new(n, edges).unwrap();
        let total: usize = (0..n).map(|i| g.degree(i).unwrap()).sum();
        prop_assert_eq!(total, 2 * g.edge_count());
        for i in 0..n {
            for j in g.neighborhood(i).unwrap() {
                prop_assert!(g.neighborhood(j).unwrap().contains(&i));
                prop_assert_ne!(i, j);
            }
        }
    }

    #[test]
    fn tv_is_a_seminorm(
        (n, edges) in small_graph(),
        seeds in proptest::collection::vec(-3.0f64..3.0, 1..8),
        c in -4.0f64..4.0,
        shift in proptest::collection::vec(-2.0f64..2.0, 2),
    ) {
        let g = EmpiricalGraph::new(n, edges).unwrap();
        let a = NodeSignal::from_flat(2, signal(n, 2, &seeds)).unwrap();
        let b = NodeSignal::from_flat(2, signal(n, 2, &seeds).iter().map(|x| x * x - 1.0).collect()).unwrap();
        let tv_a = tv_norm(&g, &a).unwrap();
        let tv_b = tv_norm(&g, &b).unwrap();
        prop_assert!(tv_a >= 0.0);
        prop_assert!((tv_norm(&g, &a.scaled(c)).unwrap() - c.abs() * tv_a).abs() <= 1e-10 * (1.0 + tv_a));

        let sum: Vec<f64> = a.as_flat().iter().zip(b.as_flat()).map(|(x, y)| x + y).collect();
        let tv_sum = tv_norm(&g, &NodeSignal::from_flat(2, sum).unwrap()).unwrap();
        prop_assert!(tv_sum <= tv_a + tv_b + 1e-10);

        let shifted: Vec<f64> = a.as_flat().iter().enumerate().map(|(k, x)| x + shift[k % 2]).collect();
        let tv_shifted = tv_norm(&g, &NodeSignal::from_flat(2, shifted).unwrap()).unwrap();
        prop_assert!((tv_shifted - tv_a).abs() <= 1e-10 * (1.0 + tv_a));
    }
}

#[test]
fn constant_signal_has_zero_tv_on_any_graph() {
    let g = sbm_generate(&[20, 20], 0.4, 0.05, 3).unwrap().graph;
    let w = NodeSignal::from_flat(2, [1.5, -0.25].repeat(40)).unwrap();
    assert_eq!(tv_norm(&g, &w).unwrap(), 0.0);
}

#[test]
fn sbm_intra_cluster_edge_count_is_binomial() {
    // 2 · C(150, 2) pairs at p = 1/2: mean 11175, sd ≈ 74.7
    let pairs = 2.0 * (150.0 * 149.0 / 2.0);
    let mean = pairs * 0.5;
    let sd = (pairs * 0.25_f64).sqrt();
    let mut total = 0.0;
    let seeds = 10;
    for seed in 0..seeds {
        let s = sbm_generate(&[150, 150], 0.5, 1e-3, seed).unwrap();
        let intra = s
            .graph
            .edges()
            .iter()
            .filter(|e| s.clusters[e.head] == s.clusters[e.tail])
            .count() as f64;
        assert!(
            (intra - mean).abs() <= 3.0 * sd,
            "seed {seed}: {intra} intra-cluster edges"
        );
        total += intra;
    }
    let avg = total / seeds as f64;
    assert!((avg - mean).abs() <= 3.0 * sd / (seeds as f64).sqrt());
}

#[test]
fn sbm_inter_cluster_edges_are_rare() {
    // 22500 cross pairs at p = 1e-3: mean 22.5
    for seed in 0..5 {
        let s = sbm_generate(&[150, 150], 0.5, 1e-3, seed).unwrap();
        let inter = s
            .graph
            .edges()
            .iter()
            .filter(|e| s.clusters[e.head] != s.clusters[e.tail])
            .count();
        assert!(inter <= 22 + 3 * 5, "seed {seed}: {inter} inter-cluster edges");
        assert!(s.graph.edges().iter().all(|e| e.weight == 1.0));
    }
}

#[test]
fn sbm_is_deterministic_and_seed_sensitive() {
    let a = sbm_generate(&[30, 20], 0.3, 0.05, 7).unwrap();
    let b = sbm_generate(&[30, 20], 0.3, 0.05, 7).unwrap();
    let c = sbm_generate(&[30, 20], 0.3, 0.05, 8).unwrap();
    assert_eq!(a.graph.edges(), b.graph.edges());
    assert_ne!(a.graph.edges(), c.graph.edges());
    assert_eq!(a.clusters[..30], [0; 30]);
    assert_eq!(a.clusters[30..], [1; 20]);
}
