//! Property suites for the graph math.

use proptest::prelude::*;
use signgt_core::graph::{
    adjacency_power, homophily, normalize_adjacency, stratified_split, Graph,
};
use signgt_core::rng::SplitMix64;
use signgt_core::tensor::Tensor;

fn random_graph(seed: u64, n: usize, p: f64) -> Graph {
    let mut rng = SplitMix64::new(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.next_f64() < p {
                edges.push((i, j));
            }
        }
    }
    let features = Tensor::from_vec(&[n, 1], vec![0.0; n]).unwrap();
    Graph::new(features, &edges, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalized_adjacency_is_bit_symmetric(seed in 0u64..1000, n in 2usize..30) {
        let g = random_graph(seed, n, 0.3);
        let a = normalize_adjacency(&g);
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(a.get(i, j).to_bits(), a.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn powers_stay_contractive(seed in 0u64..500) {
        let g = random_graph(seed, 20, 0.2);
        let a = normalize_adjacency(&g);
        for k in 0..=5 {
            let bias = adjacency_power(&a, k).unwrap();
            let norm = bias.estimate_operator_norm(50, 3, seed);
            prop_assert!(norm <= 1.0 + 1e-8, "k={} norm={}", k, norm);
        }
    }

    #[test]
    fn power_of_sum_is_product_of_powers(seed in 0u64..500, j in 0usize..3, k in 0usize..3) {
        let n = 15;
        let g = random_graph(seed, n, 0.25);
        let a = normalize_adjacency(&g);
        let pj = adjacency_power(&a, j).unwrap();
        let pk = adjacency_power(&a, k).unwrap();
        let pjk = adjacency_power(&a, j + k).unwrap();
        for r in 0..n {
            for c in 0..n {
                let mut prod = 0.0;
                for m in 0..n {
                    prod += pj.value(r, m) * pk.value(m, c);
                }
                prop_assert!((pjk.value(r, c) - prod).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn homophily_survives_class_relabeling(seed in 0u64..1000) {
        let n = 20;
        let mut rng = SplitMix64::new(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.next_f64() < 0.3 {
                    edges.push((i, j));
                }
            }
        }
        edges.push((0, 1));
        let labels: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
        // Permute class ids 0,1,2 -> 2,0,1.
        let relabeled: Vec<usize> = labels.iter().map(|&c| (c + 2) % 3).collect();
        let feat = || Tensor::from_vec(&[n, 1], vec![0.0; n]).unwrap();
        let g1 = Graph::new(feat(), &edges, Some(labels)).unwrap();
        let g2 = Graph::new(feat(), &edges, Some(relabeled)).unwrap();
        prop_assert_eq!(homophily(&g1).unwrap(), homophily(&g2).unwrap());
    }

    #[test]
    fn split_is_deterministic_and_partitioning(seed in 0u64..1000, per_class in 3usize..20) {
        let labels: Vec<usize> = (0..per_class * 3).map(|i| i % 3).collect();
        let a = stratified_split(&labels, (0.6, 0.2, 0.2), seed).unwrap();
        let b = stratified_split(&labels, (0.6, 0.2, 0.2), seed).unwrap();
        prop_assert_eq!(&a, &b);
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    }
}
