use std::collections::HashMap;

use proptest::prelude::*;
use unrectify::graph::modules::random_fusion_stack;
use unrectify::graph::random::{gaussian_samples, random_dag, rng, RandomDagConfig};
use unrectify::partition::{
    affine_piece, check_refinement, partition_stats_many, region_code, region_keys, Probe, StatsOptions,
};
use unrectify::{Dag, NodeId};

fn piecewise_config(seed: u64) -> RandomDagConfig {
    RandomDagConfig {
        input_dim: 1 + (seed % 3) as usize,
        inner_nodes: 3 + (seed % 6) as usize,
        ..RandomDagConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shared_code_means_shared_piece(seed in any::<u64>()) {
        let dag: Dag = random_dag(&piecewise_config(seed), seed).unwrap();
        let xs = gaussian_samples(&mut rng(seed ^ 1), 120, dag.input_dim());
        for v in 0..dag.node_count() {
            let node = NodeId(v);
            let mut reps: HashMap<Vec<u32>, usize> = HashMap::new();
            for (i, x) in xs.iter().enumerate() {
                let code = region_code(&dag, node, x).unwrap().0;
                let r = *reps.entry(code).or_insert(i);
                let piece = affine_piece(&dag, node, &xs[r]).unwrap();
                let (_, trace) = dag.forward(x).unwrap();
                let err = piece
                    .apply(x)
                    .iter()
                    .zip(trace.value(node))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                prop_assert!(err <= 1e-9, "node {v}, sample {i}: {err}");
            }
        }
    }

    #[test]
    fn codes_refine_along_ancestry(seed in any::<u64>()) {
        let dag: Dag = random_dag(&piecewise_config(seed), seed).unwrap();
        let xs = gaussian_samples(&mut rng(seed ^ 2), 300, dag.input_dim());
        for a in 0..dag.node_count() {
            for b in dag.ancestors(NodeId(a)).unwrap() {
                let rep = check_refinement(&dag, NodeId(a), b, &xs).unwrap();
                prop_assert!(rep.holds(), "{a} -> {b}: {rep:?}");
                prop_assert!(rep.fine_regions >= rep.coarse_regions);
            }
        }
    }

    #[test]
    fn fingerprints_group_like_codes(seed in any::<u64>()) {
        let dag: Dag = random_dag(&piecewise_config(seed), seed).unwrap();
        let xs = gaussian_samples(&mut rng(seed ^ 3), 200, dag.input_dim());
        let out = dag.output();
        let keys = region_keys(&dag, &[Probe::Node(out)], &xs).unwrap().remove(0);
        let codes: Vec<_> = xs.iter().map(|x| region_code(&dag, out, x).unwrap()).collect();
        for i in 0..xs.len() {
            for j in 0..i {
                prop_assert_eq!(keys[i] == keys[j], codes[i] == codes[j]);
            }
        }
    }
}

#[test]
fn fusion_refines_channels_and_statistics_are_monotone() {
    let stack = random_fusion_stack::<f64>(6, 4, 9).unwrap();
    let xs = gaussian_samples(&mut rng(10), 1500, 6);
    for (l, &f) in stack.fusion_nodes.iter().enumerate() {
        for arc in [stack.top_arcs[l], stack.bottom_arcs[l]] {
            assert!(check_refinement(&stack.dag, f, arc, &xs).unwrap().holds());
        }
    }
    let probes: Vec<Probe> = stack.fusion_nodes.iter().map(|&n| Probe::Node(n)).collect();
    let stats = partition_stats_many(&stack.dag, &probes, &xs, &StatsOptions::default()).unwrap();
    for w in stats.windows(2) {
        assert!(w[1].region_count >= w[0].region_count);
        assert!(w[1].max_points_per_region <= w[0].max_points_per_region);
        assert!(w[1].max_intra_region_distance <= w[0].max_intra_region_distance);
    }
}
