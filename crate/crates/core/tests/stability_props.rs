use proptest::prelude::*;
use unrectify::graph::modules::build_series_stack;
use unrectify::graph::ops;
use unrectify::graph::random::{gaussian_samples, random_dag, rng, RandomDagConfig};
use unrectify::matrix::{Affine, Matrix};
use unrectify::stability::{certify, empirical_gain, level_sums, rescale_to_stability, rescale_with_report, soundness_check};
use unrectify::{Activation, BasisElement, Dag};

fn weighted_config(seed: u64) -> RandomDagConfig {
    RandomDagConfig {
        input_dim: 2 + (seed % 3) as usize,
        inner_nodes: 3 + (seed % 7) as usize,
        weight_scale: 2.0,
        unweighted_arcs: false,
        transforms: seed.is_multiple_of(2),
        ..RandomDagConfig::default()
    }
}

#[test]
fn identity_network_has_unit_gain() {
    let dag = ops::series(&ops::identity::<f64>(3).unwrap(), BasisElement::Identity).unwrap();
    let r = certify(&dag).unwrap();
    assert_eq!(r.certified_c, vec![1.0, 1.0]);
    let xs = gaussian_samples(&mut rng(1), 50, 3);
    let g = empirical_gain(&dag, &xs, 10_000, 0).unwrap();
    assert!(g.gains().iter().all(|&v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn linear_network_gain_approaches_norm() {
    let w = Matrix::from_f64_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
    let norm = unrectify::stability::spectral_norm(&w).unwrap();
    let dag = ops::series(&ops::identity::<f64>(2).unwrap(), BasisElement::Linear(w)).unwrap();
    let xs = gaussian_samples(&mut rng(2), 400, 2);
    let g = empirical_gain(&dag, &xs, 100_000, 0).unwrap().gains()[1];
    assert!(g <= norm + 1e-12 && g > 0.99 * norm, "{g} vs {norm}");
}

#[test]
fn chain_gain_below_recursion() {
    let w = Matrix::from_f64_rows(&[vec![0.9, 0.0], vec![0.0, -0.6]]).unwrap();
    let layers = vec![Affine::new(w, vec![0.3, -0.1]).unwrap(); 4];
    let dag = build_series_stack(2, &layers, Activation::relu()).unwrap();
    let r = certify(&dag).unwrap();
    for (n, c) in r.certified_c.iter().enumerate() {
        assert!((c - 0.9f64.powi(n as i32)).abs() < 1e-12);
    }
    let xs = gaussian_samples(&mut rng(3), 300, 2);
    assert!(soundness_check(&dag, &r, &xs, 50_000, 0, 1e-6).unwrap().holds());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rescaled_networks_are_certified_and_sound(seed in any::<u64>()) {
        let dag: Dag = random_dag(&weighted_config(seed), seed).unwrap();
        let out = rescale_with_report(&dag, false).unwrap();
        prop_assert!(out.unresolved.is_empty());
        let r = certify(&out.dag).unwrap();
        prop_assert_eq!(r.stable_from, Some(1));
        let xs = gaussian_samples(&mut rng(seed ^ 5), 150, dag.input_dim());
        let s = soundness_check(&out.dag, &r, &xs, 20_000, seed, 1e-6).unwrap();
        prop_assert!(s.holds(), "{:?}", s.violations);
        // Soundness holds for the unscaled network as well.
        let r0 = certify(&dag).unwrap();
        prop_assert!(soundness_check(&dag, &r0, &xs, 20_000, seed, 1e-6).unwrap().holds());
    }

    #[test]
    fn rescale_is_idempotent(seed in any::<u64>(), frob in any::<bool>()) {
        let dag: Dag = random_dag(&weighted_config(seed), seed).unwrap();
        let once = rescale_to_stability(&dag, frob).unwrap();
        let twice = rescale_to_stability(&once, frob).unwrap();
        prop_assert_eq!(&once, &twice);
        for s in level_sums(&once).unwrap() {
            prop_assert!(s.sum <= 1.0 + 1e-12);
            if frob {
                prop_assert!(s.frob_sum <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn norm_ordering_and_bounded_recursion(seed in any::<u64>()) {
        let cfg = RandomDagConfig { unweighted_arcs: true, ..weighted_config(seed) };
        let dag: Dag = random_dag(&cfg, seed).unwrap();
        let r = certify(&dag).unwrap();
        for s in &r.level_sums {
            prop_assert!(s.frob_sum + 1e-12 >= s.sum);
        }
        if let Some(m) = r.stable_from {
            for n in m.max(1)..r.certified_c.len() {
                let earlier = r.certified_c[..n].iter().copied().fold(0.0, f64::max);
                prop_assert!(r.certified_c[n] <= earlier * (1.0 + 1e-12));
            }
        }
    }
}
