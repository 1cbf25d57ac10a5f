use std::fs;

use unrectify_harness::experiments::{
    DataSource, FUSION_STACK_CSV, GAIN_CSV, GAIN_RESCALED_CSV, LENET_CSV, LEVEL_SUMS_CSV, LEVEL_SUMS_RESCALED_CSV,
    MNIST_IMAGES, MNIST_LABELS, REGIONS_CSV,
};
use unrectify_harness::idx::{load_idx, write_idx};
use unrectify_harness::{
    run_fusion_stack, run_lenet_partition, run_regions_2d, run_stability_gain, ExperimentConfig, HarnessError, IdxError,
};

fn header(path: &std::path::Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn csv_headers_match_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = Some(dir.path().to_path_buf());
    run_fusion_stack(&ExperimentConfig { sample_count: 50, layer_count: 2, output_dir: out.clone(), ..ExperimentConfig::fusion_stack() }).unwrap();
    run_stability_gain(&ExperimentConfig { sample_count: 30, output_dir: out.clone(), ..ExperimentConfig::stability_gain() }).unwrap();
    run_lenet_partition(&ExperimentConfig { sample_count: 5, output_dir: out.clone(), ..ExperimentConfig::lenet_partition() }).unwrap();
    run_regions_2d(&ExperimentConfig { grid_n: 21, output_dir: out, ..ExperimentConfig::regions_2d() }).unwrap();
    let partition = "layer_or_node,channel,region_count,max_points_per_region,max_intra_region_distance,multi_member_point_count";
    let golden = [
        (FUSION_STACK_CSV, partition),
        (LENET_CSV, partition),
        (LEVEL_SUMS_CSV, "level,sum,frob_sum,certified_C"),
        (LEVEL_SUMS_RESCALED_CSV, "level,sum,frob_sum,certified_C"),
        (GAIN_CSV, "level,max_gain"),
        (GAIN_RESCALED_CSV, "level,max_gain"),
        (REGIONS_CSV, "network,probe,grid_n,region_count"),
    ];
    for (name, want) in golden {
        assert_eq!(header(&dir.path().join(name)), want, "{name}");
    }
    let fusion = fs::read_to_string(dir.path().join(FUSION_STACK_CSV)).unwrap();
    assert_eq!(fusion.lines().count(), 1 + 2 * 3);
    assert!(fusion.lines().nth(1).unwrap().starts_with("1,top,"));
}

#[test]
fn single_layer_and_two_samples() {
    let run = run_fusion_stack(&ExperimentConfig { sample_count: 2, layer_count: 1, ..ExperimentConfig::fusion_stack() }).unwrap();
    for row in &run.rows {
        assert!(row.stats.max_points_per_region <= 2);
    }
    let one = run_fusion_stack(&ExperimentConfig { sample_count: 400, layer_count: 1, dims: 3, ..ExperimentConfig::fusion_stack() }).unwrap();
    let [top, bottom, fusion] = one.layer(1);
    assert!(fusion.stats.region_count >= top.stats.region_count.max(bottom.stats.region_count));
}

#[test]
fn wrong_experiment_rejected() {
    let err = run_fusion_stack(&ExperimentConfig::regions_2d()).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)), "{err}");
}

#[test]
fn idx_round_trip_and_lenet_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let images: Vec<Vec<u8>> = (0..12u32).map(|k| (0..784u32).map(|i| ((i * 7 + k * 31) % 256) as u8).collect()).collect();
    let labels: Vec<u8> = (0..12).map(|k| k % 10).collect();
    let (ip, lp) = (dir.path().join(MNIST_IMAGES), dir.path().join(MNIST_LABELS));
    write_idx(&ip, &lp, &images, &labels).unwrap();
    let data = load_idx(&ip, &lp).unwrap();
    assert_eq!(data.len(), 12);
    assert_eq!(data.labels, labels);
    for (a, b) in data.images.iter().zip(&images) {
        let back: Vec<u8> = a.iter().map(|&p| (p * 255.0).round() as u8).collect();
        assert_eq!(&back, b);
        assert!(a.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    let cfg = ExperimentConfig {
        sample_count: 10,
        mnist_dir: Some(dir.path().to_path_buf()),
        ..ExperimentConfig::lenet_partition()
    };
    let run = run_lenet_partition(&cfg).unwrap();
    assert_eq!(run.source, DataSource::Mnist(dir.path().to_path_buf()));
    assert_eq!(run.sample_count, 10);
    let levels: Vec<usize> = run.rows.iter().map(|r| r.layer_or_node).collect();
    assert_eq!(levels, vec![3, 4, 7, 8]);
    for w in run.rows.windows(2) {
        assert!(w[1].stats.region_count >= w[0].stats.region_count);
        assert!(w[1].stats.max_points_per_region <= w[0].stats.max_points_per_region);
        assert!(w[1].stats.max_intra_region_distance <= w[0].stats.max_intra_region_distance);
    }

    let bytes = fs::read(&ip).unwrap();
    fs::write(&ip, &bytes[..1000]).unwrap();
    match load_idx(&ip, &lp).unwrap_err() {
        IdxError::Truncated { offset, .. } => assert_eq!(offset, 16),
        other => panic!("{other}"),
    }
    fs::write(&lp, [0u8, 0, 8, 1, 0, 0, 0, 1, 5]).unwrap();
    fs::write(&ip, &bytes).unwrap();
    assert!(matches!(load_idx(&ip, &lp).unwrap_err(), IdxError::CountMismatch { images: 12, labels: 1 }));
}

#[test]
fn synthetic_lenet_is_monotone() {
    let run = run_lenet_partition(&ExperimentConfig { sample_count: 150, ..ExperimentConfig::lenet_partition() }).unwrap();
    assert_eq!(run.source, DataSource::Synthetic);
    assert_eq!(run.channels.len(), 2);
    assert_eq!(run.channels[0].1.len(), 6);
    assert_eq!(run.channels[1].1.len(), 16);
    for w in run.rows.windows(2) {
        assert!(w[1].stats.region_count >= w[0].stats.region_count);
        assert!(w[1].stats.max_intra_region_distance <= w[0].stats.max_intra_region_distance);
    }
}
