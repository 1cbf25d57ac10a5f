use std::path::PathBuf;

use unrectify::graph::modules::{build_lenet5, Lenet5, LenetParams};
use unrectify::graph::random::{gaussian_samples, rng};
use unrectify::partition::{partition_stats_many, PartitionStats, Probe};
use unrectify::NodeId;

use super::{sample_seed, stats_options, write_partition_rows, PartitionRow};
use crate::idx::{load_idx, MNIST_SIDE};
use crate::{Experiment, ExperimentConfig, Result};

pub const LENET_CSV: &str = "lenet_partition.csv";
pub const MNIST_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_LABELS: &str = "train-labels-idx1-ubyte";

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Mnist(PathBuf),
    Synthetic,
}

#[derive(Clone, Debug)]
pub struct LenetRun {
    pub net: Lenet5<f64>,
    pub source: DataSource,
    pub sample_count: usize,
    /// Levels 3, 4, 7, 8. Pooled channel levels hold the largest value of
    /// each statistic over their channels.
    pub rows: Vec<PartitionRow>,
    /// Per-channel statistics behind the level-3 and level-7 rows.
    pub channels: Vec<(usize, Vec<PartitionStats>)>,
}

fn channel_max(stats: &[PartitionStats]) -> PartitionStats {
    let mut m = stats[0].clone();
    for s in &stats[1..] {
        m.region_count = m.region_count.max(s.region_count);
        m.max_points_per_region = m.max_points_per_region.max(s.max_points_per_region);
        m.max_intra_region_distance = m.max_intra_region_distance.max(s.max_intra_region_distance);
        m.multi_member_point_count = m.multi_member_point_count.max(s.multi_member_point_count);
        m.subsampled_regions = m.subsampled_regions.max(s.subsampled_regions);
    }
    m
}

fn load_inputs(cfg: &ExperimentConfig) -> Result<(DataSource, Vec<Vec<f64>>)> {
    match &cfg.mnist_dir {
        Some(dir) => {
            let mut data = load_idx(&dir.join(MNIST_IMAGES), &dir.join(MNIST_LABELS))?;
            data.images.truncate(cfg.sample_count);
            Ok((DataSource::Mnist(dir.clone()), data.images))
        }
        None => {
            log::warn!(
                "no MNIST directory given; using {} synthetic standard-normal images",
                cfg.sample_count
            );
            let xs = gaussian_samples(&mut rng(sample_seed(cfg)), cfg.sample_count, MNIST_SIDE * MNIST_SIDE);
            Ok((DataSource::Synthetic, xs))
        }
    }
}

/// Partition statistics of LeNet-5 with seeded random weights at the pooled
/// channels and concatenations of both convolution stages.
pub fn run_lenet_partition(cfg: &ExperimentConfig) -> Result<LenetRun> {
    cfg.expect(Experiment::LenetPartition)?;
    cfg.require(cfg.sample_count > 0, "sample_count must be positive")?;
    let net = build_lenet5::<f64>(LenetParams {
        seed: cfg.seed,
        ..LenetParams::default()
    })?;
    let (source, samples) = load_inputs(cfg)?;
    cfg.require(!samples.is_empty(), "the dataset holds no images")?;
    let groups: [(Vec<NodeId>, bool); 4] = [
        (net.pool1.clone(), true),
        (vec![net.concat1], false),
        (net.pool2.clone(), true),
        (vec![net.concat2], false),
    ];
    let probes: Vec<Probe> = groups.iter().flat_map(|(g, _)| g.iter().map(|&n| Probe::Node(n))).collect();
    let mut stats = partition_stats_many(&net.dag, &probes, &samples, &stats_options(cfg))?.into_iter();
    let (mut rows, mut channels) = (Vec::new(), Vec::new());
    for (nodes, pooled) in &groups {
        let level = net.dag.level(nodes[0]);
        let group: Vec<PartitionStats> = stats.by_ref().take(nodes.len()).collect();
        let channel = if *pooled {
            format!("max_over_{}_channels", nodes.len())
        } else {
            "concat".to_string()
        };
        rows.push(PartitionRow {
            layer_or_node: level,
            channel,
            stats: channel_max(&group),
        });
        if *pooled {
            channels.push((level, group));
        }
    }
    write_partition_rows(cfg, LENET_CSV, &rows)?;
    Ok(LenetRun {
        net,
        source,
        sample_count: samples.len(),
        rows,
        channels,
    })
}
