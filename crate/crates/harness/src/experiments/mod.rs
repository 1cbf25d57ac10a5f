mod fusion;
mod lenet;
mod regions;
mod stability;

pub use fusion::{run_fusion_stack, FusionStackRun, FUSION_STACK_CSV};
pub use lenet::{run_lenet_partition, DataSource, LenetRun, LENET_CSV, MNIST_IMAGES, MNIST_LABELS};
pub use regions::{run_regions_2d, RegionsRow, RegionsRun, REGIONS_CSV, REGION_BOX};
pub use stability::{
    run_stability_gain, GainRun, StabilityRun, GAIN_CSV, GAIN_RESCALED_CSV, LEVEL_SUMS_CSV, LEVEL_SUMS_RESCALED_CSV,
};

use unrectify::partition::{PartitionStats, StatsOptions};

use crate::output::{target, write_csv, PARTITION_HEADER};
use crate::{ExperimentConfig, Result};

/// One line of a partition-statistics table.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionRow {
    /// Layer number for fusion stacks, level for LeNet-5.
    pub layer_or_node: usize,
    pub channel: String,
    pub stats: PartitionStats,
}

impl PartitionRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.layer_or_node.to_string(),
            self.channel.clone(),
            self.stats.region_count.to_string(),
            self.stats.max_points_per_region.to_string(),
            self.stats.max_intra_region_distance.to_string(),
            self.stats.multi_member_point_count.to_string(),
        ]
    }
}

fn stats_options(cfg: &ExperimentConfig) -> StatsOptions {
    StatsOptions {
        pair_cap: cfg.pair_budget,
        seed: cfg.seed,
    }
}

/// Seed for the input samples, kept apart from the weight seed.
fn sample_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seed.wrapping_add(1)
}

fn write_partition_rows(cfg: &ExperimentConfig, name: &str, rows: &[PartitionRow]) -> Result<()> {
    if let Some(dir) = &cfg.output_dir {
        let records: Vec<Vec<String>> = rows.iter().map(PartitionRow::record).collect();
        write_csv(&target(dir, name)?, &PARTITION_HEADER, &records)?;
    }
    Ok(())
}
