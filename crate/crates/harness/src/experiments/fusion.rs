use unrectify::graph::modules::{random_fusion_stack, FusionStack};
use unrectify::graph::random::{gaussian_samples, rng};
use unrectify::partition::{partition_stats_many, Probe};

use super::{sample_seed, stats_options, write_partition_rows, PartitionRow};
use crate::{Experiment, ExperimentConfig, Result};

pub const FUSION_STACK_CSV: &str = "fusion_stack.csv";

#[derive(Clone, Debug)]
pub struct FusionStackRun {
    pub stack: FusionStack<f64>,
    /// Per layer: top channel, bottom channel, fusion node.
    pub rows: Vec<PartitionRow>,
}

impl FusionStackRun {
    pub fn layer(&self, layer: usize) -> [&PartitionRow; 3] {
        let i = 3 * (layer - 1);
        [&self.rows[i], &self.rows[i + 1], &self.rows[i + 2]]
    }
}

/// Stack of `ReLU∘M_top + ReLU∘M_bot` layers with i.i.d. standard-normal
/// weights and biases, probed at each layer's two channel arcs and its
/// fusion node.
pub fn run_fusion_stack(cfg: &ExperimentConfig) -> Result<FusionStackRun> {
    cfg.expect(Experiment::FusionStack)?;
    cfg.require(cfg.dims > 0 && cfg.layer_count > 0, "dims and layer_count must be positive")?;
    cfg.require(cfg.sample_count > 0, "sample_count must be positive")?;
    let stack = random_fusion_stack::<f64>(cfg.dims, cfg.layer_count, cfg.seed)?;
    let samples = gaussian_samples(&mut rng(sample_seed(cfg)), cfg.sample_count, cfg.dims);
    let mut probes = Vec::with_capacity(3 * cfg.layer_count);
    for l in 0..cfg.layer_count {
        probes.extend([
            Probe::Arc(stack.top_arcs[l]),
            Probe::Arc(stack.bottom_arcs[l]),
            Probe::Node(stack.fusion_nodes[l]),
        ]);
    }
    let stats = partition_stats_many(&stack.dag, &probes, &samples, &stats_options(cfg))?;
    let rows = stats
        .into_iter()
        .enumerate()
        .map(|(i, stats)| PartitionRow {
            layer_or_node: i / 3 + 1,
            channel: ["top", "bottom", "fusion"][i % 3].to_string(),
            stats,
        })
        .collect::<Vec<_>>();
    write_partition_rows(cfg, FUSION_STACK_CSV, &rows)?;
    Ok(FusionStackRun { stack, rows })
}
