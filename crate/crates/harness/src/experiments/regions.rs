use unrectify::graph::modules::{planar_fusion_example, planar_max2, planar_maxlu2, planar_relu};
use unrectify::partition::{count_regions_2d, count_regions_2d_multi, fusion_partition_bound, Probe};

use crate::output::{target, write_csv, REGIONS_HEADER};
use crate::{Experiment, ExperimentConfig, Result};

pub const REGIONS_CSV: &str = "regions_2d.csv";
pub const REGION_BOX: (f64, f64) = (-5.0, 5.0);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionsRow {
    pub network: &'static str,
    pub probe: &'static str,
    pub region_count: u128,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionsRun {
    pub grid_n: usize,
    pub rows: Vec<RegionsRow>,
}

impl RegionsRun {
    pub fn count(&self, network: &str, probe: &str) -> Option<u128> {
        self.rows
            .iter()
            .find(|r| r.network == network && r.probe == probe)
            .map(|r| r.region_count)
    }
}

/// Region counts on a lattice over `[−5, 5]²` for the planar activations
/// and the two-channel fusion example, with the fusion product bound.
pub fn run_regions_2d(cfg: &ExperimentConfig) -> Result<RegionsRun> {
    cfg.expect(Experiment::Regions2d)?;
    cfg.require(cfg.grid_n >= 2, "grid_n must be at least 2")?;
    let (lo, hi) = REGION_BOX;
    let n = cfg.grid_n;
    let mut rows = Vec::new();
    for (network, dag) in [("relu", planar_relu()?), ("max2", planar_max2()?), ("maxlu2", planar_maxlu2()?)] {
        let count = count_regions_2d::<f64>(&dag, dag.output(), lo, hi, n)?;
        rows.push(RegionsRow {
            network,
            probe: "output",
            region_count: count as u128,
        });
    }
    let ex = planar_fusion_example::<f64>()?;
    let probes = [
        Probe::Node(ex.fusion_nodes[0]),
        Probe::Arc(ex.top_arcs[0]),
        Probe::Arc(ex.bottom_arcs[0]),
    ];
    let counts = count_regions_2d_multi(&ex.dag, &probes, lo, hi, n)?;
    for (probe, &c) in ["fusion", "top", "bottom"].iter().zip(&counts) {
        rows.push(RegionsRow {
            network: "fusion_example",
            probe,
            region_count: c as u128,
        });
    }
    rows.push(RegionsRow {
        network: "fusion_example",
        probe: "product_bound",
        region_count: fusion_partition_bound(&[counts[1] as u64, counts[2] as u64])?,
    });
    if let Some(dir) = &cfg.output_dir {
        let records: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.network.to_string(),
                    r.probe.to_string(),
                    n.to_string(),
                    r.region_count.to_string(),
                ]
            })
            .collect();
        write_csv(&target(dir, REGIONS_CSV)?, &REGIONS_HEADER, &records)?;
    }
    Ok(RegionsRun { grid_n: n, rows })
}
