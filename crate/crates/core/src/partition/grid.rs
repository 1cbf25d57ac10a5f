use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::partition::{CodePlan, Encoder, Probe};
use crate::scalar::Scalar;

/// Distinct region codes over a `grid_n × grid_n` lattice on `[lo, hi]²`,
/// one count per probe. A lower bound on the number of regions meeting the
/// box, exact once every region contains a lattice point.
pub fn count_regions_2d_multi<T: Scalar>(
    dag: &Dag<T>,
    probes: &[Probe],
    lo: f64,
    hi: f64,
    grid_n: usize,
) -> Result<Vec<usize>> {
    if dag.input_dim() != 2 {
        return Err(Error::dims("region counting on a planar grid", 2, dag.input_dim()));
    }
    if grid_n < 2 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::InvalidArgument(format!(
            "grid needs grid_n ≥ 2 and a finite box lo < hi, got {grid_n} on [{lo}, {hi}]"
        )));
    }
    let plans: Vec<CodePlan> = probes
        .iter()
        .map(|&p| CodePlan::new(dag, p))
        .collect::<Result<_>>()?;
    let coord = |i: usize| T::lit(lo + (hi - lo) * i as f64 / (grid_n - 1) as f64);
    let empty = || vec![HashSet::<Vec<u32>>::new(); plans.len()];
    let sets = (0..grid_n)
        .into_par_iter()
        .fold(
            || (Encoder::new(dag), empty(), vec![Vec::new(); plans.len()], Vec::new()),
            |(mut enc, mut sets, mut last, mut code), i| {
                let y = coord(i);
                for j in 0..grid_n {
                    enc.encode(dag, &[coord(j), y]).expect("grid points are finite");
                    for (k, plan) in plans.iter().enumerate() {
                        code.clear();
                        for a in &plan.arcs {
                            code.extend_from_slice(&enc.symbols()[a.0]);
                        }
                        // Neighbouring points mostly share a region.
                        if code != last[k] {
                            if !sets[k].contains(&code) {
                                sets[k].insert(code.clone());
                            }
                            last[k].clone_from(&code);
                        }
                    }
                }
                (enc, sets, last, code)
            },
        )
        .map(|(_, sets, _, _)| sets)
        .reduce(empty, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.extend(y);
            }
            a
        });
    Ok(sets.into_iter().map(|s| s.len()).collect())
}

pub fn count_regions_2d<T: Scalar>(
    dag: &Dag<T>,
    probe: impl Into<Probe>,
    lo: f64,
    hi: f64,
    grid_n: usize,
) -> Result<usize> {
    Ok(count_regions_2d_multi(dag, &[probe.into()], lo, hi, grid_n)?[0])
}

/// `∏ nᵢ`, the most regions a fusion of channels with `nᵢ` regions can have.
pub fn fusion_partition_bound(channel_counts: &[u64]) -> Result<u128> {
    if channel_counts.contains(&0) {
        return Err(Error::InvalidArgument("region counts must be at least 1".into()));
    }
    channel_counts
        .iter()
        .try_fold(1u128, |acc, &n| acc.checked_mul(n as u128))
        .ok_or_else(|| Error::InvalidArgument("product of region counts overflows".into()))
}
