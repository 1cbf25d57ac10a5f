use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::random::rng;
use crate::graph::Dag;
use crate::partition::{check_nested, region_keys, Probe};
use crate::scalar::{l2_distance, Scalar};

/// Pairs per region beyond which distances are estimated from a random
/// subset of pairs.
pub const DEFAULT_PAIR_CAP: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StatsOptions {
    pub pair_cap: u64,
    pub seed: u64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            pair_cap: DEFAULT_PAIR_CAP,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionStats {
    pub sample_count: usize,
    pub region_count: usize,
    pub max_points_per_region: usize,
    /// Largest ℓ₂ distance between two samples of one region.
    pub max_intra_region_distance: f64,
    /// Samples lying in regions with at least two samples.
    pub multi_member_point_count: usize,
    /// Regions whose distance was estimated from sampled pairs.
    pub subsampled_regions: usize,
}

/// Sample indices grouped by key, ordered by each group's first sample.
fn groups(keys: &[u128]) -> Vec<Vec<usize>> {
    let mut slot: HashMap<u128, usize> = HashMap::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        let g = *slot.entry(*k).or_insert_with(|| {
            out.push(Vec::new());
            out.len() - 1
        });
        out[g].push(i);
    }
    out
}

fn group_diameter<T: Scalar>(members: &[usize], samples: &[Vec<T>], opts: &StatsOptions) -> (f64, bool) {
    let s = members.len() as u64;
    let pairs = s * s.saturating_sub(1) / 2;
    if pairs <= opts.pair_cap {
        let mut best = 0.0f64;
        for (i, &p) in members.iter().enumerate() {
            for &q in &members[i + 1..] {
                best = best.max(l2_distance(&samples[p], &samples[q]).as_f64());
            }
        }
        (best, false)
    } else {
        let mut r = rng(opts.seed ^ (members[0] as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut best = 0.0f64;
        for _ in 0..opts.pair_cap {
            let i = r.random_range(0..members.len());
            let mut j = r.random_range(0..members.len() - 1);
            if j >= i {
                j += 1;
            }
            best = best.max(l2_distance(&samples[members[i]], &samples[members[j]]).as_f64());
        }
        (best, true)
    }
}

/// Statistics of the partition given by per-sample region keys.
pub fn stats_from_keys<T: Scalar>(keys: &[u128], samples: &[Vec<T>], opts: &StatsOptions) -> PartitionStats {
    let gs = groups(keys);
    let (diameter, subsampled) = gs
        .par_iter()
        .filter(|g| g.len() > 1)
        .map(|g| {
            let (d, sub) = group_diameter(g, samples, opts);
            (d, usize::from(sub))
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    if subsampled > 0 {
        log::info!("{subsampled} regions exceeded {} pairs; distances estimated from sampled pairs", opts.pair_cap);
    }
    PartitionStats {
        sample_count: keys.len(),
        region_count: gs.len(),
        max_points_per_region: gs.iter().map(Vec::len).max().unwrap_or(0),
        max_intra_region_distance: diameter,
        multi_member_point_count: gs.iter().filter(|g| g.len() > 1).map(Vec::len).sum(),
        subsampled_regions: subsampled,
    }
}

pub fn partition_stats_many<T: Scalar>(
    dag: &Dag<T>,
    probes: &[Probe],
    samples: &[Vec<T>],
    opts: &StatsOptions,
) -> Result<Vec<PartitionStats>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("partition statistics need at least one sample".into()));
    }
    let keys = region_keys(dag, probes, samples)?;
    Ok(keys.iter().map(|k| stats_from_keys(k, samples, opts)).collect())
}

pub fn partition_stats<T: Scalar>(dag: &Dag<T>, probe: impl Into<Probe>, samples: &[Vec<T>]) -> Result<PartitionStats> {
    let mut v = partition_stats_many(dag, &[probe.into()], samples, &StatsOptions::default())?;
    Ok(v.remove(0))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefinementReport {
    pub sample_count: usize,
    pub fine_regions: usize,
    pub coarse_regions: usize,
    /// Samples sharing a fine region with an earlier sample but not its
    /// coarse region.
    pub violations: usize,
    /// First violating pair of sample indices.
    pub witness: Option<(usize, usize)>,
}

impl RefinementReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

pub fn refinement_from_keys(fine: &[u128], coarse: &[u128]) -> RefinementReport {
    let mut first: HashMap<u128, usize> = HashMap::new();
    let mut violations = 0;
    let mut witness = None;
    for (i, (f, c)) in fine.iter().zip(coarse).enumerate() {
        let j = *first.entry(*f).or_insert(i);
        if coarse[j] != *c {
            violations += 1;
            witness.get_or_insert((j, i));
        }
    }
    let coarse_regions = groups(coarse).len();
    RefinementReport {
        sample_count: fine.len(),
        fine_regions: first.len(),
        coarse_regions,
        violations,
        witness,
    }
}

/// Empirical check that equal codes at `fine` imply equal codes at `coarse`.
pub fn check_refinement<T: Scalar>(
    dag: &Dag<T>,
    fine: impl Into<Probe>,
    coarse: impl Into<Probe>,
    samples: &[Vec<T>],
) -> Result<RefinementReport> {
    let (fine, coarse) = (fine.into(), coarse.into());
    check_nested(dag, fine, coarse)?;
    let keys = region_keys(dag, &[fine, coarse], samples)?;
    Ok(refinement_from_keys(&keys[0], &keys[1]))
}

/// [`check_refinement`] for many `(fine, coarse)` pairs, running the
/// network once per sample.
pub fn check_refinements<T: Scalar>(
    dag: &Dag<T>,
    pairs: &[(Probe, Probe)],
    samples: &[Vec<T>],
) -> Result<Vec<RefinementReport>> {
    let mut probes: Vec<Probe> = Vec::new();
    let slot = |p: Probe, probes: &mut Vec<Probe>| match probes.iter().position(|&q| q == p) {
        Some(i) => i,
        None => {
            probes.push(p);
            probes.len() - 1
        }
    };
    let mut index = Vec::with_capacity(pairs.len());
    for &(fine, coarse) in pairs {
        check_nested(dag, fine, coarse)?;
        index.push((slot(fine, &mut probes), slot(coarse, &mut probes)));
    }
    let keys = region_keys(dag, &probes, samples)?;
    Ok(index
        .into_iter()
        .map(|(f, c)| refinement_from_keys(&keys[f], &keys[c]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_on_hand_keys() {
        let samples = vec![vec![0.0], vec![3.0], vec![1.0], vec![10.0]];
        let s = stats_from_keys(&[1, 1, 1, 2], &samples, &StatsOptions::default());
        assert_eq!(s.region_count, 2);
        assert_eq!(s.max_points_per_region, 3);
        assert_eq!(s.multi_member_point_count, 3);
        assert_eq!(s.max_intra_region_distance, 3.0);
        let capped = stats_from_keys(&[1, 1, 1, 2], &samples, &StatsOptions { pair_cap: 1, seed: 3 });
        assert_eq!(capped.subsampled_regions, 1);
        assert!(capped.max_intra_region_distance <= 3.0);
    }

    #[test]
    fn refinement_detects_violation() {
        let ok = refinement_from_keys(&[1, 2, 3, 1], &[7, 7, 8, 7]);
        assert!(ok.holds());
        let bad = refinement_from_keys(&[1, 2, 1], &[7, 7, 8]);
        assert_eq!(bad.violations, 1);
        assert_eq!(bad.witness, Some((0, 2)));
    }
}
