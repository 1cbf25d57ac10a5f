use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::random::rng;
use crate::graph::{Dag, NodeId, Workspace};
use crate::scalar::Scalar;
use crate::stability::StabilityReport;

/// Input pairs closer than this are skipped.
pub const MIN_PAIR_DISTANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GainPoint {
    pub level: usize,
    /// `max ‖𝒩_n(x) − 𝒩_n(y)‖ / ‖x − y‖` over the evaluated pairs.
    pub max_gain: f64,
    /// Sample indices attaining the maximum.
    pub witness: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GainCurve {
    /// Levels `0..=L`.
    pub points: Vec<GainPoint>,
    pub pairs_used: usize,
}

impl GainCurve {
    pub fn gains(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.max_gain).collect()
    }
}

// Values at every level, stacked in node-id order, for one input.
fn level_values<T: Scalar>(dag: &Dag<T>, by_level: &[Vec<NodeId>], samples: &[Vec<T>]) -> Result<Vec<Vec<Vec<f64>>>> {
    samples
        .par_iter()
        .map_init(
            || (dag.new_trace(), Workspace::default()),
            |(trace, ws), x| {
                dag.check_input(x)?;
                dag.forward_into(x, trace, ws, |_, _, _| {});
                Ok(by_level
                    .iter()
                    .map(|nodes| {
                        nodes
                            .iter()
                            .flat_map(|&v| trace.value(v).iter().map(|t| t.as_f64()))
                            .collect()
                    })
                    .collect())
            },
        )
        .collect()
}

fn choose_pairs(n: usize, budget: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    if total <= budget {
        let mut pairs = Vec::with_capacity(total);
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((i, j));
            }
        }
        return pairs;
    }
    let mut r = rng(seed);
    (0..budget)
        .map(|_| {
            let i = r.random_range(0..n);
            let mut j = r.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i.min(j), i.max(j))
        })
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Empirical gain of every level map over sample pairs. All pairs are used
/// when there are at most `pair_budget` of them; otherwise `pair_budget`
/// pairs are drawn with the given seed.
pub fn empirical_gain<T: Scalar>(dag: &Dag<T>, samples: &[Vec<T>], pair_budget: usize, seed: u64) -> Result<GainCurve> {
    let by_level: Vec<Vec<NodeId>> = (0..=dag.max_level()).map(|n| dag.nodes_at_level(n)).collect();
    let values = level_values(dag, &by_level, samples)?;
    let pairs: Vec<(usize, usize)> = choose_pairs(samples.len(), pair_budget.max(1), seed)
        .into_iter()
        .filter(|&(i, j)| dist(&values[i][0], &values[j][0]) >= MIN_PAIR_DISTANCE)
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "empirical gain needs at least two distinct samples".into(),
        ));
    }
    let levels = by_level.len();
    // (gain, pair index) per level; ties go to the earlier pair.
    let better = |a: (f64, usize), b: (f64, usize)| {
        if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };
    let best = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let d0 = dist(&values[i][0], &values[j][0]);
            (0..levels)
                .map(|n| (dist(&values[i][n], &values[j][n]) / d0, k))
                .collect::<Vec<_>>()
        })
        .reduce(
            || vec![(f64::NEG_INFINITY, usize::MAX); levels],
            |a, b| a.into_iter().zip(b).map(|(x, y)| better(x, y)).collect(),
        );
    Ok(GainCurve {
        points: best
            .into_iter()
            .enumerate()
            .map(|(level, (max_gain, k))| GainPoint {
                level,
                max_gain,
                witness: pairs[k],
            })
            .collect(),
        pairs_used: pairs.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoundnessViolation {
    pub level: usize,
    pub witness: (usize, usize),
    pub gain: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoundnessReport {
    pub pairs_used: usize,
    /// Largest `g(n) − max_{k≤n} C(k)` over levels; negative when sound.
    pub worst_excess: f64,
    pub violations: Vec<SoundnessViolation>,
}

impl SoundnessReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares the empirical gain with the certified bound at every level.
pub fn soundness_check<T: Scalar>(
    dag: &Dag<T>,
    report: &StabilityReport,
    samples: &[Vec<T>],
    pair_budget: usize,
    seed: u64,
    tolerance: f64,
) -> Result<SoundnessReport> {
    let curve = empirical_gain(dag, samples, pair_budget, seed)?;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for p in &curve.points {
        let bound = report.bound_at(p.level);
        worst_excess = worst_excess.max(p.max_gain - bound);
        if p.max_gain > bound + tolerance {
            violations.push(SoundnessViolation {
                level: p.level,
                witness: p.witness,
                gain: p.max_gain,
                bound,
            });
        }
    }
    Ok(SoundnessReport {
        pairs_used: curve.pairs_used,
        worst_excess,
        violations,
    })
}
