use unrectify::graph::modules::{random_fusion_stack, FusionStack};
use unrectify::graph::random::{gaussian_samples, rng};
use unrectify::stability::{certify, empirical_gain, rescale_with_report, GainCurve, LevelScale, StabilityReport};
use unrectify::Dag;

use super::sample_seed;
use crate::output::{target, write_csv, GAIN_HEADER, LEVEL_SUM_HEADER};
use crate::{Experiment, ExperimentConfig, Result};

pub const LEVEL_SUMS_CSV: &str = "stability_level_sums.csv";
pub const GAIN_CSV: &str = "stability_gain.csv";
pub const LEVEL_SUMS_RESCALED_CSV: &str = "stability_level_sums_rescaled.csv";
pub const GAIN_RESCALED_CSV: &str = "stability_gain_rescaled.csv";

#[derive(Clone, Debug)]
pub struct GainRun {
    pub dag: Dag,
    pub report: StabilityReport,
    pub curve: GainCurve,
}

#[derive(Clone, Debug)]
pub struct StabilityRun {
    pub stack: FusionStack<f64>,
    pub unscaled: GainRun,
    pub rescaled: GainRun,
    pub scales: Vec<LevelScale>,
}

fn gain_run(dag: Dag, samples: &[Vec<f64>], cfg: &ExperimentConfig) -> Result<GainRun> {
    let report = certify(&dag)?;
    let budget = usize::try_from(cfg.pair_budget).unwrap_or(usize::MAX);
    let curve = empirical_gain(&dag, samples, budget, cfg.seed)?;
    Ok(GainRun { dag, report, curve })
}

fn write_run(cfg: &ExperimentConfig, run: &GainRun, sums_name: &str, gain_name: &str) -> Result<()> {
    let Some(dir) = &cfg.output_dir else {
        return Ok(());
    };
    let sums: Vec<Vec<String>> = run
        .report
        .level_sums
        .iter()
        .map(|s| {
            vec![
                s.level.to_string(),
                s.sum.to_string(),
                s.frob_sum.to_string(),
                run.report.certified_c[s.level].to_string(),
            ]
        })
        .collect();
    write_csv(&target(dir, sums_name)?, &LEVEL_SUM_HEADER, &sums)?;
    let gains: Vec<Vec<String>> = run
        .curve
        .points
        .iter()
        .map(|p| vec![p.level.to_string(), p.max_gain.to_string()])
        .collect();
    write_csv(&target(dir, gain_name)?, &GAIN_HEADER, &gains)
}

/// Gain of a random fusion stack before and after rescaling every level sum
/// to at most 1.
pub fn run_stability_gain(cfg: &ExperimentConfig) -> Result<StabilityRun> {
    cfg.expect(Experiment::StabilityGain)?;
    cfg.require(cfg.dims > 0 && cfg.layer_count > 0, "dims and layer_count must be positive")?;
    cfg.require(cfg.sample_count >= 2, "sample_count must be at least 2")?;
    let stack = random_fusion_stack::<f64>(cfg.dims, cfg.layer_count, cfg.seed)?;
    let samples = gaussian_samples(&mut rng(sample_seed(cfg)), cfg.sample_count, cfg.dims);
    let unscaled = gain_run(stack.dag.clone(), &samples, cfg)?;
    let outcome = rescale_with_report(&stack.dag, false)?;
    let rescaled = gain_run(outcome.dag, &samples, cfg)?;
    write_run(cfg, &unscaled, LEVEL_SUMS_CSV, GAIN_CSV)?;
    write_run(cfg, &rescaled, LEVEL_SUMS_RESCALED_CSV, GAIN_RESCALED_CSV)?;
    Ok(StabilityRun {
        stack,
        unscaled,
        rescaled,
        scales: outcome.scaled,
    })
}
