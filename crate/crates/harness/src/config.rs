use std::path::PathBuf;

use unrectify::partition::DEFAULT_PAIR_CAP;

use crate::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    FusionStack,
    LenetPartition,
    StabilityGain,
    Regions2d,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::FusionStack => "fusion_stack",
            Experiment::LenetPartition => "lenet_partition",
            Experiment::StabilityGain => "stability_gain",
            Experiment::Regions2d => "regions_2d",
        }
    }
}

/// Parameters of one experiment run. The constructors give the desk-scale
/// defaults; every field may be overridden.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dims: usize,
    pub layer_count: usize,
    pub sample_count: usize,
    /// Seeds the network weights; samples use `seed + 1`.
    pub seed: u64,
    /// Pair budget: gain pairs for `stability_gain`, pairs per region for
    /// the partition statistics.
    pub pair_budget: u64,
    pub grid_n: usize,
    /// CSV files go here; `None` writes nothing.
    pub output_dir: Option<PathBuf>,
    /// Directory holding `train-images-idx3-ubyte` and `train-labels-idx1-ubyte`.
    pub mnist_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    fn base(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            dims: 14,
            layer_count: 5,
            sample_count: 5000,
            seed: 0,
            pair_budget: DEFAULT_PAIR_CAP,
            grid_n: 2001,
            output_dir: None,
            mnist_dir: None,
        }
    }

    pub fn fusion_stack() -> Self {
        Self::base(Experiment::FusionStack)
    }

    pub fn stability_gain() -> Self {
        ExperimentConfig {
            dims: 20,
            sample_count: 2000,
            // every pair of 2,000 samples
            pair_budget: 2000 * 1999 / 2,
            ..Self::base(Experiment::StabilityGain)
        }
    }

    pub fn lenet_partition() -> Self {
        ExperimentConfig {
            dims: 28 * 28,
            layer_count: 8,
            sample_count: 500,
            ..Self::base(Experiment::LenetPartition)
        }
    }

    pub fn regions_2d() -> Self {
        ExperimentConfig {
            dims: 2,
            layer_count: 1,
            ..Self::base(Experiment::Regions2d)
        }
    }

    pub fn for_experiment(experiment: Experiment) -> Self {
        match experiment {
            Experiment::FusionStack => Self::fusion_stack(),
            Experiment::LenetPartition => Self::lenet_partition(),
            Experiment::StabilityGain => Self::stability_gain(),
            Experiment::Regions2d => Self::regions_2d(),
        }
    }

    pub(crate) fn expect(&self, experiment: Experiment) -> Result<()> {
        if self.experiment != experiment {
            return Err(HarnessError::Config(format!(
                "configuration is for {}, not {}",
                self.experiment.name(),
                experiment.name()
            )));
        }
        Ok(())
    }

    pub(crate) fn require(&self, ok: bool, what: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(format!("{}: {what}", self.experiment.name())))
        }
    }
}
