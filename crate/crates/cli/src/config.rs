//! The JSON run configuration accepted by `--config`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use qst_classify::{ClassifierConfig, DatasetConfig, TrainConfig};
use qst_reconstruct::{CganConfig, CholeskyConfig, ImleConfig, Loss};

use crate::benchmark::BenchmarkConfig;
use crate::error::Result;
use crate::io::read_json;

/// Every section is optional; missing sections take their defaults and
/// unknown keys anywhere are rejected. `seed` and `cutoff` apply to every
/// command that uses them unless overridden on the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub cutoff: Option<usize>,
    pub dataset: Option<DatasetConfig>,
    pub classifier: Option<ClassifierConfig>,
    pub train: Option<TrainConfig>,
    pub imle: Option<ImleConfig>,
    /// Settings for every Cholesky fit; the loss comes from the method name.
    pub cholesky: Option<CholeskyConfig>,
    pub cgan: Option<CganConfig>,
    pub benchmark: Option<BenchmarkConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Applies the global command-line flags.
    pub fn with_overrides(mut self, seed: Option<u64>, cutoff: Option<usize>) -> Self {
        if seed.is_some() {
            self.seed = seed;
        }
        if cutoff.is_some() {
            self.cutoff = cutoff;
        }
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn dataset(&self) -> DatasetConfig {
        let mut cfg = self.dataset.clone().unwrap_or_default();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(cutoff) = self.cutoff {
            cfg.cutoff = cutoff;
        }
        cfg
    }

    pub fn train(&self) -> TrainConfig {
        let mut cfg = self.train.clone().unwrap_or_default();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg
    }

    pub fn imle(&self) -> ImleConfig {
        self.imle.unwrap_or_default()
    }

    pub fn cholesky(&self, loss: Loss) -> CholeskyConfig {
        let mut cfg = match self.cholesky {
            Some(c) => CholeskyConfig { loss, ..c },
            None => CholeskyConfig::new(loss),
        };
        cfg.seed = self.seed();
        cfg
    }

    pub fn cgan(&self) -> CganConfig {
        CganConfig { seed: self.seed(), ..self.cgan.unwrap_or_default() }
    }

    pub fn benchmark(&self) -> BenchmarkConfig {
        let mut cfg = self.benchmark.clone().unwrap_or_default();
        if let Some(cutoff) = self.cutoff {
            cfg.cutoff = cutoff;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 3}"#).is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 3}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"cgan": {"lambda_l1": 10, "lr": 1}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"dataset": {"per_class": 2, "colour": 1}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"benchmark": {"seeds": 2, "x": 0}}"#).is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 3, "cgan": {"lambda_l1": 10}}"#).unwrap();
        let cfg = cfg.with_overrides(Some(9), Some(12));
        assert_eq!(cfg.cgan().seed, 9);
        assert_eq!(cfg.cgan().lambda_l1, 10.0);
        assert_eq!(cfg.dataset().cutoff, 12);
        assert_eq!(cfg.cholesky(Loss::Kl).loss, Loss::Kl);
    }

    #[test]
    fn cholesky_defaults_follow_the_loss() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.cholesky(Loss::L1), CholeskyConfig { seed: 0, ..CholeskyConfig::new(Loss::L1) });
    }
}
