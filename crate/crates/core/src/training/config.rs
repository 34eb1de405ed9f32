use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamConfig, GammaSchedule};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Label loss on source plus reversed domain loss on source ∪ target.
    Dann,
    /// Label loss on source only.
    SourceOnly,
}

/// Settings for one experiment run.
///
/// Loaded from TOML, e.g.
///
/// ```toml
/// learning_rate = 0.001
/// batch_size = 32           # dann mode: 16 source + 16 target per step
/// epochs = 250
/// seeds = [0, 1, 2, 3, 4]
/// mode = "dann"             # or "source_only"
/// domain_loss_weight = 1.0  # 0 drops the domain loss from the objective
///
/// [adam]
/// beta1 = 0.9
/// beta2 = 0.999
/// epsilon = 1e-8
///
/// [lambda_schedule]
/// gamma = 10.0
/// ```
///
/// Every key is optional and defaults to the values above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seeds: Vec<u64>,
    pub lambda_schedule: GammaSchedule,
    pub mode: TrainMode,
    pub domain_loss_weight: f64,
    /// Batch size used for forward-only evaluation.
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 250,
            adam: AdamConfig::default(),
            seeds: vec![0, 1, 2, 3, 4],
            lambda_schedule: GammaSchedule::default(),
            mode: TrainMode::Dann,
            domain_loss_weight: 1.0,
            eval_batch_size: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be ≥ 1".into());
        }
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return bad("batch sizes must be ≥ 1".into());
        }
        if self.mode == TrainMode::Dann && (self.batch_size < 2 || self.batch_size % 2 != 0) {
            return bad(format!(
                "dann mode splits batches into source/target halves; batch size {} must be even and ≥ 2",
                self.batch_size
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        if !(self.domain_loss_weight >= 0.0) {
            return bad("domain loss weight must be ≥ 0".into());
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
