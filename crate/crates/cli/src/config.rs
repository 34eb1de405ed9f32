//! Experiment configuration: one TOML file with `[train]`, `[model]`,
//! `[twin]` and `[corpus]` tables, every key optional.
//!
//! ```toml
//! [train]
//! epochs = 100
//! seeds = [0, 1, 2]
//!
//! [twin]
//! seq_len = 200
//!
//! [twin.gap]
//! noise_std = 0.002
//!
//! [corpus]
//! source_trajectories = 100
//! target_trajectories = 90
//! data_seed = 0
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use twindann::data::{GapConfig, TwinConfig};
use twindann::models::ModelConfig;
use twindann::training::TrainConfig;
use twindann::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub source_trajectories: usize,
    pub target_trajectories: usize,
    /// Root seed of the synthetic corpus, independent of the run seeds.
    pub data_seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            source_trajectories: 400,
            target_trajectories: 90,
            data_seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub twin: TwinConfig,
    pub corpus: CorpusSpec,
}

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub epochs: Option<usize>,
    pub source_traj: Option<usize>,
    pub target_traj: Option<usize>,
    pub gap_gain: Option<f64>,
    pub gap_noise: Option<f64>,
    pub gap_lag: Option<f64>,
    pub seq_len: Option<usize>,
    pub data_seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = &o.seeds {
            self.train.seeds = s.clone();
        }
        if let Some(e) = o.epochs {
            self.train.epochs = e;
        }
        if let Some(n) = o.source_traj {
            self.corpus.source_trajectories = n;
        }
        if let Some(n) = o.target_traj {
            self.corpus.target_trajectories = n;
        }
        if let Some(g) = o.gap_gain {
            self.twin.gap.gain_offsets = GapConfig::alternating_gains(g);
        }
        if let Some(n) = o.gap_noise {
            self.twin.gap.noise_std = n;
        }
        if let Some(t) = o.gap_lag {
            self.twin.gap.lag_time_constant = t;
        }
        if let Some(l) = o.seq_len {
            self.twin.seq_len = l;
        }
        if let Some(s) = o.data_seed {
            self.corpus.data_seed = s;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.twin.validate()?;
        self.model.feature.validate()?;
        self.model.tcn.validate()
    }

    /// SHA-256 over the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
