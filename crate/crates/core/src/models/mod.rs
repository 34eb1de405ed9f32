//! Networks: the DANN triad and the source-only CNN and TCN baselines.

pub mod checkpoint;
mod dann;
mod layers;
mod tcn;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use dann::{
    CnnParams, DannOutputs, DannParams, FeatureExtractor, FeatureExtractorConfig, MlpHead,
    DOMAIN_CLASSES, HEAD_HIDDEN,
};
pub use layers::{Conv1d, Linear};
pub use tcn::{TcnBlock, TcnConfig, TcnParams};

use crate::autodiff::{Parameter, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dann,
    Cnn,
    Tcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Cnn, ModelKind::Tcn, ModelKind::Dann];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dann => "dann",
            ModelKind::Cnn => "cnn",
            ModelKind::Tcn => "tcn",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Dann => "DANN",
            ModelKind::Cnn => "CNN",
            ModelKind::Tcn => "TCN",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dann" => Ok(ModelKind::Dann),
            "cnn" => Ok(ModelKind::Cnn),
            "tcn" => Ok(ModelKind::Tcn),
            other => Err(Error::Config(format!(
                "unknown model {other:?} (dann, cnn, tcn)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub feature: FeatureExtractorConfig,
    pub head_hidden: usize,
    pub tcn: TcnConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature: FeatureExtractorConfig::default(),
            head_hidden: HEAD_HIDDEN,
            tcn: TcnConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Dann(DannParams),
    Cnn(CnnParams),
    Tcn(TcnParams),
}

impl Network {
    pub fn init(kind: ModelKind, config: &ModelConfig, seed: u64) -> Result<Self> {
        Ok(match kind {
            ModelKind::Dann => {
                Network::Dann(DannParams::init(config.feature, config.head_hidden, seed)?)
            }
            ModelKind::Cnn => {
                Network::Cnn(CnnParams::init(config.feature, config.head_hidden, seed)?)
            }
            ModelKind::Tcn => Network::Tcn(TcnParams::init(config.tcn, seed)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Network::Dann(_) => ModelKind::Dann,
            Network::Cnn(_) => ModelKind::Cnn,
            Network::Tcn(_) => ModelKind::Tcn,
        }
    }

    /// Class logits `[b, 9]`; for DANN this is the label path only.
    pub fn class_logits(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Network::Dann(p) => {
                let f = p.feature_extract(tape, x)?;
                p.predict_label(tape, f)
            }
            Network::Cnn(p) => p.forward(tape, x),
            Network::Tcn(p) => p.forward(tape, x),
        }
    }

    /// Forward-only class logits for a `[b, 6, len]` input.
    pub fn predict(&self, inputs: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.constant(inputs.clone());
        let logits = self.class_logits(&mut tape, x)?;
        Ok(tape.value(logits).clone())
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        match self {
            Network::Dann(p) => p.parameters(),
            Network::Cnn(p) => p.parameters(),
            Network::Tcn(p) => p.parameters(),
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            Network::Dann(p) => p.parameters_mut(),
            Network::Cnn(p) => p.parameters_mut(),
            Network::Tcn(p) => p.parameters_mut(),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.numel()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.parameters_mut()
            .into_iter()
            .for_each(Parameter::zero_grad);
    }
}
