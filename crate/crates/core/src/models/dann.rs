use serde::{Deserialize, Serialize};

use super::layers::{Conv1d, Linear};
use crate::autodiff::{ConvGeometry, Parameter, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::{stream, tag};
use crate::{NUM_CLASSES, NUM_FEATURES};

/// Convolutional backbone: `conv_layers × (conv → relu)` then mean over time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureExtractorConfig {
    pub in_channels: usize,
    pub conv_layers: usize,
    pub filters: usize,
    pub kernel: usize,
    pub padding: usize,
}

impl Default for FeatureExtractorConfig {
    fn default() -> Self {
        Self {
            in_channels: NUM_FEATURES,
            conv_layers: 2,
            filters: 64,
            kernel: 3,
            padding: 1,
        }
    }
}

impl FeatureExtractorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel % 2 == 0 || self.filters == 0 || self.conv_layers == 0 {
            return Err(Error::Config(format!(
                "feature extractor needs an odd kernel and ≥ 1 layer/filter, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.filters
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureExtractor {
    pub config: FeatureExtractorConfig,
    pub convs: Vec<Conv1d>,
}

impl FeatureExtractor {
    pub fn init(config: FeatureExtractorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(seed, &[tag("init"), tag("feature")]);
        let geom = ConvGeometry::symmetric(1, config.padding, 1);
        let convs = (0..config.conv_layers)
            .map(|i| {
                let c_in = if i == 0 {
                    config.in_channels
                } else {
                    config.filters
                };
                Conv1d::init(
                    &format!("feature.conv{}", i + 1),
                    c_in,
                    config.filters,
                    config.kernel,
                    geom,
                    &mut rng,
                )
            })
            .collect();
        Ok(Self { config, convs })
    }

    /// `[b, in_channels, len] → [b, filters]`.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 3 || shape[1] != self.config.in_channels {
            return Err(Error::Shape {
                op: "feature_extract",
                lhs: shape,
                rhs: vec![0, self.config.in_channels, 0],
            });
        }
        let mut h = x;
        for conv in &self.convs {
            h = conv.forward(tape, h)?;
            h = tape.relu(h);
        }
        tape.global_avg_pool(h)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        self.convs.iter().flat_map(Conv1d::parameters).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.convs
            .iter_mut()
            .flat_map(Conv1d::parameters_mut)
            .collect()
    }
}

/// One-hidden-layer MLP head.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpHead {
    pub hidden: Linear,
    pub output: Linear,
}

impl MlpHead {
    pub fn init(name: &str, inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = stream(seed, &[tag("init"), tag(name)]);
        Self {
            hidden: Linear::init(&format!("{name}.fc1"), inputs, hidden, &mut rng),
            output: Linear::init(&format!("{name}.fc2"), hidden, outputs, &mut rng),
        }
    }

    pub fn in_features(&self) -> usize {
        self.hidden.weight.value.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.output.weight.value.shape()[0]
    }

    pub fn forward(&self, tape: &mut Tape, f: Var) -> Result<Var> {
        let shape = tape.value(f).shape();
        if shape.len() != 2 || shape[1] != self.in_features() {
            return Err(Error::Shape {
                op: "head",
                lhs: shape.to_vec(),
                rhs: vec![0, self.in_features()],
            });
        }
        let h = self.hidden.forward(tape, f)?;
        let h = tape.relu(h);
        self.output.forward(tape, h)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut p = self.hidden.parameters();
        p.extend(self.output.parameters());
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.hidden.parameters_mut();
        p.extend(self.output.parameters_mut());
        p
    }
}

pub const HEAD_HIDDEN: usize = 128;
pub const DOMAIN_CLASSES: usize = 2;

/// Feature extractor, label predictor and domain classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct DannParams {
    pub feature: FeatureExtractor,
    pub label_head: MlpHead,
    pub domain_head: MlpHead,
}

/// Outputs of one shared-backbone forward pass.
pub struct DannOutputs {
    pub features: Var,
    pub class_logits: Var,
    pub domain_logits: Var,
}

impl DannParams {
    pub fn init(config: FeatureExtractorConfig, hidden: usize, seed: u64) -> Result<Self> {
        let feature = FeatureExtractor::init(config, seed)?;
        let d = config.feature_dim();
        Ok(Self {
            feature,
            label_head: MlpHead::init("label_head", d, hidden, NUM_CLASSES, seed),
            domain_head: MlpHead::init("domain_head", d, hidden, DOMAIN_CLASSES, seed),
        })
    }

    pub fn feature_extract(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        self.feature.forward(tape, x)
    }

    pub fn predict_label(&self, tape: &mut Tape, f: Var) -> Result<Var> {
        self.label_head.forward(tape, f)
    }

    /// Domain logits through the gradient-reversal node.
    pub fn predict_domain(&self, tape: &mut Tape, f: Var, lambda: f64) -> Result<Var> {
        let reversed = tape.grad_reverse(f, lambda)?;
        self.domain_head.forward(tape, reversed)
    }

    /// One backbone pass feeding both heads.
    pub fn forward(&self, tape: &mut Tape, x: Var, lambda: f64) -> Result<DannOutputs> {
        let features = self.feature_extract(tape, x)?;
        let class_logits = self.predict_label(tape, features)?;
        let domain_logits = self.predict_domain(tape, features, lambda)?;
        Ok(DannOutputs {
            features,
            class_logits,
            domain_logits,
        })
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut p = self.feature.parameters();
        p.extend(self.label_head.parameters());
        p.extend(self.domain_head.parameters());
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.feature.parameters_mut();
        p.extend(self.label_head.parameters_mut());
        p.extend(self.domain_head.parameters_mut());
        p
    }
}

/// Source-only baseline: the DANN backbone and label head, no domain head.
/// Initialised from the same streams, so equal seeds give equal weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnParams {
    pub feature: FeatureExtractor,
    pub label_head: MlpHead,
}

impl CnnParams {
    pub fn init(config: FeatureExtractorConfig, hidden: usize, seed: u64) -> Result<Self> {
        let feature = FeatureExtractor::init(config, seed)?;
        let d = config.feature_dim();
        Ok(Self {
            feature,
            label_head: MlpHead::init("label_head", d, hidden, NUM_CLASSES, seed),
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let f = self.feature.forward(tape, x)?;
        self.label_head.forward(tape, f)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut p = self.feature.parameters();
        p.extend(self.label_head.parameters());
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.feature.parameters_mut();
        p.extend(self.label_head.parameters_mut());
        p
    }
}
