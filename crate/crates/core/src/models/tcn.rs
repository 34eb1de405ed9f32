use serde::{Deserialize, Serialize};

use super::layers::{Conv1d, Linear};
use crate::autodiff::{ConvGeometry, Parameter, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::{stream, tag};
use crate::{NUM_CLASSES, NUM_FEATURES};

/// Temporal convolutional network: each level holds two causal convolutions
/// with dilation `2^level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TcnConfig {
    pub in_channels: usize,
    pub levels: usize,
    pub channels: usize,
    pub kernel: usize,
}

impl Default for TcnConfig {
    fn default() -> Self {
        Self {
            in_channels: NUM_FEATURES,
            levels: 4,
            channels: 32,
            kernel: 3,
        }
    }
}

impl TcnConfig {
    pub fn dilation(&self, level: usize) -> usize {
        1 << level
    }

    /// `1 + Σ_level 2·(kernel−1)·2^level`.
    pub fn receptive_field(&self) -> usize {
        1 + (0..self.levels)
            .map(|l| 2 * (self.kernel - 1) * self.dilation(l))
            .sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.channels == 0 || self.kernel == 0 {
            return Err(Error::Config(format!(
                "degenerate TCN configuration {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TcnBlock {
    pub conv1: Conv1d,
    pub conv2: Conv1d,
    pub residual: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TcnParams {
    pub config: TcnConfig,
    pub blocks: Vec<TcnBlock>,
    pub head: Linear,
}

impl TcnParams {
    pub fn init(config: TcnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(seed, &[tag("init"), tag("tcn")]);
        let mut blocks = Vec::with_capacity(config.levels);
        let mut width = config.in_channels;
        for level in 0..config.levels {
            let geom = ConvGeometry::causal(config.kernel, config.dilation(level));
            let name = format!("tcn.level{}", level + 1);
            let conv1 = Conv1d::init(
                &format!("{name}.conv1"),
                width,
                config.channels,
                config.kernel,
                geom,
                &mut rng,
            );
            let conv2 = Conv1d::init(
                &format!("{name}.conv2"),
                config.channels,
                config.channels,
                config.kernel,
                geom,
                &mut rng,
            );
            blocks.push(TcnBlock {
                conv1,
                conv2,
                residual: width == config.channels,
            });
            width = config.channels;
        }
        let head = Linear::init("tcn.head", config.channels, NUM_CLASSES, &mut rng);
        Ok(Self {
            config,
            blocks,
            head,
        })
    }

    /// Activations of the last level, `[b, channels, len]`, before pooling.
    pub fn temporal_features(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 3 || shape[1] != self.config.in_channels {
            return Err(Error::Shape {
                op: "tcn",
                lhs: shape,
                rhs: vec![0, self.config.in_channels, 0],
            });
        }
        let rf = self.config.receptive_field();
        if rf > shape[2] {
            return Err(Error::Config(format!(
                "TCN receptive field {rf} exceeds sequence length {}",
                shape[2]
            )));
        }
        let mut h = x;
        for block in &self.blocks {
            let a = block.conv1.forward(tape, h)?;
            let a = tape.relu(a);
            let a = block.conv2.forward(tape, a)?;
            let a = tape.relu(a);
            h = if block.residual { tape.add(a, h)? } else { a };
        }
        Ok(h)
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let h = self.temporal_features(tape, x)?;
        let pooled = tape.global_avg_pool(h)?;
        self.head.forward(tape, pooled)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut p: Vec<&Parameter> = self
            .blocks
            .iter()
            .flat_map(|b| b.conv1.parameters().into_iter().chain(b.conv2.parameters()))
            .collect();
        p.extend(self.head.parameters());
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p: Vec<&mut Parameter> = Vec::new();
        for b in &mut self.blocks {
            p.extend(b.conv1.parameters_mut());
            p.extend(b.conv2.parameters_mut());
        }
        p.extend(self.head.parameters_mut());
        p
    }
}
