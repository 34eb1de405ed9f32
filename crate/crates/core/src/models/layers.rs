use rand::Rng as _;

use crate::autodiff::{ConvGeometry, Parameter, Tape, Tensor, Var};
use crate::error::Result;
use crate::rng::Rng;

/// Uniform in `±sqrt(1/fan_in)`.
pub(crate) fn fan_in_uniform(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    let bound = (1.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.random_range(-bound..bound))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Linear {
    pub fn init(name: &str, inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        Self {
            weight: Parameter::new(
                format!("{name}.weight"),
                fan_in_uniform(&[outputs, inputs], inputs, rng),
            ),
            bias: Parameter::new(
                format!("{name}.bias"),
                fan_in_uniform(&[outputs], inputs, rng),
            ),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(&self.weight);
        let b = tape.param(&self.bias);
        tape.linear(x, w, b)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub weight: Parameter,
    pub bias: Parameter,
    pub geometry: ConvGeometry,
}

impl Conv1d {
    pub fn init(
        name: &str,
        c_in: usize,
        c_out: usize,
        ksize: usize,
        geometry: ConvGeometry,
        rng: &mut Rng,
    ) -> Self {
        let fan_in = c_in * ksize;
        Self {
            weight: Parameter::new(
                format!("{name}.weight"),
                fan_in_uniform(&[c_out, c_in, ksize], fan_in, rng),
            ),
            bias: Parameter::new(
                format!("{name}.bias"),
                fan_in_uniform(&[c_out], fan_in, rng),
            ),
            geometry,
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(&self.weight);
        let b = tape.param(&self.bias);
        tape.conv1d_with(x, w, Some(b), self.geometry)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}
