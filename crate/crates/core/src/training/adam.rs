use serde::{Deserialize, Serialize};

use crate::autodiff::Parameter;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment buffers, one per parameter, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Parameter>) -> Self {
        let sizes: Vec<usize> = params.into_iter().map(Parameter::numel).collect();
        Self {
            config,
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn first_moment(&self, i: usize) -> &[f64] {
        &self.first[i]
    }

    pub fn second_moment(&self, i: usize) -> &[f64] {
        &self.second[i]
    }
}

/// Bias-corrected Adam update of every parameter from its `grad` buffer.
pub fn adam_step(params: &mut [&mut Parameter], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != state.first.len()
        || params
            .iter()
            .zip(&state.first)
            .any(|(p, m)| p.numel() != m.len())
    {
        return Err(Error::Contract(
            "Adam state does not match the parameter list".into(),
        ));
    }
    state.step += 1;
    let AdamConfig {
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for ((p, m), v) in params
        .iter_mut()
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        let grad = p.grad.data().to_vec();
        for (((w, g), m), v) in p.value.data_mut().iter_mut().zip(&grad).zip(m).zip(v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn param(values: &[f64], grads: &[f64]) -> Parameter {
        let mut p = Parameter::new(
            "p",
            Tensor::new(vec![values.len()], values.to_vec()).unwrap(),
        );
        p.grad = Tensor::new(vec![grads.len()], grads.to_vec()).unwrap();
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = param(&[0.3, -1.2], &[0.0, 0.0]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]);
        for _ in 0..3 {
            adam_step(&mut [&mut p], &mut st, 1e-3).unwrap();
        }
        assert_eq!(p.value.data(), &[0.3, -1.2]);
    }

    #[test]
    fn first_step_closed_form() {
        // m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + ε).
        let lr = 1e-3;
        let g = [0.5, -2.0, 1e-6];
        let mut p = param(&[0.0; 3], &g);
        let mut st = AdamState::new(AdamConfig::default(), [&p]);
        adam_step(&mut [&mut p], &mut st, lr).unwrap();
        for (w, g) in p.value.data().iter().zip(g) {
            let want = -lr * g / (g.abs() + 1e-8);
            assert!((w - want).abs() <= 1e-15, "{w} vs {want}");
        }
        assert_eq!(st.step, 1);
    }

    #[test]
    fn identical_gradients_evolve_identically() {
        let mut p = param(&[1.0, 1.0], &[0.2, 0.2]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]);
        for k in 0..10 {
            p.grad = Tensor::full(&[2], 0.1 * k as f64 - 0.3);
            adam_step(&mut [&mut p], &mut st, 1e-2).unwrap();
            assert_eq!(p.value.data()[0], p.value.data()[1]);
        }
    }

    #[test]
    fn rejects_mismatched_state() {
        let mut a = param(&[1.0], &[0.1]);
        let b = param(&[1.0, 2.0], &[0.1, 0.1]);
        let mut st = AdamState::new(AdamConfig::default(), [&b]);
        assert!(adam_step(&mut [&mut a], &mut st, 1e-3).is_err());
    }
}
