//! Central-difference oracle for tape gradients.

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Relative error with the `max(|a|, |b|, 1e-8)` denominator.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares the tape gradient of `graph(input)` against central differences
/// over every element of `input`; returns the largest relative error.
///
/// `graph` receives a fresh tape and the recorded input and must return a
/// scalar node.
pub fn finite_diff_check<F>(graph: F, input: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let all: Vec<usize> = (0..input.len()).collect();
    finite_diff_check_at(graph, input, eps, &all)
}

/// As [`finite_diff_check`], restricted to the flat indices in `probes`.
pub fn finite_diff_check_at<F>(graph: F, input: &Tensor, eps: f64, probes: &[usize]) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::Contract(format!(
            "finite-difference step {eps} outside (0, 1e-2]"
        )));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(input.clone(), true);
    let root = graph(&mut tape, x)?;
    let grads = tape.backward(root)?;
    let analytic = grads
        .get(x)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(input.shape()));

    let eval = |t: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(t, true);
        let root = graph(&mut tape, x)?;
        Ok(tape.value(root).item())
    };

    let mut worst: f64 = 0.0;
    for &i in probes {
        let mut plus = input.clone();
        plus.data_mut()[i] += eps;
        let mut minus = input.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}
