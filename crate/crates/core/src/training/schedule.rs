use serde::{Deserialize, Serialize};

/// Adaptation weight `2 / (1 + exp(−γ·p)) − 1` with training progress `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GammaSchedule {
    pub gamma: f64,
}

impl Default for GammaSchedule {
    fn default() -> Self {
        Self { gamma: 10.0 }
    }
}

impl GammaSchedule {
    pub fn at_progress(&self, p: f64) -> f64 {
        2.0 / (1.0 + (-self.gamma * p).exp()) - 1.0
    }

    /// Weight for `epoch` of `max_epoch`, `p = epoch / max_epoch`.
    pub fn at_epoch(&self, epoch: usize, max_epoch: usize) -> f64 {
        debug_assert!(max_epoch >= 1 && epoch <= max_epoch);
        self.at_progress(epoch as f64 / max_epoch as f64)
    }
}

/// The default (`γ = 10`) schedule, used as the gradient-reversal weight.
pub fn alpha(epoch: usize, max_epoch: usize) -> f64 {
    GammaSchedule::default().at_epoch(epoch, max_epoch)
}
