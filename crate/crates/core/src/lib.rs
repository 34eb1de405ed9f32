//! Domain-adversarial fault diagnosis trained on digital-twin data.
//!
//! * [`autodiff`]: tape-based reverse-mode differentiation, including the
//!   gradient-reversal operator.
//! * [`models`]: the DANN feature extractor and heads, CNN and TCN baselines,
//!   checkpoint I/O.
//! * [`training`]: Adam, the adaptation-weight schedule and the adversarial
//!   training loop.
//! * [`data`]: the robot digital twin, corpus generation, splitting,
//!   standardisation, batching and file formats.
//! * [`metrics`]: confusion matrices, per-class scores and multi-run
//!   aggregation.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod training;

pub use error::{Error, ErrorCategory, Result};

/// Number of fault classes (one healthy state plus four motors × two modes).
pub const NUM_CLASSES: usize = 9;
/// Feature columns per time step: desired xyz then residual xyz.
pub const NUM_FEATURES: usize = 6;
