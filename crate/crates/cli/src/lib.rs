//! Command-line front end: corpus generation, single-model training and
//! evaluation, the multi-seed benchmark and the target-only ablation.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod report;

use twindann::ErrorCategory;

pub fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Runtime => 4,
    }
}
