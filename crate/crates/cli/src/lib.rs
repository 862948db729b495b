//! Orchestration behind the `headpose` command: configuration, the train,
//! detect, pose and synth commands, report emission and exit codes.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod exit;
pub mod report;

pub use config::{Overrides, PipelineConfig};
