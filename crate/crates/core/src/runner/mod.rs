//! Experiment orchestration: configuration, the end-to-end pipeline, run
//! manifests, and canned reproduction recipes.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod reproduce;

pub use config::{ExperimentConfig, StateEntry};
pub use manifest::RunManifest;
pub use pipeline::{analyze_frames_dir, run_experiment, Session};
