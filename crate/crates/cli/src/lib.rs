//! Experiment harness around `rbcast-core`: channel specs and JSON configs,
//! presets, schedule sweeps with CSV/JSON output, and the `rbcast` CLI.

pub mod analyze;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod presets;
pub mod selftest;
pub mod simulate;
