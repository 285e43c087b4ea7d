//! Configuration-driven experiment runner for `qgate-core`.
//!
//! An experiment is a TOML document with `[problem]`, `[target]`, `[solver]`
//! and `[output]` sections. Runs emit per-iteration CSV logs, a JSON summary
//! and optional pulse spectra; norm sweeps emit one aggregate CSV.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod matrix_io;
pub mod output;
pub mod spectrum;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiment::{campaign_norm_sweep, run_experiment, RunOptions};
pub use spectrum::{pulse_spectrum, SpectrumTable};
