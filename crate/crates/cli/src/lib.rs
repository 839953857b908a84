//! Experiment harness around `annr-core`: configuration-driven runs of the
//! active regressor and its baselines, comparison tables, and plot-data
//! exports.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod export;
pub mod oracle_check;
