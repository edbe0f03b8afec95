//! Baselines, evaluation, the experiment harness and the `dpmnl` command.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod metrics;
pub mod mle;
