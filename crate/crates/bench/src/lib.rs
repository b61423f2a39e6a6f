//! Experiment harness for the almost-multisecant solvers: instance
//! generation, single runs with trace export, method sweeps reported as
//! iteration tables, and the shift-search timing benchmark.

pub mod bench_mu;
pub mod commands;
pub mod config;
pub mod error;
pub mod label;
pub mod report;
pub mod sweep;
pub mod trace;

pub use error::{BenchError, Result};
