//! Benchmark harness: seeded sweeps, shared-resource tuning, statistics
//! and report generation for the quantum-walk and randomized solvers.

pub mod config;
pub mod error;
pub mod fixed;
pub mod ingest;
pub mod report;
pub mod scatter;
pub mod stats;
pub mod sweep;

pub use config::{Method, SweepConfig, SweepMode};
pub use error::{BenchError, Result};
pub use fixed::{fixed_cell, fixed_steps_table, FixedRow};
pub use sweep::{run_sweep, CellSummary, InstanceRecord};
