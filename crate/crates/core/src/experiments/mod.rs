//! Experiment orchestration: configuration, the classical-versus-quantum
//! comparisons, the factorization check, convergence sweeps and their reports.

mod config;
mod report;
mod runs;

pub use config::{BasisSpec, ClassicalBranch, ExperimentConfig, InitialState, SolverSettings, SweepAxis};
pub use report::{loglog_slope, provenance, ComparisonReport, SnapshotMetrics, SweepTable};
pub use runs::{run_convergence_sweep, run_equivalence, run_theorem_check, snapshot_steps};
