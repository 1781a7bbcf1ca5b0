//! Command-line front end for the fixtures: run configuration, single runs
//! with optional probes, concurrent sweeps, and report emission.

pub mod report;
pub mod run;
pub mod spec;
pub mod sweep;

pub use report::{validate_report, REPORT_SCHEMA};
pub use run::{execute, run, write_artifacts, RunOutcome};
pub use spec::{parse_config, read_config, Probe, ProbeSettings, RunSpec, StartSpec};
pub use sweep::{expand, sweep, SweepOutcome, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("invalid run spec: {0}")]
    Spec(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("solver error: {0}")]
    Solve(String),
    #[error("i/o error: {0}")]
    Io(String),
}
