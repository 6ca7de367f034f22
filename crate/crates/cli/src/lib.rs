//! Command-line harness for robust off-policy evaluation and learning:
//! environment selection, policy/matrix I/O, machine-readable run reports,
//! and the replication-experiment orchestration behind the `drobandit`
//! binary. Everything here is plain library code so integration tests and
//! external tools can drive the same flows without shelling out.

pub mod env_select;
pub mod harness;
pub mod policy_io;
pub mod report;

pub use env_select::EnvKind;
pub use harness::{
    agreement_rate, boundary_grid, coverage_study, regret_study, run_experiment, test_set_value,
    write_boundary_csv, CoverageReport, ExperimentSpec, RegretRow,
};
pub use report::{mean_std, Aggregate, ReplicationRecord, RunReport};
