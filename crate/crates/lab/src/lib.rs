//! Experiment harness for the exterior Monge-Ampère toolkit: named
//! experiments with pass/fail criteria, suites, and persisted reports.

pub mod error;
pub mod experiments;
pub mod oracle;
pub mod report;
pub mod spec;
pub mod suite;

pub use error::{LabError, Result};
pub use experiments::run_experiment;
pub use oracle::run_oracle;
pub use report::{Criterion, RunReport, SuiteReport};
pub use spec::{ExperimentId, ExperimentSpec, SuiteConfig, Thresholds};
pub use suite::run_suite;
