//! Scenario-driven experiments on top of `wfqh-core`: the classical suite, the quantum validation
//! suite, wave front indicators, the κ-invariance check and the quantum/classical correspondence run.

pub mod classical;
pub mod egorov;
pub mod quantum;
pub mod report;
pub mod scenario;
pub mod theorem;
pub mod wf;

pub use classical::run_classical_suite;
pub use egorov::run_egorov;
pub use quantum::run_quantum_suite;
pub use report::{emit_report, Check, ReportFormat, SuiteReport, Table};
pub use scenario::Scenario;
pub use theorem::{run_theorem_experiment, theorem_report, TheoremRun, TheoremVerdict};
pub use wf::run_wf_suite;

use thiserror::Error;
use wfqh_core::classical::ClassicalError;
use wfqh_core::microlocal::MicrolocalError;
use wfqh_core::model::ModelError;
use wfqh_core::quantum::QuantumError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Microlocal(#[from] MicrolocalError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit status: 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}
