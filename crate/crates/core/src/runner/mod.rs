//! Scenario configuration, batch execution and transcript replay.

mod config;
mod scenario;

pub use config::{parse_attack, Phase, ProtocolKind, ScenarioConfig};
pub use scenario::{
    run_scenario, PhaseSummary, RunReport, TrialSummary, ESTIMATES_FILE, SUMMARY_FILE,
    TRANSCRIPT_FILE,
};

pub use crate::replay::{replay, replay_transcript, ReplayVerdict};

use crate::error::ExamError;

/// Command-line exit status for a failed run: 3 for bad input, 4 when the
/// run ran out of qubits, resources or rounds, 1 otherwise.
pub fn error_exit_code(err: &ExamError) -> i32 {
    match err {
        ExamError::InvalidArgument(_) | ExamError::Config { .. } | ExamError::Parse { .. } => 3,
        ExamError::QubitBudget { .. }
        | ExamError::PoolExhausted { .. }
        | ExamError::InsufficientResources { .. }
        | ExamError::RoundCapExceeded { .. } => 4,
        ExamError::Internal(_) | ExamError::Io(_) => 1,
    }
}
