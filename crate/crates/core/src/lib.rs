//! Simulation and security analysis of a GHZ-based quantum exam.
//!
//! A teacher (Alice) hands a secret problem to `N` students (Bobs) and later
//! collects `N` independent secret solutions. Both directions use GHZ
//! correlations as one-time pads:
//!
//! * [`quantum`] is an exact state-vector engine for the shared states.
//! * [`protocol`] runs the sharing, absolute and direct protocols and writes
//!   a [`transcript::Transcript`].
//! * [`adversary`] plugs eavesdropping strategies into the quantum and
//!   classical channels.
//! * [`analysis`] estimates detection rates and information leakage.
//! * [`runner`] drives scenarios from a config file and replays transcripts.

pub mod adversary;
pub mod analysis;
pub mod bits;
pub mod error;
pub mod protocol;
pub mod quantum;
pub mod replay;
pub mod runner;
pub mod transcript;

pub use bits::BitString;
pub use error::{ExamError, Result};
pub use protocol::{ExamSession, ProtocolOutcome, ProtocolStatus};
pub use quantum::{Basis, ShiftMask, StateVector};
pub use transcript::{Party, Transcript, TranscriptEvent};
