//! Party choreography for the six sub-protocols of the exam.
//!
//! An [`ExamSession`] owns one run: its random source, the authenticated
//! classical channel, the transcript and the eavesdropper. Phases are driven
//! by calling the session methods in order; they all append to the same
//! transcript.

pub mod channel;
mod direct;
mod exchange;
pub mod resource;
mod sharing;

use std::collections::BTreeMap;
use std::ops::Range;

use rand::Rng;
use serde::Serialize;

use crate::adversary::{Adversary, AttackConfig, EveKnowledge};
use crate::bits::BitString;
use crate::error::{ExamError, Result};
use crate::quantum::{Basis, MAX_QUBITS};
use crate::transcript::{AbortCause, EventBody, Party, Transcript};

use channel::ClassicalChannel;
use resource::{EntangledResource, ResourceKind};

pub use direct::DirectConfig;
pub use sharing::SharingConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProtocolStatus {
    Completed,
    AbortedEveDetected {
        cause: AbortCause,
    },
    /// The check error rate exceeded the threshold; Alice asked for a restart
    /// and the pool was discarded.
    Restarted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ProtocolStats {
    pub rounds: usize,
    pub control_rounds: usize,
    pub message_rounds: usize,
    pub checks_passed: usize,
    pub checks_failed: usize,
    pub restarts: usize,
}

impl ProtocolStats {
    pub fn error_rate(&self) -> f64 {
        let checked = self.checks_passed + self.checks_failed;
        if checked == 0 {
            0.0
        } else {
            self.checks_failed as f64 / checked as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolOutcome {
    pub status: ProtocolStatus,
    /// Each Bob's decoded copy of the problem, keyed by Bob number.
    pub problem_copies: BTreeMap<usize, BitString>,
    /// Alice's decoded solutions, keyed by Bob number.
    pub solutions: BTreeMap<usize, BitString>,
    pub stats: ProtocolStats,
    /// Slice of the session transcript written by this phase.
    #[serde(skip)]
    pub events: Range<usize>,
}

impl ProtocolOutcome {
    fn new(start: usize) -> Self {
        ProtocolOutcome {
            status: ProtocolStatus::Completed,
            problem_copies: BTreeMap::new(),
            solutions: BTreeMap::new(),
            stats: ProtocolStats::default(),
            events: start..start,
        }
    }

    pub fn is_completed(&self) -> bool {
        self.status == ProtocolStatus::Completed
    }

    pub fn eve_detected(&self) -> bool {
        matches!(self.status, ProtocolStatus::AbortedEveDetected { .. })
    }
}

/// One protocol run between Alice, `students` Bobs and (possibly) Eve.
pub struct ExamSession<R: Rng> {
    students: usize,
    rng: R,
    transcript: Transcript,
    channel: ClassicalChannel,
    adversary: Adversary,
}

impl<R: Rng> ExamSession<R> {
    pub fn new(students: usize, attack: AttackConfig, mut rng: R) -> Result<Self> {
        if students == 0 {
            return Err(ExamError::invalid("at least one student is required"));
        }
        let needed = students + 1 + attack.extra_qubits(students);
        if needed > MAX_QUBITS {
            return Err(ExamError::QubitBudget {
                requested: needed,
                cap: MAX_QUBITS,
            });
        }
        let adversary = Adversary::new(attack, students)?;
        let channel = ClassicalChannel::register(students, &mut rng);
        Ok(ExamSession {
            students,
            rng,
            transcript: Transcript::new(),
            channel,
            adversary,
        })
    }

    pub fn students(&self) -> usize {
        self.students
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_parts(self) -> (Transcript, EveKnowledge) {
        (self.transcript, self.adversary.into_knowledge())
    }

    pub fn eve(&self) -> &EveKnowledge {
        self.adversary.knowledge()
    }

    pub fn rng(&mut self) -> &mut R {
        &mut self.rng
    }

    /// Writes a phase-boundary marker (also used for the exam period T).
    pub fn mark_phase(&mut self, phase: &str) {
        self.transcript.record(
            0,
            Party::Alice,
            EventBody::PhaseBoundary {
                phase: phase.to_string(),
            },
        );
    }

    fn bobs(&self) -> impl Iterator<Item = usize> {
        1..=self.students
    }

    fn token_for(&self, party: Party, forged: bool) -> channel::IdentityToken {
        let owner = if forged { Party::Eve } else { party };
        self.channel.token(owner).expect("registered party")
    }

    fn forges(&self, party: Party, round: usize, tapped: bool) -> bool {
        tapped && self.adversary.impersonates() == Some(party) && round > 0
    }

    /// Alice's authenticated notice to `recipient` before a qubit leaves.
    fn send_notice(
        &mut self,
        round: usize,
        recipient: Party,
        forged: bool,
    ) -> Result<(), AbortCause> {
        let token = self.token_for(Party::Alice, forged);
        let authentic = self.channel.is_authentic(Party::Alice, token);
        self.transcript.record(
            round,
            Party::Alice,
            EventBody::AuthNotice {
                recipient,
                authentic,
            },
        );
        if authentic {
            Ok(())
        } else {
            Err(AbortCause::Masquerade {
                impersonated: Party::Alice,
            })
        }
    }

    /// A Bob's authenticated confirmation that a qubit arrived.
    fn confirm_receipt(
        &mut self,
        round: usize,
        bob: Party,
        forged: bool,
    ) -> Result<(), AbortCause> {
        let token = self.token_for(bob, forged);
        let authentic = self.channel.is_authentic(bob, token);
        self.transcript.record(
            round,
            bob,
            EventBody::QubitReceiptConfirmed {
                sender: Party::Alice,
                authentic,
            },
        );
        if authentic {
            Ok(())
        } else {
            Err(AbortCause::Masquerade { impersonated: bob })
        }
    }

    /// Notice and receipt for every receiver, without any qubit traffic.
    ///
    /// Returns the masquerade cause on the first message whose identity does
    /// not check out; the abort is written to the transcript.
    pub fn authenticate_exchange(
        &mut self,
        round: usize,
        receivers: &[Party],
    ) -> Result<(), AbortCause> {
        let tapped = self.adversary.targets_round(round, &mut self.rng);
        for &receiver in receivers {
            let step = self
                .send_notice(round, receiver, self.forges(Party::Alice, round, tapped))
                .and_then(|_| {
                    self.confirm_receipt(round, receiver, self.forges(receiver, round, tapped))
                });
            if let Err(cause) = step {
                self.abort(round, cause.clone());
                return Err(cause);
            }
        }
        Ok(())
    }

    fn abort(&mut self, round: usize, cause: AbortCause) {
        self.transcript
            .record(round, Party::Alice, EventBody::Abort { cause });
    }

    /// Alice prepares resource `round` and sends each Bob his qubit, with Eve
    /// acting on the in-flight qubits of targeted rounds.
    fn distribute(
        &mut self,
        round: usize,
        kind: ResourceKind,
    ) -> Result<Result<EntangledResource, AbortCause>> {
        let mask = match kind {
            ResourceKind::Psi => None,
            ResourceKind::Phi => Some(crate::quantum::ShiftMask::random(
                self.students,
                &mut self.rng,
            )),
        };
        let mut resource = EntangledResource::prepare(round, self.students, mask)?;
        let tapped = self.adversary.targets_round(round, &mut self.rng);
        for bob in self.bobs() {
            let party = Party::Bob(bob);
            if let Err(cause) =
                self.send_notice(round, party, self.forges(Party::Alice, round, tapped))
            {
                self.abort(round, cause.clone());
                return Ok(Err(cause));
            }
            self.transcript.record(
                round,
                Party::Alice,
                EventBody::QubitSent { recipient: party },
            );
            if tapped {
                self.adversary
                    .tap_in_flight(&mut resource, bob, &mut self.rng)?;
            }
            if let Err(cause) =
                self.confirm_receipt(round, party, self.forges(party, round, tapped))
            {
                self.abort(round, cause.clone());
                return Ok(Err(cause));
            }
        }
        Ok(Ok(resource))
    }

    fn measure(
        &mut self,
        resource: &mut EntangledResource,
        party: Party,
        basis: Basis,
    ) -> Result<i8> {
        let qubit = resource
            .qubit_of(party)
            .ok_or_else(|| ExamError::Internal(format!("{party} holds no qubit")))?;
        let value = resource
            .state
            .measure_in_place(qubit, basis, &mut self.rng)?
            .value();
        self.transcript.record(
            resource.index,
            party,
            EventBody::Measurement { basis, value },
        );
        Ok(value)
    }

    /// Security check on one resource in `basis`.
    /// Returns whether the check passed.
    fn check(&mut self, resource: &mut EntangledResource, basis: Basis) -> Result<bool> {
        let round = resource.index;
        self.transcript
            .record(round, Party::Alice, EventBody::BasisAnnounce { basis });
        let alice = self.measure(resource, Party::Alice, basis)?;
        let mut bobs = Vec::with_capacity(self.students);
        for bob in self.bobs() {
            let party = Party::Bob(bob);
            let value = self.measure(resource, party, basis)?;
            let reveal = match basis {
                Basis::Z => EventBody::PublicBit { value: value as u8 },
                Basis::X => EventBody::PublicSign { value },
            };
            self.transcript.record(round, party, reveal);
            bobs.push(value);
        }
        let body = match basis {
            Basis::Z => {
                let mask: Vec<u8> = self.bobs().map(|n| resource.mask_bit(n)).collect();
                let agree: Vec<bool> = bobs
                    .iter()
                    .zip(&mask)
                    .map(|(&j, &s)| (j as u8 ^ s) as i8 == alice)
                    .collect();
                EventBody::CheckResult {
                    basis,
                    alice,
                    bobs,
                    passed: agree.iter().all(|&a| a),
                    mask: resource.mask.as_ref().map(|_| mask),
                    agree: Some(agree),
                }
            }
            Basis::X => {
                let product: i8 = bobs.iter().product();
                EventBody::CheckResult {
                    basis,
                    alice,
                    bobs,
                    mask: None,
                    agree: None,
                    passed: alice == product,
                }
            }
        };
        let passed = matches!(body, EventBody::CheckResult { passed: true, .. });
        self.transcript.record(round, Party::Alice, body);
        self.adversary.harvest(resource, &mut self.rng)?;
        Ok(passed)
    }

    /// Distributes one fresh resource and checks it in `basis`.
    ///
    /// Returns `None` if the distribution was aborted on the classical channel.
    pub fn check_once(
        &mut self,
        round: usize,
        kind: ResourceKind,
        basis: Basis,
    ) -> Result<Option<bool>> {
        match self.distribute(round, kind)? {
            Ok(mut resource) => self.check(&mut resource, basis).map(Some),
            Err(_) => Ok(None),
        }
    }

    fn random_basis(&mut self) -> Basis {
        if self.rng.random_bool(0.5) {
            Basis::Z
        } else {
            Basis::X
        }
    }
}
