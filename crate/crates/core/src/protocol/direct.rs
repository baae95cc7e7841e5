use rand::Rng;
use serde::{Deserialize, Serialize};

use super::resource::{EntangledResource, ResourceKind};
use super::{ExamSession, ProtocolOutcome, ProtocolStatus};
use crate::bits::BitString;
use crate::error::{ExamError, Result};
use crate::transcript::{AbortCause, EventBody, OperatingMode, Party};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectConfig {
    /// Probability that a round is a control round.
    pub control_rate: f64,
    /// Hard limit on rounds; `None` uses `64·M/(1−c)`.
    pub round_cap: Option<usize>,
}

impl DirectConfig {
    pub fn new(control_rate: f64) -> Self {
        DirectConfig {
            control_rate,
            round_cap: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.control_rate) {
            return Err(ExamError::invalid(format!(
                "control rate {} outside [0, 1)",
                self.control_rate
            )));
        }
        Ok(())
    }

    pub fn cap_for(&self, message_len: usize) -> usize {
        self.round_cap.unwrap_or_else(|| {
            (64.0 * message_len.max(1) as f64 / (1.0 - self.control_rate)).ceil() as usize
        })
    }
}

enum Payload<'a> {
    Problem(&'a BitString),
    Solutions(&'a [BitString]),
}

impl<R: Rng> ExamSession<R> {
    /// Gives the problem without pre-shared entanglement.
    ///
    /// Each round Alice sends a fresh GHZ state and picks control mode with
    /// probability `c`. A failed control check ends the run with the
    /// eavesdropper detected.
    pub fn direct_give_problem(
        &mut self,
        problem: &BitString,
        config: &DirectConfig,
    ) -> Result<ProtocolOutcome> {
        self.run_direct(Payload::Problem(problem), config)
    }

    /// Collects the solutions without pre-shared entanglement,
    /// with a fresh private mask every round.
    pub fn direct_collect_solutions(
        &mut self,
        solutions: &[BitString],
        config: &DirectConfig,
    ) -> Result<ProtocolOutcome> {
        self.check_solution_count(solutions)?;
        self.run_direct(Payload::Solutions(solutions), config)
    }

    fn run_direct(
        &mut self,
        payload: Payload<'_>,
        config: &DirectConfig,
    ) -> Result<ProtocolOutcome> {
        config.validate()?;
        let (kind, length, phase) = match payload {
            Payload::Problem(q) => (ResourceKind::Psi, q.len(), "direct_give"),
            Payload::Solutions(r) => (
                ResourceKind::Phi,
                r.iter().map(BitString::len).max().unwrap_or(0),
                "direct_collect",
            ),
        };
        let cap = config.cap_for(length);
        let mut outcome = ProtocolOutcome::new(self.transcript.len());
        self.mark_phase(phase);
        for bob in self.bobs() {
            match payload {
                Payload::Problem(_) => outcome.problem_copies.insert(bob, BitString::default()),
                Payload::Solutions(_) => outcome.solutions.insert(bob, BitString::default()),
            };
        }

        let mut delivered = 0;
        let mut round = 0;
        while delivered < length {
            round += 1;
            if round > cap {
                return Err(ExamError::RoundCapExceeded { cap });
            }
            outcome.stats.rounds += 1;
            let mut resource: EntangledResource = match self.distribute(round, kind)? {
                Ok(r) => r,
                Err(cause) => {
                    outcome.status = ProtocolStatus::AbortedEveDetected { cause };
                    break;
                }
            };
            let mode = if self.rng.random_bool(config.control_rate) {
                OperatingMode::Control
            } else {
                OperatingMode::Message
            };
            self.transcript
                .record(round, Party::Alice, EventBody::ModeAnnounce { mode });
            match mode {
                OperatingMode::Control => {
                    outcome.stats.control_rounds += 1;
                    let basis = self.random_basis();
                    if self.check(&mut resource, basis)? {
                        outcome.stats.checks_passed += 1;
                    } else {
                        outcome.stats.checks_failed += 1;
                        self.transcript.record(
                            round,
                            Party::Alice,
                            EventBody::Restart {
                                reason: "control check failed".into(),
                            },
                        );
                        self.abort(round, AbortCause::CheckFailed);
                        outcome.status = ProtocolStatus::AbortedEveDetected {
                            cause: AbortCause::CheckFailed,
                        };
                        break;
                    }
                }
                OperatingMode::Message => {
                    match payload {
                        Payload::Problem(q) => {
                            let bit = q.get(delivered).expect("delivered < length");
                            self.give_round(&mut resource, delivered, bit, &mut outcome)?;
                        }
                        Payload::Solutions(r) => {
                            self.collect_round(&mut resource, delivered, r, &mut outcome)?;
                        }
                    }
                    delivered += 1;
                }
            }
        }

        if outcome.status == ProtocolStatus::Completed {
            let text = match payload {
                Payload::Problem(_) => {
                    "problem delivered to all students; solutions due after the exam period"
                }
                Payload::Solutions(_) => "all solutions collected",
            };
            self.transcript.record(
                0,
                Party::Alice,
                EventBody::Announcement { text: text.into() },
            );
        }
        outcome.events.end = self.transcript.len();
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{Attack, AttackConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn session(students: usize, attack: Attack, seed: u64) -> ExamSession<ChaCha8Rng> {
        ExamSession::new(
            students,
            AttackConfig::every_round(attack),
            ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn honest_direct_give_completes() {
        let mut s = session(3, Attack::None, 1);
        let q = BitString::random(16, s.rng());
        let out = s.direct_give_problem(&q, &DirectConfig::new(0.5)).unwrap();
        assert!(out.is_completed());
        assert_eq!(out.stats.message_rounds, 16);
        assert_eq!(out.stats.checks_failed, 0);
        assert_eq!(
            out.stats.rounds,
            out.stats.message_rounds + out.stats.control_rounds
        );
        for copy in out.problem_copies.values() {
            assert_eq!(copy, &q);
        }
    }

    #[test]
    fn honest_direct_collect_recovers_solutions() {
        let mut s = session(3, Attack::None, 2);
        let sols: Vec<BitString> = (0..3).map(|_| BitString::random(12, s.rng())).collect();
        let out = s
            .direct_collect_solutions(&sols, &DirectConfig::new(0.3))
            .unwrap();
        assert!(out.is_completed());
        for (n, r) in sols.iter().enumerate() {
            assert_eq!(&out.solutions[&(n + 1)], r);
        }
    }

    #[test]
    fn zero_control_rate_never_checks_and_eve_reads_everything() {
        let mut s = session(2, Attack::MeasureResend, 3);
        let q = BitString::random(32, s.rng());
        let out = s.direct_give_problem(&q, &DirectConfig::new(0.0)).unwrap();
        assert!(out.is_completed());
        assert_eq!(out.stats.control_rounds, 0);
        let learned: Vec<u8> = s.eve().problem.iter().map(|e| e.bit).collect();
        assert_eq!(learned, q.bits());
        assert!(s.eve().problem.iter().all(|e| e.informed));
    }

    #[test]
    fn control_rate_must_be_below_one() {
        let mut s = session(1, Attack::None, 4);
        let q = BitString::constant(2, 1);
        assert!(s.direct_give_problem(&q, &DirectConfig::new(1.0)).is_err());
        assert!(s.direct_give_problem(&q, &DirectConfig::new(-0.1)).is_err());
    }

    #[test]
    fn round_cap_is_enforced() {
        let mut s = session(1, Attack::None, 5);
        let q = BitString::constant(50, 0);
        let config = DirectConfig {
            control_rate: 0.9,
            round_cap: Some(10),
        };
        assert_eq!(
            s.direct_give_problem(&q, &config).unwrap_err(),
            ExamError::RoundCapExceeded { cap: 10 }
        );
        assert_eq!(DirectConfig::new(0.5).cap_for(16), 2048);
    }

    #[test]
    fn persistent_attack_is_detected() {
        let mut s = session(2, Attack::MeasureResend, 6);
        let q = BitString::random(200, s.rng());
        let out = s.direct_give_problem(&q, &DirectConfig::new(0.5)).unwrap();
        assert_eq!(
            out.status,
            ProtocolStatus::AbortedEveDetected {
                cause: AbortCause::CheckFailed
            }
        );
    }
}
