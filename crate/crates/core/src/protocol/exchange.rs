use rand::Rng;

use super::resource::{EntangledResource, ResourceKind};
use super::{ExamSession, ProtocolOutcome};
use crate::bits::BitString;
use crate::error::{ExamError, Result};
use crate::quantum::Basis;
use crate::transcript::{EventBody, Party};

impl<R: Rng> ExamSession<R> {
    /// Hands the problem `problem` to every Bob over pre-shared Psi
    /// resources. Consumes `|problem|` resources from the front
    /// of `pool`, in order.
    pub fn give_problem(
        &mut self,
        pool: &mut Vec<EntangledResource>,
        problem: &BitString,
    ) -> Result<ProtocolOutcome> {
        take_check(pool, problem.len(), ResourceKind::Psi)?;
        let mut outcome = ProtocolOutcome::new(self.transcript.len());
        self.mark_phase("give_problem");
        for bob in self.bobs() {
            outcome.problem_copies.insert(bob, BitString::default());
        }
        for (position, mut resource) in pool.drain(..problem.len()).enumerate() {
            let bit = problem.get(position).expect("position within problem");
            self.give_round(&mut resource, position, bit, &mut outcome)?;
        }
        outcome.events.end = self.transcript.len();
        Ok(outcome)
    }

    /// Collects every Bob's solution over pre-shared Phi resources
    ///. `solutions[n - 1]` is Bob n's string.
    pub fn collect_solutions(
        &mut self,
        pool: &mut Vec<EntangledResource>,
        solutions: &[BitString],
    ) -> Result<ProtocolOutcome> {
        self.check_solution_count(solutions)?;
        let rounds = solutions.iter().map(BitString::len).max().unwrap_or(0);
        take_check(pool, rounds, ResourceKind::Phi)?;
        let mut outcome = ProtocolOutcome::new(self.transcript.len());
        self.mark_phase("collect_solutions");
        for bob in self.bobs() {
            outcome.solutions.insert(bob, BitString::default());
        }
        for (position, mut resource) in pool.drain(..rounds).enumerate() {
            self.collect_round(&mut resource, position, solutions, &mut outcome)?;
        }
        outcome.events.end = self.transcript.len();
        Ok(outcome)
    }

    pub(super) fn check_solution_count(&self, solutions: &[BitString]) -> Result<()> {
        if solutions.len() != self.students {
            return Err(ExamError::invalid(format!(
                "{} solutions for {} students",
                solutions.len(),
                self.students
            )));
        }
        Ok(())
    }

    /// One problem bit: everybody measures in Z, Alice broadcasts
    /// `x = q ⊕ j_a`, each Bob decodes `q = x ⊕ j_n`.
    pub(super) fn give_round(
        &mut self,
        resource: &mut EntangledResource,
        position: usize,
        bit: u8,
        outcome: &mut ProtocolOutcome,
    ) -> Result<()> {
        let round = resource.index;
        let pad = self.measure(resource, Party::Alice, Basis::Z)? as u8;
        let mut bob_pads = Vec::with_capacity(self.students);
        for bob in self.bobs() {
            bob_pads.push(self.measure(resource, Party::Bob(bob), Basis::Z)? as u8);
        }
        let public = bit ^ pad;
        self.transcript.record(
            round,
            Party::Alice,
            EventBody::Encode {
                plaintext: bit,
                pad,
                public,
            },
        );
        self.transcript
            .record(round, Party::Alice, EventBody::PublicBit { value: public });
        for (bob, pad) in self.bobs().zip(bob_pads) {
            let broadcast = self
                .transcript
                .public_bit(round, Party::Alice)
                .ok_or_else(|| ExamError::Internal("missing broadcast".into()))?;
            let decoded = broadcast ^ pad;
            self.transcript.record(
                round,
                Party::Bob(bob),
                EventBody::Decode {
                    source: Party::Alice,
                    public: broadcast,
                    pad,
                    mask: None,
                    decoded,
                },
            );
            outcome
                .problem_copies
                .get_mut(&bob)
                .expect("copy initialised")
                .push(decoded);
        }
        let pads = self.adversary.harvest(resource, &mut self.rng)?;
        let overheard = self
            .transcript
            .public_bit(round, Party::Alice)
            .expect("broadcast recorded above");
        self.adversary
            .decode_problem(position, overheard, pads.as_ref(), &mut self.rng);
        outcome.stats.message_rounds += 1;
        Ok(())
    }

    /// One solution bit per Bob: everybody measures in Z, Bob n broadcasts
    /// `y = r ⊕ j_n`, Alice decodes `r = y ⊕ j_a ⊕ s_n`.
    pub(super) fn collect_round(
        &mut self,
        resource: &mut EntangledResource,
        position: usize,
        solutions: &[BitString],
        outcome: &mut ProtocolOutcome,
    ) -> Result<()> {
        let round = resource.index;
        let alice_pad = self.measure(resource, Party::Alice, Basis::Z)? as u8;
        // Bobs whose solution is already fully sent sit this round out
        let mut bob_pads = Vec::with_capacity(self.students);
        for bob in self.bobs() {
            if let Some(bit) = solutions[bob - 1].get(position) {
                bob_pads.push((
                    bob,
                    bit,
                    self.measure(resource, Party::Bob(bob), Basis::Z)? as u8,
                ));
            }
        }
        for (bob, bit, pad) in bob_pads {
            let public = bit ^ pad;
            let party = Party::Bob(bob);
            self.transcript.record(
                round,
                party,
                EventBody::Encode {
                    plaintext: bit,
                    pad,
                    public,
                },
            );
            self.transcript
                .record(round, party, EventBody::PublicBit { value: public });
        }
        let mut heard = Vec::new();
        for bob in self.bobs() {
            let Some(public) = self.transcript.public_bit(round, Party::Bob(bob)) else {
                continue;
            };
            let mask = resource.mask_bit(bob);
            let decoded = public ^ alice_pad ^ mask;
            self.transcript.record(
                round,
                Party::Alice,
                EventBody::Decode {
                    source: Party::Bob(bob),
                    public,
                    pad: alice_pad,
                    mask: Some(mask),
                    decoded,
                },
            );
            outcome
                .solutions
                .get_mut(&bob)
                .expect("solution initialised")
                .push(decoded);
            heard.push((bob, public));
        }
        let pads = self.adversary.harvest(resource, &mut self.rng)?;
        for (bob, public) in heard {
            self.adversary
                .decode_solution(bob, position, public, pads.as_ref(), &mut self.rng);
        }
        outcome.stats.message_rounds += 1;
        Ok(())
    }
}

fn take_check(pool: &[EntangledResource], needed: usize, kind: ResourceKind) -> Result<()> {
    if pool.len() < needed {
        return Err(ExamError::PoolExhausted {
            needed,
            available: pool.len(),
        });
    }
    if let Some(bad) = pool[..needed].iter().find(|r| r.kind != kind) {
        return Err(ExamError::invalid(format!(
            "resource {} is {:?}, expected {kind:?}",
            bad.index, bad.kind
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::SharingConfig;
    use super::*;
    use crate::adversary::AttackConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn honest(students: usize, seed: u64) -> ExamSession<ChaCha8Rng> {
        ExamSession::new(
            students,
            AttackConfig::none(),
            ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn every_bob_decodes_the_problem() {
        for seed in 0..10 {
            let mut s = honest(3, seed);
            let (mut pool, _) = s.share_psi(&SharingConfig::for_payload(3, 0.25)).unwrap();
            let q: BitString = "101".parse().unwrap();
            let out = s.give_problem(&mut pool, &q).unwrap();
            assert!(out.is_completed());
            for bob in 1..=3 {
                assert_eq!(out.problem_copies[&bob], q);
            }
        }
    }

    #[test]
    fn alice_recovers_all_solutions() {
        let mut s = honest(3, 5);
        let solutions: Vec<BitString> = ["1100", "0111", "10"]
            .iter()
            .map(|b| b.parse().unwrap())
            .collect();
        let (mut pool, _) = s.share_phi(&SharingConfig::for_payload(4, 0.25)).unwrap();
        let out = s.collect_solutions(&mut pool, &solutions).unwrap();
        for (bob, expected) in solutions.iter().enumerate() {
            assert_eq!(&out.solutions[&(bob + 1)], expected);
        }
        assert!(pool.is_empty());
    }

    #[test]
    fn exhausted_pool_is_rejected() {
        let mut s = honest(2, 6);
        let (mut pool, _) = s.share_psi(&SharingConfig::for_payload(2, 0.25)).unwrap();
        let q: BitString = "10101".parse().unwrap();
        assert!(matches!(
            s.give_problem(&mut pool, &q),
            Err(ExamError::PoolExhausted { needed: 5, .. })
        ));
    }

    #[test]
    fn wrong_resource_kind_is_rejected() {
        let mut s = honest(2, 7);
        let (mut pool, _) = s.share_psi(&SharingConfig::for_payload(2, 0.25)).unwrap();
        let sols = vec![BitString::constant(2, 1), BitString::constant(2, 0)];
        assert!(s.collect_solutions(&mut pool, &sols).is_err());
    }

    #[test]
    fn zero_mask_decode_reduces_to_plain_xor() {
        let mut s = honest(1, 8);
        let mut r =
            EntangledResource::prepare(1, 1, Some(crate::quantum::ShiftMask::zero(1))).unwrap();
        let mut out = ProtocolOutcome::new(0);
        out.solutions.insert(1, BitString::default());
        s.collect_round(&mut r, 0, &[BitString::constant(1, 1)], &mut out)
            .unwrap();
        let decode = s
            .transcript()
            .events()
            .iter()
            .find_map(|e| match e.body {
                EventBody::Decode {
                    public,
                    pad,
                    decoded,
                    ..
                } => Some((public, pad, decoded)),
                _ => None,
            })
            .unwrap();
        assert_eq!(decode.2, decode.0 ^ decode.1);
        assert_eq!(decode.2, 1);
    }
}
