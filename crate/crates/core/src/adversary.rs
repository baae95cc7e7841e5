//! Eavesdropper strategies.
//!
//! Quantum taps act on a resource while its Bob-bound qubits are in flight;
//! whatever Eve keeps (measurement records, an ancilla, intercepted qubits)
//! travels with the resource as [`EveHoldings`] until the legitimate parties
//! have measured it, at which point [`Adversary::harvest`] turns the holdings
//! into pad estimates. Eve only ever reads the public part of the transcript.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ExamError, Result};
use crate::protocol::resource::{EntangledResource, ResourceKind};
use crate::quantum::{Basis, ShiftMask, StateVector, NORM_TOLERANCE};
use crate::transcript::Party;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    None,
    MeasureResend,
    Disturbance,
    EntangleMeasure,
    InterceptResend,
    Masquerade,
}

impl AttackKind {
    pub const ALL: [AttackKind; 6] = [
        AttackKind::None,
        AttackKind::MeasureResend,
        AttackKind::Disturbance,
        AttackKind::EntangleMeasure,
        AttackKind::InterceptResend,
        AttackKind::Masquerade,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::MeasureResend => "measure-resend",
            AttackKind::Disturbance => "disturbance",
            AttackKind::EntangleMeasure => "entangle-measure",
            AttackKind::InterceptResend => "intercept-resend",
            AttackKind::Masquerade => "masquerade",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.replace('_', "-").to_ascii_lowercase();
        Self::ALL.into_iter().find(|k| k.name() == norm)
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which flip pattern Eve bakes into her substitute states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EveMask {
    /// Zero mask on Psi resources, a fresh uniform mask on Phi resources.
    Auto,
    Zero,
    Random,
    Fixed(ShiftMask),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attack {
    None,
    MeasureResend,
    Disturbance,
    EntangleMeasure {
        alpha: Complex64,
        beta: Complex64,
        /// Bob whose qubit is entangled with the ancilla.
        target: usize,
    },
    InterceptResend {
        mask: EveMask,
    },
    Masquerade {
        impersonated: Party,
    },
}

impl Attack {
    pub fn kind(&self) -> AttackKind {
        match self {
            Attack::None => AttackKind::None,
            Attack::MeasureResend => AttackKind::MeasureResend,
            Attack::Disturbance => AttackKind::Disturbance,
            Attack::EntangleMeasure { .. } => AttackKind::EntangleMeasure,
            Attack::InterceptResend { .. } => AttackKind::InterceptResend,
            Attack::Masquerade { .. } => AttackKind::Masquerade,
        }
    }

    /// Entangle-measure with real weights, given the flip probability |β|².
    pub fn entangle_measure(flip_probability: f64, target: usize) -> Self {
        Attack::EntangleMeasure {
            alpha: Complex64::new((1.0 - flip_probability).sqrt(), 0.0),
            beta: Complex64::new(flip_probability.sqrt(), 0.0),
            target,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetRounds {
    All,
    /// Each round is tapped independently with this probability.
    Probability(f64),
    /// Explicit set of round numbers.
    Rounds(BTreeSet<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub attack: Attack,
    pub targets: TargetRounds,
}

impl AttackConfig {
    pub fn none() -> Self {
        AttackConfig {
            attack: Attack::None,
            targets: TargetRounds::All,
        }
    }

    pub fn every_round(attack: Attack) -> Self {
        AttackConfig {
            attack,
            targets: TargetRounds::All,
        }
    }

    pub fn kind(&self) -> AttackKind {
        self.attack.kind()
    }

    /// Checks parameter ranges against the number of students.
    pub fn validate(&self, students: usize) -> Result<()> {
        match &self.attack {
            Attack::EntangleMeasure {
                alpha,
                beta,
                target,
            } => {
                let weight = alpha.norm_sqr() + beta.norm_sqr();
                if (weight - 1.0).abs() > NORM_TOLERANCE {
                    return Err(ExamError::invalid(format!(
                        "entangle-measure weights sum to {weight}, expected 1"
                    )));
                }
                if *target == 0 || *target > students {
                    return Err(ExamError::invalid(format!(
                        "entangle-measure target bob {target} outside 1..={students}"
                    )));
                }
            }
            Attack::InterceptResend {
                mask: EveMask::Fixed(mask),
            } if mask.len() != students => {
                return Err(ExamError::invalid(format!(
                    "intercept-resend mask length {} != {students}",
                    mask.len()
                )));
            }
            Attack::Masquerade { impersonated } => match impersonated {
                Party::Alice => {}
                Party::Bob(n) if *n <= students => {}
                other => {
                    return Err(ExamError::invalid(format!("cannot impersonate {other}")));
                }
            },
            _ => {}
        }
        if let TargetRounds::Probability(p) = self.targets {
            if !(0.0..=1.0).contains(&p) {
                return Err(ExamError::invalid(format!(
                    "tap probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Extra qubits the attack needs on top of the N+1 legitimate ones.
    pub fn extra_qubits(&self, students: usize) -> usize {
        match self.attack {
            Attack::EntangleMeasure { .. } => 1,
            Attack::InterceptResend { .. } => students + 1,
            _ => 0,
        }
    }
}

/// Eve's private material attached to one resource.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EveHoldings {
    /// Z outcomes of measure-resend taps, keyed by Bob.
    pub measured: Vec<(usize, u8)>,
    /// Entangle-measure ancilla: (targeted Bob, qubit index).
    pub ancilla: Option<(usize, usize)>,
    pub intercept: Option<Intercept>,
}

/// Intercept-resend bookkeeping for one resource.
#[derive(Debug, Clone, PartialEq)]
pub struct Intercept {
    /// Eve's own "Alice" qubit of the substitute state.
    pub eve_alice: usize,
    /// Alice's original qubits, captured in flight, keyed by Bob.
    pub captured: Vec<(usize, usize)>,
    pub mask: ShiftMask,
}

/// Eve's best knowledge of the parties' Z outcomes for one resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PadGuess {
    pub alice: Option<u8>,
    /// Entry `n - 1` is Bob n.
    pub bobs: Vec<Option<u8>>,
}

/// What Eve learned from one tapped resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EveRecord {
    pub round: usize,
    pub kind: ResourceKind,
    pub outcomes: Vec<(String, u8)>,
    pub pads: PadGuess,
}

/// Eve's guess for one message bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Estimate {
    pub position: usize,
    pub bit: u8,
    /// False when Eve had no pad and flipped a coin.
    pub informed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EveKnowledge {
    pub records: Vec<EveRecord>,
    pub problem: Vec<Estimate>,
    /// Entry `n - 1` holds estimates for Bob n's solution.
    pub solutions: Vec<Vec<Estimate>>,
}

impl EveKnowledge {
    pub fn has_estimates(&self) -> bool {
        !self.problem.is_empty() || self.solutions.iter().any(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone)]
pub struct Adversary {
    config: AttackConfig,
    knowledge: EveKnowledge,
    students: usize,
}

impl Adversary {
    pub fn new(config: AttackConfig, students: usize) -> Result<Self> {
        config.validate(students)?;
        Ok(Adversary {
            config,
            knowledge: EveKnowledge {
                solutions: vec![Vec::new(); students],
                ..EveKnowledge::default()
            },
            students,
        })
    }

    pub fn honest(students: usize) -> Self {
        Self::new(AttackConfig::none(), students).expect("no-attack config is valid")
    }

    pub fn config(&self) -> &AttackConfig {
        &self.config
    }

    pub fn knowledge(&self) -> &EveKnowledge {
        &self.knowledge
    }

    pub fn into_knowledge(self) -> EveKnowledge {
        self.knowledge
    }

    /// Whether Eve acts on round `round`. Probability targets consume one draw.
    pub fn targets_round<R: Rng + ?Sized>(&self, round: usize, rng: &mut R) -> bool {
        if self.config.attack == Attack::None {
            return false;
        }
        match &self.config.targets {
            TargetRounds::All => true,
            TargetRounds::Probability(p) => rng.random_bool(*p),
            TargetRounds::Rounds(set) => set.contains(&round),
        }
    }

    /// Party Eve claims to be on the classical channel, if any.
    pub fn impersonates(&self) -> Option<Party> {
        masquerade(&self.config.attack)
    }

    /// Acts on Bob `bob`'s qubit of `resource` while it is in flight.
    pub fn tap_in_flight<R: Rng + ?Sized>(
        &mut self,
        resource: &mut EntangledResource,
        bob: usize,
        rng: &mut R,
    ) -> Result<()> {
        match self.config.attack.clone() {
            Attack::MeasureResend => tap_measure_resend(resource, bob, rng),
            Attack::Disturbance => tap_disturbance(resource, bob, rng),
            Attack::EntangleMeasure {
                alpha,
                beta,
                target,
            } if target == bob => tap_entangle_measure(resource, bob, alpha, beta),
            Attack::InterceptResend { mask } => tap_intercept_resend(resource, bob, &mask, rng),
            _ => Ok(()),
        }
    }

    /// Measures whatever Eve kept once the legitimate parties are done with
    /// the resource and records the resulting pad knowledge.
    pub fn harvest<R: Rng + ?Sized>(
        &mut self,
        resource: &mut EntangledResource,
        rng: &mut R,
    ) -> Result<Option<PadGuess>> {
        let Some(holdings) = resource.eve.take() else {
            return Ok(None);
        };
        let psi = resource.kind == ResourceKind::Psi;
        let mut pads = PadGuess {
            alice: None,
            bobs: vec![None; self.students],
        };
        let mut outcomes = Vec::new();

        for &(bob, bit) in &holdings.measured {
            outcomes.push((format!("bob:{bob}"), bit));
            pads.bobs[bob - 1] = Some(bit);
            if psi {
                pads.alice = Some(bit);
            }
        }
        if let Some((bob, qubit)) = holdings.ancilla {
            let flag = resource.state.measure_in_place(qubit, Basis::Z, rng)?.bit();
            outcomes.push(("ancilla".to_string(), flag));
            // the ancilla only carries the flip flag; it is Eve's inferred bit
            pads.bobs[bob - 1] = Some(flag);
            if psi {
                pads.alice = Some(flag);
            }
        }
        if let Some(intercept) = &holdings.intercept {
            let j = resource
                .state
                .measure_in_place(intercept.eve_alice, Basis::Z, rng)?
                .bit();
            outcomes.push(("eve-alice".to_string(), j));
            for (n, pad) in pads.bobs.iter_mut().enumerate() {
                *pad = Some(j ^ intercept.mask.for_bob(n + 1));
            }
            for &(bob, qubit) in &intercept.captured {
                let bit = resource.state.measure_in_place(qubit, Basis::Z, rng)?.bit();
                outcomes.push((format!("captured:{bob}"), bit));
                if psi {
                    pads.alice = Some(bit);
                }
            }
        }
        self.knowledge.records.push(EveRecord {
            round: resource.index,
            kind: resource.kind,
            outcomes,
            pads: pads.clone(),
        });
        Ok(Some(pads))
    }

    fn decodes(&self) -> bool {
        matches!(
            self.config.attack,
            Attack::MeasureResend | Attack::EntangleMeasure { .. } | Attack::InterceptResend { .. }
        )
    }

    /// Eve's reading of Alice's broadcast `x` for problem bit `position`.
    pub fn decode_problem<R: Rng + ?Sized>(
        &mut self,
        position: usize,
        public: u8,
        pads: Option<&PadGuess>,
        rng: &mut R,
    ) {
        if !self.decodes() {
            return;
        }
        let estimate = guess(position, public, pads.and_then(|p| p.alice), rng);
        self.knowledge.problem.push(estimate);
    }

    /// Eve's reading of Bob `bob`'s broadcast `y` for solution bit `position`.
    pub fn decode_solution<R: Rng + ?Sized>(
        &mut self,
        bob: usize,
        position: usize,
        public: u8,
        pads: Option<&PadGuess>,
        rng: &mut R,
    ) {
        if !self.decodes() {
            return;
        }
        let estimate = guess(position, public, pads.and_then(|p| p.bobs[bob - 1]), rng);
        self.knowledge.solutions[bob - 1].push(estimate);
    }
}

fn guess<R: Rng + ?Sized>(position: usize, public: u8, pad: Option<u8>, rng: &mut R) -> Estimate {
    match pad {
        Some(pad) => Estimate {
            position,
            bit: public ^ pad,
            informed: true,
        },
        None => Estimate {
            position,
            bit: rng.random_range(0..2),
            informed: false,
        },
    }
}

/// Z-measures Bob `bob`'s qubit and forwards the collapsed qubit.
pub fn tap_measure_resend<R: Rng + ?Sized>(
    resource: &mut EntangledResource,
    bob: usize,
    rng: &mut R,
) -> Result<()> {
    let qubit = resource.ownership[bob];
    let bit = resource.state.measure_in_place(qubit, Basis::Z, rng)?.bit();
    resource
        .eve
        .get_or_insert_with(EveHoldings::default)
        .measured
        .push((bob, bit));
    Ok(())
}

/// Applies u(v) with a uniform v to Bob `bob`'s qubit. Nothing is recorded.
pub fn tap_disturbance<R: Rng + ?Sized>(
    resource: &mut EntangledResource,
    bob: usize,
    rng: &mut R,
) -> Result<()> {
    if rng.random_bool(0.5) {
        resource.state.apply_x(resource.ownership[bob])?;
    }
    Ok(())
}

/// Entangles a fresh ancilla with Bob `bob`'s qubit.
pub fn tap_entangle_measure(
    resource: &mut EntangledResource,
    bob: usize,
    alpha: Complex64,
    beta: Complex64,
) -> Result<()> {
    let qubit = resource.ownership[bob];
    resource.state = resource.state.entangle_ancilla(qubit, alpha, beta)?;
    let ancilla = resource.state.num_qubits() - 1;
    resource
        .eve
        .get_or_insert_with(EveHoldings::default)
        .ancilla = Some((bob, ancilla));
    Ok(())
}

/// Captures Bob `bob`'s qubit and forwards the matching qubit of Eve's own
/// substitute state, which is created on the first tap of the resource.
pub fn tap_intercept_resend<R: Rng + ?Sized>(
    resource: &mut EntangledResource,
    bob: usize,
    mask: &EveMask,
    rng: &mut R,
) -> Result<()> {
    let students = resource.students();
    if resource
        .eve
        .as_ref()
        .and_then(|h| h.intercept.as_ref())
        .is_none()
    {
        let eve_mask = match mask {
            EveMask::Auto => match resource.kind {
                ResourceKind::Psi => ShiftMask::zero(students),
                ResourceKind::Phi => ShiftMask::random(students, rng),
            },
            EveMask::Zero => ShiftMask::zero(students),
            EveMask::Random => ShiftMask::random(students, rng),
            EveMask::Fixed(m) => m.clone(),
        };
        let mut substitute = StateVector::ghz(students + 1)?;
        substitute.apply_shift_mask(&eve_mask)?;
        let offset = resource.state.num_qubits();
        resource.state = resource.state.tensor(&substitute)?;
        resource
            .eve
            .get_or_insert_with(EveHoldings::default)
            .intercept = Some(Intercept {
            eve_alice: offset,
            captured: Vec::new(),
            mask: eve_mask,
        });
    }
    let holdings = resource.eve.as_mut().expect("holdings created above");
    let intercept = holdings
        .intercept
        .as_mut()
        .expect("intercept created above");
    let original = resource.ownership[bob];
    intercept.captured.push((bob, original));
    resource.ownership[bob] = intercept.eve_alice + bob;
    Ok(())
}

/// Identity Eve forges on the classical channel under `attack`.
pub fn masquerade(attack: &Attack) -> Option<Party> {
    match attack {
        Attack::Masquerade { impersonated } => Some(*impersonated),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::outcome_distribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn psi(students: usize) -> EntangledResource {
        EntangledResource::prepare(1, students, None).unwrap()
    }

    #[test]
    fn measure_resend_collapses_to_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut r = psi(2);
            tap_measure_resend(&mut r, 1, &mut rng).unwrap();
            tap_measure_resend(&mut r, 2, &mut rng).unwrap();
            let z = outcome_distribution(&r.state, &[0, 1, 2], Basis::Z).unwrap();
            assert_eq!(z.len(), 1);
            let key = z.keys().next().unwrap();
            assert!(key == &vec![0, 0, 0] || key == &vec![1, 1, 1]);
            let x = outcome_distribution(&r.state, &[0, 1, 2], Basis::X).unwrap();
            let odd: f64 = x
                .iter()
                .filter(|(k, _)| k.iter().product::<i8>() == -1)
                .map(|(_, p)| p)
                .sum();
            assert!((odd - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn disturbance_keeps_x_parity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let mut r = psi(3);
            for bob in 1..=3 {
                tap_disturbance(&mut r, bob, &mut rng).unwrap();
            }
            assert!(r.eve.is_none());
            let x = outcome_distribution(&r.state, &[0, 1, 2, 3], Basis::X).unwrap();
            assert!(x.keys().all(|k| k.iter().product::<i8>() == 1));
        }
    }

    #[test]
    fn entangle_measure_registers_ancilla() {
        let mut r = psi(2);
        let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        tap_entangle_measure(&mut r, 2, c, c).unwrap();
        assert_eq!(r.state.num_qubits(), 4);
        assert_eq!(r.eve.as_ref().unwrap().ancilla, Some((2, 3)));
    }

    #[test]
    fn intercept_resend_swaps_ownership() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut r = psi(2);
        tap_intercept_resend(&mut r, 1, &EveMask::Auto, &mut rng).unwrap();
        tap_intercept_resend(&mut r, 2, &EveMask::Auto, &mut rng).unwrap();
        assert_eq!(r.state.num_qubits(), 6);
        assert_eq!(r.ownership, vec![0, 4, 5]);
        let intercept = r.eve.as_ref().unwrap().intercept.as_ref().unwrap();
        assert_eq!(intercept.captured, vec![(1, 1), (2, 2)]);
        assert_eq!(intercept.mask, ShiftMask::zero(2));
    }

    #[test]
    fn config_validation() {
        let bad = AttackConfig::every_round(Attack::EntangleMeasure {
            alpha: Complex64::new(0.5, 0.0),
            beta: Complex64::new(0.5, 0.0),
            target: 1,
        });
        assert!(bad.validate(2).is_err());
        assert!(AttackConfig::every_round(Attack::entangle_measure(0.3, 3))
            .validate(2)
            .is_err());
        assert!(AttackConfig::every_round(Attack::entangle_measure(0.3, 2))
            .validate(2)
            .is_ok());
        assert!(AttackConfig::every_round(Attack::Masquerade {
            impersonated: Party::Eve
        })
        .validate(2)
        .is_err());
        assert!(AttackConfig::every_round(Attack::Masquerade {
            impersonated: Party::Bob(3)
        })
        .validate(2)
        .is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in AttackKind::ALL {
            assert_eq!(AttackKind::parse(k.name()), Some(k));
        }
        assert_eq!(
            AttackKind::parse("measure_resend"),
            Some(AttackKind::MeasureResend)
        );
        assert_eq!(AttackKind::parse("bogus"), None);
    }

    #[test]
    fn no_attack_never_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let adv = Adversary::honest(2);
        assert!(!adv.targets_round(1, &mut rng));
        assert!(adv.impersonates().is_none());
    }
}
