//! Dense state-vector engine.
//!
//! Basis labels are big-endian in qubit index: qubit 0 is the most
//! significant bit of the label. In every protocol state qubit 0 belongs to
//! Alice, qubits `1..=N` to the Bobs, and any eavesdropper qubits are
//! appended after them.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ExamError, Result};

/// Largest register the engine will allocate (2^24 amplitudes).
pub const MAX_QUBITS: usize = 24;
/// Allowed drift of the squared norm away from one.
pub const NORM_TOLERANCE: f64 = 1e-9;
/// Projections with a smaller squared norm are treated as impossible.
pub const ZERO_PROJECTION: f64 = 1e-12;

/// Probabilities below this are dropped from exact distributions as rounding dust.
const DISTRIBUTION_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// Computational basis {|0⟩, |1⟩}; outcomes are bits.
    Z,
    /// Hadamard basis {|+⟩, |−⟩}; outcomes are signs.
    X,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Z => f.write_str("z"),
            Basis::X => f.write_str("x"),
        }
    }
}

/// A single-qubit measurement outcome.
///
/// `index` is the eigenvector found: 0 for |0⟩ or |+⟩, 1 for |1⟩ or |−⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Outcome {
    pub basis: Basis,
    pub index: u8,
}

impl Outcome {
    pub fn new(basis: Basis, index: u8) -> Self {
        debug_assert!(index < 2);
        Outcome { basis, index }
    }

    /// Bit value of the outcome (meaningful for Z).
    pub fn bit(self) -> u8 {
        self.index
    }

    /// Sign value of the outcome: |+⟩ → +1, |−⟩ → −1.
    pub fn sign(self) -> i8 {
        1 - 2 * self.index as i8
    }

    /// Bit for Z outcomes, sign for X outcomes.
    pub fn value(self) -> i8 {
        match self.basis {
            Basis::Z => self.index as i8,
            Basis::X => self.sign(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementResult {
    pub outcome: Outcome,
    pub post_state: StateVector,
}

/// Per-student bit-flip pattern; entry `n - 1` is the secret bit for Bob `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShiftMask(Vec<u8>);

impl ShiftMask {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(ExamError::invalid(format!("mask entry {bad} is not a bit")));
        }
        Ok(ShiftMask(bits))
    }

    pub fn zero(students: usize) -> Self {
        ShiftMask(vec![0; students])
    }

    pub fn random<R: Rng + ?Sized>(students: usize, rng: &mut R) -> Self {
        ShiftMask((0..students).map(|_| rng.random_range(0..2u8)).collect())
    }

    /// Mask number `index` in the lexicographic enumeration of all `2^students` masks.
    pub fn enumerate(students: usize, index: usize) -> Self {
        ShiftMask(
            (0..students)
                .map(|n| ((index >> (students - 1 - n)) & 1) as u8)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Secret bit for Bob `bob` (1-based).
    pub fn for_bob(&self, bob: usize) -> u8 {
        self.0[bob - 1]
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_qubit_count(k: usize) -> Result<()> {
    if k == 0 || k > MAX_QUBITS {
        return Err(ExamError::invalid(format!(
            "qubit count {k} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl StateVector {
    /// Computational basis state `|label⟩` on `k` qubits.
    pub fn basis_state(k: usize, label: usize) -> Result<Self> {
        check_qubit_count(k)?;
        if label >= 1 << k {
            return Err(ExamError::invalid(format!(
                "label {label} out of range for {k} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << k];
        amplitudes[label] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            num_qubits: k,
            amplitudes,
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(ExamError::invalid(format!(
                "amplitude count {len} is not 2^k for k >= 1"
            )));
        }
        let k = len.trailing_zeros() as usize;
        check_qubit_count(k)?;
        let state = StateVector {
            num_qubits: k,
            amplitudes,
        };
        if (state.norm_sqr() - 1.0).abs() > NORM_TOLERANCE {
            return Err(ExamError::invalid(format!(
                "amplitudes not normalized (norm² = {})",
                state.norm_sqr()
            )));
        }
        Ok(state)
    }

    /// (|0…0⟩ + |1…1⟩)/√2 on `k` qubits.
    pub fn ghz(k: usize) -> Result<Self> {
        check_qubit_count(k)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << k];
        amplitudes[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        amplitudes[(1 << k) - 1] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Ok(StateVector {
            num_qubits: k,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: usize) -> Complex64 {
        self.amplitudes[label]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn bit_of(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(ExamError::invalid(format!(
                "qubit {qubit} out of range for {} qubits",
                self.num_qubits
            )));
        }
        Ok(())
    }

    /// Pauli bit flip |0⟩⟨1| + |1⟩⟨0| on one qubit.
    pub fn apply_x(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        let bit = self.bit_of(qubit);
        for label in 0..self.amplitudes.len() {
            if label & bit == 0 {
                self.amplitudes.swap(label, label | bit);
            }
        }
        Ok(())
    }

    /// Hadamard, used to rotate between the Z and X bases.
    pub fn apply_h(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        let bit = self.bit_of(qubit);
        for label in 0..self.amplitudes.len() {
            if label & bit == 0 {
                let a = self.amplitudes[label];
                let b = self.amplitudes[label | bit];
                self.amplitudes[label] = (a + b) * FRAC_1_SQRT_2;
                self.amplitudes[label | bit] = (a - b) * FRAC_1_SQRT_2;
            }
        }
        Ok(())
    }

    /// |self⟩ ⊗ |other⟩, with `other`'s qubits appended after ours.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let k = self.num_qubits + other.num_qubits;
        if k > MAX_QUBITS {
            return Err(ExamError::QubitBudget {
                requested: k,
                cap: MAX_QUBITS,
            });
        }
        let mut amplitudes = Vec::with_capacity(1 << k);
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ok(StateVector {
            num_qubits: k,
            amplitudes,
        })
    }

    /// Applies u(s_n) to qubit `n` for every Bob; qubit 0 is left alone.
    pub fn apply_shift_mask(&mut self, mask: &ShiftMask) -> Result<()> {
        if mask.len() + 1 != self.num_qubits {
            return Err(ExamError::invalid(format!(
                "mask of length {} does not fit a {}-qubit state",
                mask.len(),
                self.num_qubits
            )));
        }
        for (n, &s) in mask.bits().iter().enumerate() {
            if s == 1 {
                self.apply_x(n + 1)?;
            }
        }
        Ok(())
    }

    /// Probability that `qubit` is found in eigenvector `index` of `basis`.
    pub fn probability(&self, qubit: usize, basis: Basis, index: u8) -> Result<f64> {
        self.check_qubit(qubit)?;
        let rotated;
        let state = match basis {
            Basis::Z => self,
            Basis::X => {
                let mut s = self.clone();
                s.apply_h(qubit)?;
                rotated = s;
                &rotated
            }
        };
        let bit = state.bit_of(qubit);
        let want = if index == 0 { 0 } else { bit };
        Ok(state
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(label, _)| label & bit == want)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Deterministic projection onto one outcome.
    ///
    /// Returns the outcome probability and the renormalized post-measurement
    /// state, or `None` when the projection vanishes.
    pub fn project(
        &self,
        qubit: usize,
        basis: Basis,
        index: u8,
    ) -> Result<Option<(f64, StateVector)>> {
        self.check_qubit(qubit)?;
        let mut state = self.clone();
        if basis == Basis::X {
            state.apply_h(qubit)?;
        }
        let bit = state.bit_of(qubit);
        let want = if index == 0 { 0 } else { bit };
        let mut prob = 0.0;
        for (label, amp) in state.amplitudes.iter_mut().enumerate() {
            if label & bit == want {
                prob += amp.norm_sqr();
            } else {
                *amp = Complex64::new(0.0, 0.0);
            }
        }
        if prob < ZERO_PROJECTION {
            return Ok(None);
        }
        let scale = 1.0 / prob.sqrt();
        for amp in state.amplitudes.iter_mut() {
            *amp *= scale;
        }
        if basis == Basis::X {
            state.apply_h(qubit)?;
        }
        Ok(Some((prob, state)))
    }

    /// Born-rule measurement of one qubit; the state collapses in place.
    pub fn measure_in_place<R: Rng + ?Sized>(
        &mut self,
        qubit: usize,
        basis: Basis,
        rng: &mut R,
    ) -> Result<Outcome> {
        let result = measure(self, qubit, basis, rng)?;
        *self = result.post_state;
        Ok(result.outcome)
    }

    /// Exact joint distribution of measuring each `(qubit, basis)` pair.
    ///
    /// Keys hold the outcome values in the order given: bits for Z, signs for X.
    pub fn joint_distribution(&self, targets: &[(usize, Basis)]) -> Result<BTreeMap<Vec<i8>, f64>> {
        let mut seen = vec![false; self.num_qubits];
        let mut rotated = self.clone();
        for &(qubit, basis) in targets {
            self.check_qubit(qubit)?;
            if std::mem::replace(&mut seen[qubit], true) {
                return Err(ExamError::invalid(format!("qubit {qubit} listed twice")));
            }
            if basis == Basis::X {
                rotated.apply_h(qubit)?;
            }
        }
        let mut dist = BTreeMap::new();
        for (label, amp) in rotated.amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let key: Vec<i8> = targets
                .iter()
                .map(|&(qubit, basis)| {
                    let index = u8::from(label & rotated.bit_of(qubit) != 0);
                    Outcome::new(basis, index).value()
                })
                .collect();
            *dist.entry(key).or_insert(0.0) += p;
        }
        dist.retain(|_, p| *p > DISTRIBUTION_FLOOR);
        Ok(dist)
    }

    /// Appends an ancilla in |0⟩ and entangles it with `qubit`:
    /// |0⟩_E|i⟩ → α|0⟩_E|i⟩ + β|1⟩_E|i⊕1⟩.
    ///
    /// The ancilla Z-eigenstates play the roles of χ_i (|0⟩) and its orthogonal
    /// complement (|1⟩). The new qubit is the last one.
    pub fn entangle_ancilla(
        &self,
        qubit: usize,
        alpha: Complex64,
        beta: Complex64,
    ) -> Result<StateVector> {
        self.check_qubit(qubit)?;
        let weight = alpha.norm_sqr() + beta.norm_sqr();
        if (weight - 1.0).abs() > NORM_TOLERANCE {
            return Err(ExamError::invalid(format!(
                "|alpha|^2 + |beta|^2 = {weight}, expected 1"
            )));
        }
        let k = self.num_qubits + 1;
        if k > MAX_QUBITS {
            return Err(ExamError::QubitBudget {
                requested: k,
                cap: MAX_QUBITS,
            });
        }
        let flip = self.bit_of(qubit);
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << k];
        for (label, amp) in self.amplitudes.iter().enumerate() {
            amplitudes[label << 1] += alpha * amp;
            amplitudes[((label ^ flip) << 1) | 1] += beta * amp;
        }
        Ok(StateVector {
            num_qubits: k,
            amplitudes,
        })
    }
}

/// GHZ state on `k` qubits.
pub fn ghz_prepare(k: usize) -> Result<StateVector> {
    StateVector::ghz(k)
}

/// Returns `state` with u(s_n) applied to every Bob's qubit.
pub fn apply_shift_mask(state: &StateVector, mask: &ShiftMask) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_shift_mask(mask)?;
    Ok(out)
}

/// Born-rule measurement; the input state is not modified.
pub fn measure<R: Rng + ?Sized>(
    state: &StateVector,
    qubit: usize,
    basis: Basis,
    rng: &mut R,
) -> Result<MeasurementResult> {
    state.check_qubit(qubit)?;
    let p0 = state.probability(qubit, basis, 0)?;
    let p1 = state.probability(qubit, basis, 1)?;
    if p0 < ZERO_PROJECTION && p1 < ZERO_PROJECTION {
        return Err(ExamError::Internal(format!(
            "both projections of qubit {qubit} vanish"
        )));
    }
    let draw: f64 = rng.random();
    let index = if p1 < ZERO_PROJECTION || (p0 >= ZERO_PROJECTION && draw * (p0 + p1) < p0) {
        0
    } else {
        1
    };
    let (_, post_state) = state
        .project(qubit, basis, index)?
        .ok_or_else(|| ExamError::Internal("sampled a vanishing projection".into()))?;
    Ok(MeasurementResult {
        outcome: Outcome::new(basis, index),
        post_state,
    })
}

/// Exact joint distribution of the listed qubits, all measured in `basis`.
pub fn outcome_distribution(
    state: &StateVector,
    qubits: &[usize],
    basis: Basis,
) -> Result<BTreeMap<Vec<i8>, f64>> {
    let targets: Vec<(usize, Basis)> = qubits.iter().map(|&q| (q, basis)).collect();
    state.joint_distribution(&targets)
}

/// Functional form of [`StateVector::entangle_ancilla`].
pub fn entangle_ancilla(
    state: &StateVector,
    qubit: usize,
    alpha: Complex64,
    beta: Complex64,
) -> Result<StateVector> {
    state.entangle_ancilla(qubit, alpha, beta)
}
