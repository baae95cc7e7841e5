//! Independent oracle for single-check detection probabilities.
//!
//! Every attacked resource is written down as an explicit mixture of pure
//! joint states, amplitude by amplitude, without going through the adversary
//! or protocol code. Check failure is then read off the exact joint
//! distribution of the qubits Alice and the Bobs hold.

#![allow(dead_code)]

use num_complex::Complex64;
use quantum_exam::quantum::outcome_distribution;
use quantum_exam::{Basis, StateVector};

pub const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Basis label of a bit pattern, qubit 0 most significant.
pub fn label(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// Superposition of computational basis states given as bit patterns.
pub fn state(terms: &[(Vec<u8>, Complex64)]) -> StateVector {
    let k = terms[0].0.len();
    let mut amps = vec![c(0.0); 1 << k];
    for (bits, amp) in terms {
        amps[label(bits)] += amp;
    }
    StateVector::from_amplitudes(amps).expect("oracle state is normalized")
}

pub fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

pub fn constant(n: usize, bit: u8) -> Vec<u8> {
    vec![bit; n]
}

pub fn all_masks(n: usize) -> Vec<Vec<u8>> {
    (0..1usize << n)
        .map(|m| (0..n).map(|i| ((m >> (n - 1 - i)) & 1) as u8).collect())
        .collect()
}

/// Masks Alice may draw: only the zero mask for Psi, uniform for Phi.
pub fn legit_masks(n: usize, phi: bool) -> Vec<Vec<u8>> {
    if phi {
        all_masks(n)
    } else {
        vec![constant(n, 0)]
    }
}

/// (|0, s⟩ + |1, s̄⟩)/√2 as a list of terms.
pub fn masked_ghz(s: &[u8]) -> Vec<(Vec<u8>, Complex64)> {
    let n = s.len();
    (0..2u8)
        .map(|i| {
            let mut bits = vec![i];
            bits.extend(xor(s, &constant(n, i)));
            (bits, c(H))
        })
        .collect()
}

/// One pure component of the post-attack mixture.
pub struct Branch {
    pub weight: f64,
    pub state: StateVector,
    pub alice: usize,
    /// Qubit held by Bob n at index n − 1.
    pub bobs: Vec<usize>,
    /// The legitimate mask used in the Z comparison.
    pub mask: Vec<u8>,
}

/// Probability that the check in `basis` fails on one branch.
pub fn failure(branch: &Branch, basis: Basis) -> f64 {
    let mut qubits = vec![branch.alice];
    qubits.extend(&branch.bobs);
    let dist = outcome_distribution(&branch.state, &qubits, basis).unwrap();
    dist.iter()
        .filter(|(outcome, _)| {
            let alice = outcome[0];
            let bobs = &outcome[1..];
            match basis {
                Basis::Z => bobs
                    .iter()
                    .zip(&branch.mask)
                    .any(|(&j, &s)| (j as u8 ^ s) as i8 != alice),
                Basis::X => bobs.iter().product::<i8>() != alice,
            }
        })
        .fold(0.0, |acc, (_, p)| acc + p)
}

pub fn mixture_failure(branches: &[Branch], basis: Basis) -> f64 {
    let total: f64 = branches.iter().map(|b| b.weight).sum();
    assert!((total - 1.0).abs() < 1e-12, "branch weights sum to {total}");
    branches
        .iter()
        .fold(0.0, |acc, b| acc + b.weight * failure(b, basis))
}

fn plain(n: usize) -> (usize, Vec<usize>) {
    (0, (1..=n).collect())
}

pub fn honest(n: usize, phi: bool) -> Vec<Branch> {
    let masks = legit_masks(n, phi);
    let w = 1.0 / masks.len() as f64;
    masks
        .into_iter()
        .map(|s| {
            let (alice, bobs) = plain(n);
            Branch {
                weight: w,
                state: state(&masked_ghz(&s)),
                alice,
                bobs,
                mask: s,
            }
        })
        .collect()
}

/// Eve measures every Bob qubit in Z: the state collapses to |e, s⊕e⟩.
pub fn measure_resend(n: usize, phi: bool) -> Vec<Branch> {
    let masks = legit_masks(n, phi);
    let w = 0.5 / masks.len() as f64;
    let mut out = Vec::new();
    for s in masks {
        for e in 0..2u8 {
            let mut bits = vec![e];
            bits.extend(xor(&s, &constant(n, e)));
            let (alice, bobs) = plain(n);
            out.push(Branch {
                weight: w,
                state: state(&[(bits, c(1.0))]),
                alice,
                bobs,
                mask: s.clone(),
            });
        }
    }
    out
}

/// Eve flips each Bob qubit with probability 1/2.
pub fn disturbance(n: usize, phi: bool) -> Vec<Branch> {
    let masks = legit_masks(n, phi);
    let flips = all_masks(n);
    let w = 1.0 / (masks.len() * flips.len()) as f64;
    let mut out = Vec::new();
    for s in &masks {
        for v in &flips {
            let (alice, bobs) = plain(n);
            out.push(Branch {
                weight: w,
                state: state(&masked_ghz(&xor(s, v))),
                alice,
                bobs,
                mask: s.clone(),
            });
        }
    }
    out
}

/// Ancilla appended last: α|0⟩_E|…⟩ + β|1⟩_E|… with Bob `target` flipped⟩.
pub fn entangle_measure(
    n: usize,
    phi: bool,
    alpha: Complex64,
    beta: Complex64,
    target: usize,
) -> Vec<Branch> {
    let masks = legit_masks(n, phi);
    let w = 1.0 / masks.len() as f64;
    masks
        .into_iter()
        .map(|s| {
            let mut terms = Vec::new();
            for (bits, amp) in masked_ghz(&s) {
                let mut keep = bits.clone();
                keep.push(0);
                terms.push((keep, amp * alpha));
                let mut flipped = bits;
                flipped[target] ^= 1;
                flipped.push(1);
                terms.push((flipped, amp * beta));
            }
            let (alice, bobs) = plain(n);
            Branch {
                weight: w,
                state: state(&terms),
                alice,
                bobs,
                mask: s,
            }
        })
        .collect()
}

/// Alice keeps her qubit of the genuine state; the Bobs receive Eve's
/// substitute GHZ prepared with mask s′. Both blocks sit side by side.
pub fn intercept_resend(n: usize, phi: bool, eve_masks: &[Vec<u8>]) -> Vec<Branch> {
    let masks = legit_masks(n, phi);
    let w = 1.0 / (masks.len() * eve_masks.len()) as f64;
    let mut out = Vec::new();
    for s in &masks {
        for s_eve in eve_masks {
            let mut terms = Vec::new();
            for (a, amp_a) in masked_ghz(s) {
                for (b, amp_b) in masked_ghz(s_eve) {
                    let mut bits = a.clone();
                    bits.extend(&b);
                    terms.push((bits, amp_a * amp_b));
                }
            }
            out.push(Branch {
                weight: w,
                state: state(&terms),
                alice: 0,
                bobs: (n + 2..=2 * n + 1).collect(),
                mask: s.clone(),
            });
        }
    }
    out
}

/// Eve's mask under the default policy: zero on Psi, uniform on Phi.
pub fn default_eve_masks(n: usize, phi: bool) -> Vec<Vec<u8>> {
    if phi {
        all_masks(n)
    } else {
        vec![constant(n, 0)]
    }
}
