use std::collections::BTreeMap;

use serde::Serialize;

use super::stats::chi_square_sf;
use crate::error::{ExamError, Result};
use crate::quantum::Basis;
use crate::transcript::{EventBody, Party, Transcript};

/// One encrypted bit: what the sender meant and what the channel saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PadSample {
    pub sender: Party,
    pub plaintext: u8,
    pub public: u8,
}

/// Every encryption recorded in `transcript`, in order.
pub fn pad_samples(transcript: &Transcript) -> Vec<PadSample> {
    transcript
        .events()
        .iter()
        .filter_map(|e| match e.body {
            EventBody::Encode {
                plaintext, public, ..
            } => Some(PadSample {
                sender: e.actor,
                plaintext,
                public,
            }),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityReport {
    pub samples: usize,
    pub ones: usize,
    /// p-value of the public bits against a fair coin.
    pub uniformity_p: f64,
    /// p-value of the 2×2 independence test between plaintext and public
    /// bit; absent when the plaintext never varies.
    pub independence_p: Option<f64>,
    pub alpha: f64,
    pub passed: bool,
}

/// Chi-square tests that the broadcast bits look like fair coin flips and
/// carry no trace of the plaintext.
pub fn pad_uniformity_test(samples: &[PadSample], alpha: f64) -> Result<UniformityReport> {
    if samples.len() < 1000 {
        return Err(ExamError::invalid(format!(
            "{} pad samples, need at least 1000",
            samples.len()
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(ExamError::invalid(format!(
            "significance level {alpha} outside (0, 1)"
        )));
    }
    let n = samples.len() as f64;
    let ones = samples.iter().filter(|s| s.public == 1).count();
    let half = n / 2.0;
    let stat = ((ones as f64 - half).powi(2) + ((n - ones as f64) - half).powi(2)) / half;
    let uniformity_p = chi_square_sf(stat, 1.0);

    let mut table = [[0f64; 2]; 2];
    for s in samples {
        table[s.plaintext as usize][s.public as usize] += 1.0;
    }
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let independence_p = (rows.iter().chain(&cols).all(|&m| m > 0.0)).then(|| {
        let mut stat = 0.0;
        for (i, row) in table.iter().enumerate() {
            for (j, &observed) in row.iter().enumerate() {
                let expected = rows[i] * cols[j] / n;
                stat += (observed - expected).powi(2) / expected;
            }
        }
        chi_square_sf(stat, 1.0)
    });

    let passed = uniformity_p > alpha && independence_p.is_none_or(|p| p > alpha);
    Ok(UniformityReport {
        samples: samples.len(),
        ones,
        uniformity_p,
        independence_p,
        alpha,
        passed,
    })
}

/// How often Bob `k`, reading Bob `n`'s broadcast with his own Z outcome
/// as the pad, recovers Bob `n`'s solution bit. Returns the hit count and the
/// number of rounds where both were present.
pub fn cross_student_accuracy(transcript: &Transcript, k: usize, n: usize) -> (usize, usize) {
    let spy = Party::Bob(k);
    let victim = Party::Bob(n);
    let mut scope = 0usize;
    let mut pads: BTreeMap<(usize, usize), u8> = BTreeMap::new();
    let mut sent: BTreeMap<(usize, usize), (u8, u8)> = BTreeMap::new();
    for e in transcript.events() {
        match &e.body {
            EventBody::PhaseBoundary { .. } | EventBody::Restart { .. } => scope += 1,
            EventBody::Measurement {
                basis: Basis::Z,
                value,
            } if e.actor == spy => {
                pads.insert((scope, e.m), *value as u8);
            }
            EventBody::Encode {
                plaintext, public, ..
            } if e.actor == victim => {
                sent.insert((scope, e.m), (*plaintext, *public));
            }
            _ => {}
        }
    }
    let mut hits = 0;
    let mut total = 0;
    for (key, (plaintext, public)) in sent {
        if let Some(pad) = pads.get(&key) {
            total += 1;
            if public ^ pad == plaintext {
                hits += 1;
            }
        }
    }
    (hits, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(plaintext: u8, public: u8) -> PadSample {
        PadSample {
            sender: Party::Alice,
            plaintext,
            public,
        }
    }

    #[test]
    fn balanced_independent_bits_pass() {
        let samples: Vec<_> = (0..2000)
            .map(|i| sample((i / 2 % 2) as u8, (i % 2) as u8))
            .collect();
        let r = pad_uniformity_test(&samples, 0.01).unwrap();
        assert!(r.passed);
        assert!(r.independence_p.is_some());
    }

    #[test]
    fn leaking_plaintext_fails() {
        let samples: Vec<_> = (0..2000)
            .map(|i| sample((i % 2) as u8, (i % 2) as u8))
            .collect();
        let r = pad_uniformity_test(&samples, 0.01).unwrap();
        assert!(r.uniformity_p > 0.01);
        assert!(r.independence_p.unwrap() < 1e-6);
        assert!(!r.passed);
    }

    #[test]
    fn biased_public_bits_fail() {
        let samples: Vec<_> = (0..2000).map(|i| sample(1, u8::from(i % 3 != 0))).collect();
        let r = pad_uniformity_test(&samples, 0.01).unwrap();
        assert!(r.independence_p.is_none());
        assert!(!r.passed);
    }

    #[test]
    fn too_few_samples() {
        let samples = vec![sample(0, 0); 999];
        assert!(pad_uniformity_test(&samples, 0.01).is_err());
    }

    #[test]
    fn cross_accuracy_pairs_by_round() {
        let mut t = Transcript::new();
        t.record(
            0,
            Party::Alice,
            EventBody::PhaseBoundary { phase: "x".into() },
        );
        t.record(
            1,
            Party::Bob(2),
            EventBody::Measurement {
                basis: Basis::Z,
                value: 1,
            },
        );
        t.record(
            1,
            Party::Bob(1),
            EventBody::Encode {
                plaintext: 0,
                pad: 0,
                public: 1,
            },
        );
        t.record(
            2,
            Party::Bob(2),
            EventBody::Measurement {
                basis: Basis::Z,
                value: 0,
            },
        );
        t.record(
            2,
            Party::Bob(1),
            EventBody::Encode {
                plaintext: 1,
                pad: 1,
                public: 0,
            },
        );
        t.record(
            3,
            Party::Bob(1),
            EventBody::Encode {
                plaintext: 1,
                pad: 1,
                public: 0,
            },
        );
        assert_eq!(cross_student_accuracy(&t, 2, 1), (1, 2));
    }
}
