use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use quantum_exam::adversary::{Attack, AttackConfig, EveMask};
use quantum_exam::analysis::{
    cross_student_accuracy, estimate_detection, leakage_sweep, pad_samples, pad_uniformity_test,
    trial_rng, GeometricModel, PadSample, SweepGrid,
};
use quantum_exam::protocol::resource::ResourceKind;
use quantum_exam::protocol::{DirectConfig, SharingConfig};
use quantum_exam::replay::replay_transcript;
use quantum_exam::transcript::{AbortCause, EventBody};
use quantum_exam::{Basis, BitString, ExamSession, Party, ProtocolStatus, Transcript};

fn session(students: usize, attack: Attack, seed: u64) -> ExamSession<ChaCha8Rng> {
    ExamSession::new(
        students,
        AttackConfig::every_round(attack),
        ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap()
}

fn give_transcript(students: usize, problem: &BitString, seed: u64) -> Transcript {
    let mut s = session(students, Attack::None, seed);
    let (mut pool, _) = s
        .share_psi(&SharingConfig::for_payload(problem.len(), 0.25))
        .unwrap();
    s.give_problem(&mut pool, problem).unwrap();
    s.into_parts().0
}

#[test]
fn broadcasts_are_uniform_and_independent_of_the_problem() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let problem = BitString::random(10_000, &mut rng);
    let samples = pad_samples(&give_transcript(2, &problem, 2));
    assert_eq!(samples.len(), 10_000);
    let report = pad_uniformity_test(&samples, 0.01).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(report.independence_p.is_some());
}

#[test]
fn constant_problem_still_gives_uniform_broadcasts() {
    let samples = pad_samples(&give_transcript(3, &BitString::constant(10_000, 1), 3));
    let report = pad_uniformity_test(&samples, 0.01).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn pad_test_rejects_an_engine_without_pads() {
    // j = 0 always: the broadcast is the plaintext
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples: Vec<PadSample> = BitString::random(5000, &mut rng)
        .bits()
        .iter()
        .map(|&q| PadSample {
            sender: Party::Alice,
            plaintext: q,
            public: q,
        })
        .collect();
    assert!(!pad_uniformity_test(&samples, 0.01).unwrap().passed);
    let constant: Vec<PadSample> = samples
        .iter()
        .map(|s| PadSample {
            plaintext: 1,
            public: 1,
            ..*s
        })
        .collect();
    assert!(!pad_uniformity_test(&constant, 0.01).unwrap().passed);
}

#[test]
fn students_cannot_read_each_other() {
    let mut s = session(3, Attack::None, 5);
    let solutions: Vec<BitString> = (0..3).map(|_| BitString::random(10_000, s.rng())).collect();
    let (mut pool, _) = s
        .share_phi(&SharingConfig::for_payload(10_000, 0.25))
        .unwrap();
    let out = s.collect_solutions(&mut pool, &solutions).unwrap();
    assert_eq!(out.solutions[&2], solutions[1]);
    for (k, n) in [(1, 2), (2, 3), (3, 1)] {
        let (hits, total) = cross_student_accuracy(s.transcript(), k, n);
        assert_eq!(total, 10_000);
        let rate = hits as f64 / total as f64;
        assert!((rate - 0.5).abs() < 0.02, "bob {k} reading bob {n}: {rate}");
    }
}

#[test]
fn direct_round_counts_follow_geometric_thinning() {
    let mean_rounds = |c: f64, m: usize, students: usize| {
        let runs = 400;
        let total: usize = (0..runs)
            .map(|i| {
                let mut s =
                    ExamSession::new(students, AttackConfig::none(), trial_rng(6, 0, i)).unwrap();
                let payload = BitString::random(m, s.rng());
                let out = if students == 1 {
                    s.direct_give_problem(&payload, &DirectConfig::new(c))
                        .unwrap()
                } else {
                    let sols = vec![payload; students];
                    s.direct_collect_solutions(&sols, &DirectConfig::new(c))
                        .unwrap()
                };
                assert!(out.is_completed());
                out.stats.rounds
            })
            .sum();
        total as f64 / runs as f64
    };
    // M/(1−c): 32 and 80, with generous sampling slack
    assert!((mean_rounds(0.5, 16, 1) - 32.0).abs() < 1.5);
    assert!((mean_rounds(0.9, 8, 2) - 80.0).abs() < 5.0);
}

#[test]
fn persistent_measure_resend_is_caught_on_long_problems() {
    let runs = 200;
    let caught = (0..runs)
        .filter(|&i| {
            let mut s = ExamSession::new(
                2,
                AttackConfig::every_round(Attack::MeasureResend),
                trial_rng(7, 0, i),
            )
            .unwrap();
            let q = BitString::random(40, s.rng());
            s.direct_give_problem(&q, &DirectConfig::new(0.5))
                .unwrap()
                .eve_detected()
        })
        .count();
    assert!(caught as f64 / runs as f64 >= 0.99, "{caught}/{runs}");
}

#[test]
fn intercept_resend_without_checks_reads_every_solution() {
    let mut s = session(
        3,
        Attack::InterceptResend {
            mask: EveMask::Auto,
        },
        8,
    );
    let sols: Vec<BitString> = (0..3).map(|_| BitString::random(20, s.rng())).collect();
    let out = s
        .direct_collect_solutions(&sols, &DirectConfig::new(0.0))
        .unwrap();
    assert!(out.is_completed());
    for (n, truth) in sols.iter().enumerate() {
        let guesses = &s.eve().solutions[n];
        assert_eq!(guesses.len(), 20);
        assert!(guesses
            .iter()
            .all(|e| e.informed && truth.get(e.position) == Some(e.bit)));
    }
}

#[test]
fn entangle_measure_on_collect_checks() {
    let cfg = AttackConfig::every_round(Attack::entangle_measure(0.25, 1));
    let z = estimate_detection(&cfg, ResourceKind::Phi, Basis::Z, 3, 10_000, 9).unwrap();
    assert!((z.probability.estimate - 0.25).abs() < 0.015, "{z:?}");
}

#[test]
fn detection_estimates_from_the_operation_examples() {
    let mr = AttackConfig::every_round(Attack::MeasureResend);
    let e = estimate_detection(&mr, ResourceKind::Psi, Basis::X, 3, 10_000, 10).unwrap();
    assert!((e.probability.estimate - 0.5).abs() < 0.015);
    assert!(e.probability.contains(0.5));
    let d = AttackConfig::every_round(Attack::Disturbance);
    let e = estimate_detection(&d, ResourceKind::Psi, Basis::X, 3, 10_000, 11).unwrap();
    assert_eq!(e.detections, 0);
    let em = AttackConfig::every_round(Attack::entangle_measure(0.25, 1));
    let e = estimate_detection(&em, ResourceKind::Psi, Basis::Z, 3, 10_000, 12).unwrap();
    assert!((e.probability.estimate - 0.25).abs() < 0.015);
}

#[test]
fn leakage_sweep_matches_the_geometric_model() {
    let grid = SweepGrid {
        attack: AttackConfig::every_round(Attack::MeasureResend),
        students: 2,
        control_rates: vec![0.0, 0.5],
        message_lengths: vec![16, 2048],
        trials: 1000,
        seed: 13,
        detection_per_check: Some(0.25),
    };
    let sweep = leakage_sweep(&grid).unwrap();
    let none = sweep.cell(0.0, 16).unwrap();
    assert_eq!(none.detection.estimate, 0.0);
    assert_eq!(none.leaked_bits.estimate, 16.0);
    let long = sweep.cell(0.5, 2048).unwrap();
    let model = GeometricModel::new(0.5, 0.25).mean_messages_before_detection();
    assert!(
        (long.message_rounds.estimate - model).abs() / model < 0.1,
        "{long:?}"
    );
    assert!(long.detection.estimate > 0.999);
    assert!(sweep.diagnostics.detection_non_decreasing_in_m);
}

#[test]
fn masquerade_is_exposed_on_the_classical_channel() {
    let cases = [
        (Party::Bob(2), ResourceKind::Psi),
        (Party::Alice, ResourceKind::Phi),
        (Party::Bob(1), ResourceKind::Psi),
    ];
    for (party, kind) in cases {
        let mut s = session(
            3,
            Attack::Masquerade {
                impersonated: party,
            },
            14,
        );
        let (pool, out) = s
            .share_with_restarts(kind, &SharingConfig::default())
            .unwrap();
        assert!(pool.is_empty());
        assert_eq!(
            out.status,
            ProtocolStatus::AbortedEveDetected {
                cause: AbortCause::Masquerade {
                    impersonated: party
                }
            }
        );
    }
    let mut s = session(3, Attack::None, 15);
    s.share_with_restarts(ResourceKind::Psi, &SharingConfig::default())
        .unwrap();
    assert!(!s.transcript().events().iter().any(|e| matches!(
        e.body,
        EventBody::Abort { .. }
            | EventBody::AuthNotice {
                authentic: false,
                ..
            }
    )));
}

#[test]
fn authenticate_exchange_flags_the_impersonated_bob() {
    let receivers: Vec<Party> = (1..=3).map(Party::Bob).collect();
    let mut honest = session(3, Attack::None, 16);
    assert_eq!(honest.authenticate_exchange(1, &receivers), Ok(()));
    let mut s = session(
        3,
        Attack::Masquerade {
            impersonated: Party::Bob(2),
        },
        16,
    );
    assert_eq!(
        s.authenticate_exchange(1, &receivers),
        Err(AbortCause::Masquerade {
            impersonated: Party::Bob(2)
        })
    );
    let bad = s
        .transcript()
        .events()
        .iter()
        .find(|e| {
            matches!(
                e.body,
                EventBody::QubitReceiptConfirmed {
                    authentic: false,
                    ..
                }
            )
        })
        .unwrap();
    assert_eq!(bad.actor, Party::Bob(2));
}

#[test]
fn replay_flags_a_flipped_broadcast_at_that_event() {
    let t = give_transcript(2, &BitString::constant(8, 1), 17);
    assert!(replay_transcript(&t).is_consistent());
    let mut events = t.events().to_vec();
    let target = events
        .iter()
        .position(|e| matches!(e.body, EventBody::PublicBit { .. }) && e.actor == Party::Alice)
        .unwrap();
    if let EventBody::PublicBit { value } = &mut events[target].body {
        *value ^= 1;
    }
    let seq = events[target].seq;
    let verdict = replay_transcript(&Transcript::from_events(events));
    assert!(!verdict.is_consistent());
    assert!(
        verdict.inconsistencies.iter().any(|i| i.seq == seq),
        "{verdict:?}"
    );
}

#[test]
fn aborted_run_replays_cleanly_up_to_the_abort() {
    let mut s = session(2, Attack::MeasureResend, 18);
    let q = BitString::random(200, s.rng());
    let out = s.direct_give_problem(&q, &DirectConfig::new(0.5)).unwrap();
    assert!(out.eve_detected());
    let verdict = replay_transcript(s.transcript());
    assert!(verdict.is_consistent(), "{verdict:?}");
    let last = s.transcript().events().last().unwrap();
    assert_eq!(verdict.aborted_at, Some(last.seq));
}

#[test]
fn same_seed_same_bytes() {
    let run = |seed| {
        let mut s = session(3, Attack::entangle_measure(0.1, 2), seed);
        let q = BitString::random(32, s.rng());
        s.direct_give_problem(&q, &DirectConfig::new(0.3)).unwrap();
        s.transcript().to_jsonl()
    };
    assert_eq!(run(19), run(19));
    assert_ne!(run(19), run(20));
}
