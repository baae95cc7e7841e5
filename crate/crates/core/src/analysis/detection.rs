use rayon::prelude::*;
use serde::Serialize;

use super::stats::{wilson_interval, Interval};
use super::trial_rng;
use crate::adversary::{AttackConfig, AttackKind};
use crate::error::{ExamError, Result};
use crate::protocol::resource::ResourceKind;
use crate::protocol::ExamSession;
use crate::quantum::Basis;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionEstimate {
    pub attack: AttackKind,
    pub phase: ResourceKind,
    pub basis: Basis,
    pub students: usize,
    pub trials: usize,
    pub detections: usize,
    /// Per-check detection frequency with its 95% Wilson interval.
    pub probability: Interval,
}

/// Runs `trials` independent single-resource experiments: Alice prepares one
/// resource of `phase`, Eve attacks it in flight, and the parties check it
/// in `basis`. A trial counts as a detection when the check fails or the
/// distribution is aborted on the classical channel.
pub fn estimate_detection(
    attack: &AttackConfig,
    phase: ResourceKind,
    basis: Basis,
    students: usize,
    trials: usize,
    seed: u64,
) -> Result<DetectionEstimate> {
    if trials < 100 {
        return Err(ExamError::invalid(format!(
            "{trials} trials, need at least 100"
        )));
    }
    let results: Vec<bool> = (0..trials as u32)
        .into_par_iter()
        .map(|i| {
            let mut session = ExamSession::new(students, attack.clone(), trial_rng(seed, 0, i))?;
            Ok(session.check_once(1, phase, basis)? != Some(true))
        })
        .collect::<Result<_>>()?;
    let detections = results.iter().filter(|&&d| d).count();
    Ok(DetectionEstimate {
        attack: attack.kind(),
        phase,
        basis,
        students,
        trials,
        detections,
        probability: wilson_interval(detections, trials, 0.95),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Attack;

    #[test]
    fn honest_channel_is_never_flagged() {
        for basis in [Basis::Z, Basis::X] {
            let e = estimate_detection(&AttackConfig::none(), ResourceKind::Phi, basis, 3, 500, 1)
                .unwrap();
            assert_eq!(e.detections, 0);
        }
    }

    #[test]
    fn disturbance_invisible_in_x() {
        let cfg = AttackConfig::every_round(Attack::Disturbance);
        let e = estimate_detection(&cfg, ResourceKind::Phi, Basis::X, 3, 1000, 2).unwrap();
        assert_eq!(e.detections, 0);
    }

    #[test]
    fn needs_enough_trials() {
        assert!(
            estimate_detection(&AttackConfig::none(), ResourceKind::Psi, Basis::Z, 1, 99, 0)
                .is_err()
        );
    }

    #[test]
    fn same_seed_same_estimate() {
        let cfg = AttackConfig::every_round(Attack::MeasureResend);
        let a = estimate_detection(&cfg, ResourceKind::Psi, Basis::X, 2, 400, 9).unwrap();
        let b = estimate_detection(&cfg, ResourceKind::Psi, Basis::X, 2, 400, 9).unwrap();
        assert_eq!(a, b);
    }
}
