use rayon::prelude::*;
use serde::Serialize;

use super::stats::{mean_and_half_width, wilson_interval, Interval};
use super::trial_rng;
use crate::adversary::AttackConfig;
use crate::bits::BitString;
use crate::error::{ExamError, Result};
use crate::protocol::{DirectConfig, ExamSession};

/// Closed-form model of a persistent attack on the direct protocol.
///
/// Every round is a control round with probability `c`, and a control round
/// exposes the attack with probability `p`. Rounds that are neither
/// messages nor detections do not matter, so each relevant round is a
/// message with probability `q = (1−c)/(1−c+cp)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricModel {
    pub control_rate: f64,
    pub detection_per_check: f64,
}

impl GeometricModel {
    pub fn new(control_rate: f64, detection_per_check: f64) -> Self {
        GeometricModel {
            control_rate,
            detection_per_check,
        }
    }

    pub fn message_survival(&self) -> f64 {
        let c = self.control_rate;
        let cp = c * self.detection_per_check;
        if cp == 0.0 {
            1.0
        } else {
            (1.0 - c) / (1.0 - c + cp)
        }
    }

    /// Mean number of message rounds before the first detection, (1−c)/(cp).
    pub fn mean_messages_before_detection(&self) -> f64 {
        let cp = self.control_rate * self.detection_per_check;
        if cp == 0.0 {
            f64::INFINITY
        } else {
            (1.0 - self.control_rate) / cp
        }
    }

    /// Probability that a run carrying `message_len` bits is stopped early.
    pub fn detection_probability(&self, message_len: usize) -> f64 {
        1.0 - self.message_survival().powi(message_len as i32)
    }

    /// Mean message rounds completed in a run of `message_len` bits,
    /// E[min(K, M)] = Σ_{k=1..M} q^k.
    pub fn mean_messages_truncated(&self, message_len: usize) -> f64 {
        let q = self.message_survival();
        if q >= 1.0 {
            message_len as f64
        } else {
            q * (1.0 - q.powi(message_len as i32)) / (1.0 - q)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub attack: AttackConfig,
    pub students: usize,
    pub control_rates: Vec<f64>,
    pub message_lengths: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Per-check detection probability for the geometric model columns.
    pub detection_per_check: Option<f64>,
}

impl SweepGrid {
    /// c ∈ {0.1, …, 0.9}, M ∈ {8, 16, 32, 64, 128}, 10³ trials per cell.
    pub fn default_grid(attack: AttackConfig, students: usize, seed: u64) -> Self {
        SweepGrid {
            attack,
            students,
            control_rates: (1..=9).map(|i| i as f64 / 10.0).collect(),
            message_lengths: vec![8, 16, 32, 64, 128],
            trials: 1000,
            seed,
            detection_per_check: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageReport {
    pub control_rate: f64,
    pub message_len: usize,
    pub trials: usize,
    /// Message bits Eve decoded correctly before the run ended.
    pub leaked_bits: Interval,
    /// Message rounds completed before detection (or the end of the run).
    pub message_rounds: Interval,
    pub detection: Interval,
    pub model_detection: Option<f64>,
    pub model_message_rounds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepDiagnostics {
    /// Leakage never rises with c beyond the 95% bands, for every M.
    pub leakage_non_increasing_in_c: bool,
    /// Point estimates of leakage fall strictly with c, for every M.
    pub leakage_strictly_decreasing_in_c: bool,
    /// Detection never falls with M beyond the 95% bands, for every c.
    pub detection_non_decreasing_in_m: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageSweep {
    pub reports: Vec<LeakageReport>,
    pub diagnostics: SweepDiagnostics,
}

impl LeakageSweep {
    pub fn cell(&self, control_rate: f64, message_len: usize) -> Option<&LeakageReport> {
        self.reports
            .iter()
            .find(|r| r.control_rate == control_rate && r.message_len == message_len)
    }
}

struct Trial {
    leaked: usize,
    messages: usize,
    detected: bool,
}

fn run_trial(grid: &SweepGrid, c: f64, m: usize, cell: u32, trial: u32) -> Result<Trial> {
    let mut session = ExamSession::new(
        grid.students,
        grid.attack.clone(),
        trial_rng(grid.seed, cell, trial),
    )?;
    let problem = BitString::random(m, session.rng());
    let outcome = session.direct_give_problem(&problem, &DirectConfig::new(c))?;
    // runs stop at the first detection, so every estimate predates it
    let leaked = session
        .eve()
        .problem
        .iter()
        .filter(|e| problem.get(e.position) == Some(e.bit))
        .count();
    Ok(Trial {
        leaked,
        messages: outcome.stats.message_rounds,
        detected: outcome.eve_detected(),
    })
}

/// Direct problem-giving under a persistent attack, over a grid of control
/// rates and problem lengths.
pub fn leakage_sweep(grid: &SweepGrid) -> Result<LeakageSweep> {
    if let Some(c) = grid.control_rates.iter().find(|c| !(0.0..1.0).contains(*c)) {
        return Err(ExamError::invalid(format!(
            "control rate {c} outside [0, 1)"
        )));
    }
    let mut reports = Vec::new();
    let mut cell = 0u32;
    for &c in &grid.control_rates {
        for &m in &grid.message_lengths {
            let trials: Vec<Trial> = (0..grid.trials as u32)
                .into_par_iter()
                .map(|i| run_trial(grid, c, m, cell, i))
                .collect::<Result<_>>()?;
            let leaked: Vec<f64> = trials.iter().map(|t| t.leaked as f64).collect();
            let messages: Vec<f64> = trials.iter().map(|t| t.messages as f64).collect();
            let detected = trials.iter().filter(|t| t.detected).count();
            let model = grid.detection_per_check.map(|p| GeometricModel::new(c, p));
            reports.push(LeakageReport {
                control_rate: c,
                message_len: m,
                trials: grid.trials,
                leaked_bits: mean_and_half_width(&leaked, 0.95),
                message_rounds: mean_and_half_width(&messages, 0.95),
                detection: wilson_interval(detected, grid.trials, 0.95),
                model_detection: model.map(|g| g.detection_probability(m)),
                model_message_rounds: model.map(|g| g.mean_messages_truncated(m)),
            });
            cell += 1;
        }
    }
    let diagnostics = diagnose(grid, &reports);
    Ok(LeakageSweep {
        reports,
        diagnostics,
    })
}

fn diagnose(grid: &SweepGrid, reports: &[LeakageReport]) -> SweepDiagnostics {
    let mut non_increasing = true;
    let mut strictly = true;
    let mut detection_ok = true;
    let idx = |ci: usize, mi: usize| ci * grid.message_lengths.len() + mi;
    for mi in 0..grid.message_lengths.len() {
        for ci in 1..grid.control_rates.len() {
            let prev = &reports[idx(ci - 1, mi)].leaked_bits;
            let next = &reports[idx(ci, mi)].leaked_bits;
            if next.estimate > prev.estimate + prev.half_width() + next.half_width() {
                non_increasing = false;
            }
            if next.estimate >= prev.estimate {
                strictly = false;
            }
        }
    }
    for ci in 0..grid.control_rates.len() {
        for mi in 1..grid.message_lengths.len() {
            let prev = &reports[idx(ci, mi - 1)].detection;
            let next = &reports[idx(ci, mi)].detection;
            if next.estimate + next.half_width() + prev.half_width() < prev.estimate {
                detection_ok = false;
            }
        }
    }
    SweepDiagnostics {
        leakage_non_increasing_in_c: non_increasing,
        leakage_strictly_decreasing_in_c: strictly,
        detection_non_decreasing_in_m: detection_ok,
    }
}
