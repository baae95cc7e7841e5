use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Phase, ProtocolKind, ScenarioConfig};
use crate::adversary::{AttackConfig, EveKnowledge};
use crate::analysis::{
    trial_rng, wilson_interval, write_estimates_csv, write_summary_json, EstimateRow, Interval,
};
use crate::bits::BitString;
use crate::error::Result;
use crate::protocol::resource::ResourceKind;
use crate::protocol::{
    DirectConfig, ExamSession, ProtocolOutcome, ProtocolStats, ProtocolStatus, SharingConfig,
};
use crate::transcript::Transcript;

pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ESTIMATES_FILE: &str = "estimates.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub phase: String,
    #[serde(flatten)]
    pub status: ProtocolStatus,
    pub stats: ProtocolStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    /// Status of the last phase that ran.
    #[serde(flatten)]
    pub status: ProtocolStatus,
    pub phases: Vec<PhaseSummary>,
    /// Problem bits some Bob decoded wrongly, summed over Bobs.
    pub problem_errors: usize,
    /// Solution bits Alice decoded wrongly, summed over Bobs.
    pub solution_errors: usize,
    /// Message bits Eve put a guess on, and how many of those were right.
    pub eve_guesses: usize,
    pub eve_correct: usize,
    pub events: usize,
}

impl TrialSummary {
    pub fn eve_detected(&self) -> bool {
        matches!(self.status, ProtocolStatus::AbortedEveDetected { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub trials: Vec<TrialSummary>,
    pub completed: usize,
    pub eve_detected: usize,
    pub detection_rate: Interval,
    pub artifacts: Vec<PathBuf>,
    pub duration_secs: f64,
    /// Transcript of trial 0.
    #[serde(skip)]
    pub transcript: Transcript,
}

impl RunReport {
    /// Exit status for the command line: 2 when Eve was caught in any trial.
    pub fn exit_code(&self) -> i32 {
        if self.eve_detected > 0 {
            2
        } else {
            0
        }
    }

    pub fn estimate_rows(&self) -> Vec<EstimateRow> {
        let n = self.trials.len();
        let cell = format!(
            "{}/{}/{}",
            protocol_name(self.config.protocol),
            self.config.phase,
            self.config.attack
        );
        let row = |metric: &str, trials: usize, i: Interval| EstimateRow {
            metric: metric.into(),
            cell: cell.clone(),
            trials,
            estimate: i.estimate,
            lower: i.lower,
            upper: i.upper,
        };
        let mut rows = vec![
            row("completion", n, wilson_interval(self.completed, n, 0.95)),
            row("eve_detected", n, self.detection_rate),
        ];
        let errors = self
            .trials
            .iter()
            .filter(|t| t.problem_errors + t.solution_errors > 0)
            .count();
        rows.push(row("decode_error_run", n, wilson_interval(errors, n, 0.95)));
        let guesses: usize = self.trials.iter().map(|t| t.eve_guesses).sum();
        if guesses > 0 {
            let correct = self.trials.iter().map(|t| t.eve_correct).sum();
            rows.push(row(
                "eve_bit_accuracy",
                guesses,
                wilson_interval(correct, guesses, 0.95),
            ));
        }
        rows
    }
}

fn protocol_name(p: ProtocolKind) -> &'static str {
    match p {
        ProtocolKind::Absolute => "absolute",
        ProtocolKind::Direct => "direct",
    }
}

struct TrialRun {
    summary: TrialSummary,
    transcript: Option<Transcript>,
}

/// Runs every trial of `config` and writes the artifacts when `out` is set.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    let start = Instant::now();
    config.validate()?;
    let attack = config.attack_config()?;
    let runs: Vec<TrialRun> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, &attack, i))
        .collect::<Result<_>>()?;

    let mut transcript = Transcript::new();
    let mut trials = Vec::with_capacity(runs.len());
    for run in runs {
        if let Some(t) = run.transcript {
            transcript = t;
        }
        trials.push(run.summary);
    }
    let completed = trials
        .iter()
        .filter(|t| t.status == ProtocolStatus::Completed)
        .count();
    let eve_detected = trials.iter().filter(|t| t.eve_detected()).count();
    let mut report = RunReport {
        config: config.clone(),
        detection_rate: wilson_interval(eve_detected, trials.len(), 0.95),
        trials,
        completed,
        eve_detected,
        artifacts: Vec::new(),
        duration_secs: 0.0,
        transcript,
    };
    if let Some(dir) = &config.out {
        std::fs::create_dir_all(dir)?;
        let paths = [TRANSCRIPT_FILE, ESTIMATES_FILE, SUMMARY_FILE].map(|f| dir.join(f));
        report.transcript.write_jsonl(&paths[0])?;
        write_estimates_csv(&paths[1], &report.estimate_rows())?;
        report.artifacts = paths.to_vec();
        report.duration_secs = start.elapsed().as_secs_f64();
        write_summary_json(&paths[2], &report)?;
    } else {
        report.duration_secs = start.elapsed().as_secs_f64();
    }
    Ok(report)
}

fn run_trial(config: &ScenarioConfig, attack: &AttackConfig, trial: usize) -> Result<TrialRun> {
    let mut session = ExamSession::new(
        config.students,
        attack.clone(),
        trial_rng(config.seed, 0, trial as u32),
    )?;
    let problem = match &config.problem {
        Some(q) => q.clone(),
        None => BitString::random(config.problem_len, session.rng()),
    };
    let solutions = match &config.solutions {
        Some(r) => r.clone(),
        None => (0..config.students)
            .map(|_| BitString::random(config.solution_len, session.rng()))
            .collect(),
    };

    let mut phases = Vec::new();
    let mut problem_errors = 0;
    let mut solution_errors = 0;
    let gives = matches!(config.phase, Phase::Give | Phase::FullExam);
    let collects = matches!(config.phase, Phase::Collect | Phase::FullExam);

    let mut record = |name: &str, outcome: &ProtocolOutcome| -> bool {
        for copy in outcome.problem_copies.values() {
            problem_errors += copy.hamming(&problem) + problem.len().abs_diff(copy.len());
        }
        for (bob, got) in &outcome.solutions {
            let want = &solutions[bob - 1];
            solution_errors += got.hamming(want) + want.len().abs_diff(got.len());
        }
        phases.push(PhaseSummary {
            phase: name.into(),
            status: outcome.status.clone(),
            stats: outcome.stats.clone(),
        });
        outcome.is_completed()
    };

    match config.protocol {
        ProtocolKind::Absolute => {
            let mut ok = true;
            if matches!(config.phase, Phase::SharePsi) || gives {
                let sharing = SharingConfig::for_payload(config.problem_len, config.check_fraction);
                let (mut pool, out) = session.share_with_restarts(ResourceKind::Psi, &sharing)?;
                ok = record("share-psi", &out);
                if ok && gives {
                    let out = session.give_problem(&mut pool, &problem)?;
                    ok = record("give", &out);
                }
            }
            if ok && config.phase == Phase::FullExam {
                session.mark_phase("exam_period");
            }
            if ok && (matches!(config.phase, Phase::SharePhi) || collects) {
                let sharing =
                    SharingConfig::for_payload(config.solution_len, config.check_fraction);
                let (mut pool, out) = session.share_with_restarts(ResourceKind::Phi, &sharing)?;
                ok = record("share-phi", &out);
                if ok && collects {
                    let out = session.collect_solutions(&mut pool, &solutions)?;
                    record("collect", &out);
                }
            }
        }
        ProtocolKind::Direct => {
            let direct = DirectConfig::new(config.control_rate);
            let mut ok = true;
            if gives {
                let out = session.direct_give_problem(&problem, &direct)?;
                ok = record("give", &out);
            }
            if ok && config.phase == Phase::FullExam {
                session.mark_phase("exam_period");
            }
            if ok && collects {
                let out = session.direct_collect_solutions(&solutions, &direct)?;
                record("collect", &out);
            }
        }
    }

    let status = phases
        .last()
        .map(|p| p.status.clone())
        .unwrap_or(ProtocolStatus::Completed);
    let (transcript, eve) = session.into_parts();
    let (eve_guesses, eve_correct) = score_eve(&eve, &problem, &solutions);
    Ok(TrialRun {
        summary: TrialSummary {
            trial,
            status,
            phases,
            problem_errors,
            solution_errors,
            eve_guesses,
            eve_correct,
            events: transcript.len(),
        },
        transcript: (trial == 0).then_some(transcript),
    })
}

fn score_eve(eve: &EveKnowledge, problem: &BitString, solutions: &[BitString]) -> (usize, usize) {
    let mut guesses = 0;
    let mut correct = 0;
    let streams =
        std::iter::once((&eve.problem, problem)).chain(eve.solutions.iter().zip(solutions));
    for (estimates, truth) in streams {
        for e in estimates {
            guesses += 1;
            if truth.get(e.position) == Some(e.bit) {
                correct += 1;
            }
        }
    }
    (guesses, correct)
}
