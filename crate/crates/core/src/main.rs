use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use quantum_exam::adversary::AttackKind;
use quantum_exam::analysis::{
    estimate_detection, leakage_sweep, write_estimates_csv, write_summary_json, EstimateRow,
    SweepGrid,
};
use quantum_exam::protocol::resource::ResourceKind;
use quantum_exam::runner::{
    error_exit_code, parse_attack, replay, run_scenario, ScenarioConfig, ESTIMATES_FILE,
    SUMMARY_FILE,
};
use quantum_exam::{Basis, ExamError, Result};

/// Simulate the GHZ exam protocols, attack them, and replay transcripts.
///
/// Without a subcommand, runs the scenario described by `--config` and the
/// override flags. Exit status: 0 completed, 2 eavesdropper detected,
/// 3 configuration error, 4 resource error.
#[derive(Parser)]
#[command(name = "qexam", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Check a transcript for internal consistency (0 consistent, 1 not, 3 malformed).
    Replay { path: PathBuf },
    /// Monte Carlo detection probability of one attack on single checks.
    Detect(DetectArgs),
    /// Leakage and detection of a persistent attack on direct problem-giving.
    Sweep(SweepArgs),
}

#[derive(Args, Default)]
struct ScenarioArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// absolute | direct
    #[arg(long)]
    protocol: Option<String>,
    /// give | collect | share-psi | share-phi | full-exam
    #[arg(long)]
    phase: Option<String>,
    #[arg(long)]
    students: Option<usize>,
    #[arg(long)]
    problem_len: Option<usize>,
    #[arg(long)]
    solution_len: Option<usize>,
    #[arg(long)]
    control_rate: Option<f64>,
    #[arg(long)]
    check_fraction: Option<f64>,
    #[arg(long)]
    attack: Option<String>,
    /// Attack parameter `KEY=VALUE`, repeatable.
    #[arg(long = "attack-param", value_name = "K=V")]
    attack_param: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long, default_value = "measure-resend")]
    attack: String,
    #[arg(long = "attack-param", value_name = "K=V")]
    attack_param: Vec<String>,
    #[arg(long, default_value_t = 3)]
    students: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: AttackArgs,
    /// psi | phi
    #[arg(long, default_value = "psi")]
    resource: String,
    /// z | x; both when omitted
    #[arg(long)]
    basis: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: AttackArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
    control_rates: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [8, 16, 32, 64, 128])]
    lengths: Vec<usize>,
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, String>> {
    raw.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| ExamError::Config {
                    field: "attack_params".into(),
                    reason: format!("expected KEY=VALUE, got `{kv}`"),
                })
        })
        .collect()
}

fn parse_attack_kind(name: &str) -> Result<AttackKind> {
    AttackKind::parse(name).ok_or_else(|| ExamError::Config {
        field: "attack".into(),
        reason: format!("unknown attack `{name}`"),
    })
}

fn set(map: &mut Map<String, Value>, key: &str, value: Option<Value>) {
    if let Some(v) = value {
        map.insert(key.to_string(), v);
    }
}

fn scenario_config(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let mut map = match &args.config {
        Some(path) => ScenarioConfig::load(path)?.to_map(),
        None => Map::new(),
    };
    set(&mut map, "protocol", args.protocol.clone().map(Value::from));
    set(&mut map, "phase", args.phase.clone().map(Value::from));
    set(&mut map, "students", args.students.map(Value::from));
    set(&mut map, "problem_len", args.problem_len.map(Value::from));
    set(&mut map, "solution_len", args.solution_len.map(Value::from));
    set(&mut map, "control_rate", args.control_rate.map(Value::from));
    set(
        &mut map,
        "check_fraction",
        args.check_fraction.map(Value::from),
    );
    set(&mut map, "seed", args.seed.map(Value::from));
    set(&mut map, "trials", args.trials.map(Value::from));
    set(
        &mut map,
        "out",
        args.out
            .as_ref()
            .map(|p| Value::from(p.to_string_lossy().into_owned())),
    );
    let file_attack = map.get("attack").cloned();
    set(&mut map, "attack", args.attack.clone().map(Value::from));
    if file_attack.is_some() && map.get("attack") != file_attack.as_ref() {
        // parameters from the file belong to the file's attack
        map.remove("attack_params");
    }
    let mut config = ScenarioConfig::from_map(map)?;
    config
        .attack_params
        .extend(parse_params(&args.attack_param)?);
    Ok(config)
}

fn run(args: &ScenarioArgs) -> Result<i32> {
    let config = scenario_config(args)?;
    let report = run_scenario(&config)?;
    for t in &report.trials {
        let phases: Vec<String> = t
            .phases
            .iter()
            .map(|p| {
                format!(
                    "{}={}",
                    p.phase,
                    serde_json::to_value(&p.status).unwrap()["status"]
                )
            })
            .collect();
        println!("trial {}: {}", t.trial, phases.join(" ").replace('"', ""));
    }
    println!(
        "{} trials: {} completed, {} eve detected ({:.3}s)",
        report.trials.len(),
        report.completed,
        report.eve_detected,
        report.duration_secs
    );
    for path in &report.artifacts {
        println!("wrote {}", path.display());
    }
    Ok(report.exit_code())
}

fn detect(args: &DetectArgs) -> Result<i32> {
    let c = &args.common;
    let attack = parse_attack(
        parse_attack_kind(&c.attack)?,
        &parse_params(&c.attack_param)?,
        c.students,
    )?;
    let resource = match args.resource.as_str() {
        "psi" => ResourceKind::Psi,
        "phi" => ResourceKind::Phi,
        other => {
            return Err(ExamError::InvalidArgument(format!(
                "unknown resource `{other}`"
            )))
        }
    };
    let bases = match args.basis.as_deref() {
        None => vec![Basis::Z, Basis::X],
        Some("z") => vec![Basis::Z],
        Some("x") => vec![Basis::X],
        Some(other) => {
            return Err(ExamError::InvalidArgument(format!(
                "unknown basis `{other}`"
            )))
        }
    };
    let mut estimates = Vec::new();
    for (i, basis) in bases.into_iter().enumerate() {
        let e = estimate_detection(
            &attack,
            resource,
            basis,
            c.students,
            c.trials,
            c.seed.wrapping_add(i as u64),
        )?;
        println!(
            "{} {:?} {:?}: {:.4} [{:.4}, {:.4}] over {} trials",
            e.attack,
            e.phase,
            e.basis,
            e.probability.estimate,
            e.probability.lower,
            e.probability.upper,
            e.trials
        );
        estimates.push(e);
    }
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
        let rows: Vec<EstimateRow> = estimates
            .iter()
            .map(|e| EstimateRow {
                metric: "detection".into(),
                cell: format!("{}/{:?}/{:?}", e.attack, e.phase, e.basis).to_lowercase(),
                trials: e.trials,
                estimate: e.probability.estimate,
                lower: e.probability.lower,
                upper: e.probability.upper,
            })
            .collect();
        write_estimates_csv(&dir.join(ESTIMATES_FILE), &rows)?;
        write_summary_json(&dir.join(SUMMARY_FILE), &estimates)?;
    }
    Ok(0)
}

fn sweep(args: &SweepArgs) -> Result<i32> {
    let c = &args.common;
    let attack = parse_attack(
        parse_attack_kind(&c.attack)?,
        &parse_params(&c.attack_param)?,
        c.students,
    )?;
    // a control round picks Z or X with equal odds
    let mut per_check = 0.0;
    for (i, basis) in [Basis::Z, Basis::X].into_iter().enumerate() {
        let e = estimate_detection(
            &attack,
            ResourceKind::Psi,
            basis,
            c.students,
            c.trials.max(100),
            c.seed ^ (1 << 40) ^ i as u64,
        )?;
        per_check += 0.5 * e.probability.estimate;
    }
    let grid = SweepGrid {
        attack,
        students: c.students,
        control_rates: args.control_rates.clone(),
        message_lengths: args.lengths.clone(),
        trials: c.trials,
        seed: c.seed,
        detection_per_check: Some(per_check),
    };
    let result = leakage_sweep(&grid)?;
    println!("per-check detection {per_check:.4}");
    println!(
        "{:>5} {:>5} {:>10} {:>10} {:>10} {:>10}",
        "c", "M", "leaked", "detected", "model", "msg rounds"
    );
    for r in &result.reports {
        println!(
            "{:>5.2} {:>5} {:>10.3} {:>10.4} {:>10.4} {:>10.3}",
            r.control_rate,
            r.message_len,
            r.leaked_bits.estimate,
            r.detection.estimate,
            r.model_detection.unwrap_or(f64::NAN),
            r.message_rounds.estimate
        );
    }
    println!("{:?}", result.diagnostics);
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
        let mut rows = Vec::new();
        for r in &result.reports {
            let cell = format!("c={}/M={}", r.control_rate, r.message_len);
            for (metric, i) in [
                ("leaked_bits", r.leaked_bits),
                ("message_rounds", r.message_rounds),
                ("detection", r.detection),
            ] {
                rows.push(EstimateRow {
                    metric: metric.into(),
                    cell: cell.clone(),
                    trials: r.trials,
                    estimate: i.estimate,
                    lower: i.lower,
                    upper: i.upper,
                });
            }
        }
        write_estimates_csv(&dir.join(ESTIMATES_FILE), &rows)?;
        write_summary_json(&dir.join(SUMMARY_FILE), &result)?;
    }
    Ok(0)
}

fn replay_command(path: &Path) -> Result<i32> {
    let verdict = replay(path)?;
    for issue in &verdict.inconsistencies {
        println!("line {} (seq {}): {}", issue.line, issue.seq, issue.reason);
    }
    println!(
        "{} events, {} decodes, {} encodes, {} checks verified: {}",
        verdict.events,
        verdict.decodes_verified,
        verdict.encodes_verified,
        verdict.checks_verified,
        if verdict.is_consistent() {
            "consistent"
        } else {
            "INCONSISTENT"
        }
    );
    Ok(if verdict.is_consistent() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 3 } else { 0 });
        }
    };
    let result = match &cli.command {
        None => run(&cli.scenario),
        Some(Command::Replay { path }) => replay_command(path),
        Some(Command::Detect(args)) => detect(args),
        Some(Command::Sweep(args)) => sweep(args),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(error_exit_code(&err) as u8)
        }
    }
}
