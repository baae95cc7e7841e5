use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::adversary::{Attack, AttackConfig, AttackKind, EveMask, TargetRounds};
use crate::bits::BitString;
use crate::error::{ExamError, Result};
use crate::quantum::{ShiftMask, MAX_QUBITS};
use crate::transcript::Party;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Absolute,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    #[serde(alias = "give_problem")]
    Give,
    #[serde(alias = "collect_solutions")]
    Collect,
    #[serde(alias = "share_psi")]
    SharePsi,
    #[serde(alias = "share_phi")]
    SharePhi,
    #[serde(alias = "full_exam")]
    FullExam,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Phase::Give => "give",
            Phase::Collect => "collect",
            Phase::SharePsi => "share-psi",
            Phase::SharePhi => "share-phi",
            Phase::FullExam => "full-exam",
        };
        f.write_str(name)
    }
}

/// Everything needed to reproduce a run. Serialized as one flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub protocol: ProtocolKind,
    pub phase: Phase,
    pub students: usize,
    pub problem_len: usize,
    pub solution_len: usize,
    pub control_rate: f64,
    pub check_fraction: f64,
    pub attack: AttackKind,
    /// Attack parameters as written, e.g. `beta = "0.5"`, `party = "bob:2"`.
    pub attack_params: BTreeMap<String, String>,
    pub seed: u64,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Fixed problem; drawn from the trial's random source when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<BitString>,
    /// Fixed solutions, one per student.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solutions: Option<Vec<BitString>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: ProtocolKind::Absolute,
            phase: Phase::FullExam,
            students: 3,
            problem_len: 16,
            solution_len: 16,
            control_rate: 0.5,
            check_fraction: 0.25,
            attack: AttackKind::None,
            attack_params: BTreeMap::new(),
            seed: 0,
            trials: 1,
            out: None,
            problem: None,
            solutions: None,
        }
    }
}

const FIELDS: [&str; 14] = [
    "protocol",
    "phase",
    "students",
    "problem_len",
    "solution_len",
    "control_rate",
    "check_fraction",
    "attack",
    "attack_params",
    "seed",
    "trials",
    "out",
    "problem",
    "solutions",
];

fn take<T: DeserializeOwned>(
    map: &mut Map<String, Value>,
    field: &str,
    slot: &mut T,
) -> Result<()> {
    if let Some(value) = map.remove(field) {
        *slot =
            serde_json::from_value(value).map_err(|e| ExamError::config(field, e.to_string()))?;
    }
    Ok(())
}

impl ScenarioConfig {
    /// Builds a config from a JSON object, starting from the defaults.
    /// Unknown keys and ill-typed values are reported by field name.
    pub fn from_map(mut map: Map<String, Value>) -> Result<Self> {
        if let Some(unknown) = map.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(ExamError::config(unknown.clone(), "unknown field"));
        }
        let mut c = ScenarioConfig::default();
        take(&mut map, "protocol", &mut c.protocol)?;
        take(&mut map, "phase", &mut c.phase)?;
        take(&mut map, "students", &mut c.students)?;
        take(&mut map, "problem_len", &mut c.problem_len)?;
        take(&mut map, "solution_len", &mut c.solution_len)?;
        take(&mut map, "control_rate", &mut c.control_rate)?;
        take(&mut map, "check_fraction", &mut c.check_fraction)?;
        take(&mut map, "attack_params", &mut c.attack_params)?;
        take(&mut map, "seed", &mut c.seed)?;
        take(&mut map, "trials", &mut c.trials)?;
        take(&mut map, "out", &mut c.out)?;
        take(&mut map, "problem", &mut c.problem)?;
        take(&mut map, "solutions", &mut c.solutions)?;
        if let Some(value) = map.remove("attack") {
            let name = value
                .as_str()
                .ok_or_else(|| ExamError::config("attack", "expected a string"))?;
            c.attack = AttackKind::parse(name)
                .ok_or_else(|| ExamError::config("attack", format!("unknown attack `{name}`")))?;
        }
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| ExamError::config("<document>", e.to_string()))?;
        match value {
            Value::Object(map) => Self::from_map(map),
            _ => Err(ExamError::config("<document>", "expected a JSON object")),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_map(&self) -> Map<String, Value> {
        match serde_json::to_value(self).expect("config serializes") {
            Value::Object(map) => map,
            _ => unreachable!("config is a struct"),
        }
    }

    /// Range checks, attack parameters and the qubit budget.
    pub fn validate(&self) -> Result<()> {
        if self.students == 0 {
            return Err(ExamError::config("students", "need at least one student"));
        }
        if self.problem_len == 0 {
            return Err(ExamError::config("problem_len", "must be at least 1"));
        }
        if self.solution_len == 0 {
            return Err(ExamError::config("solution_len", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.control_rate) {
            return Err(ExamError::config("control_rate", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.check_fraction) {
            return Err(ExamError::config("check_fraction", "must lie in [0, 1)"));
        }
        if self.trials == 0 {
            return Err(ExamError::config("trials", "must be at least 1"));
        }
        if self.protocol == ProtocolKind::Direct
            && matches!(self.phase, Phase::SharePsi | Phase::SharePhi)
        {
            return Err(ExamError::config(
                "phase",
                "the direct protocol has no sharing phase",
            ));
        }
        if let Some(q) = &self.problem {
            if q.len() != self.problem_len {
                return Err(ExamError::config(
                    "problem",
                    format!("length {} != problem_len", q.len()),
                ));
            }
        }
        if let Some(r) = &self.solutions {
            if r.len() != self.students {
                return Err(ExamError::config(
                    "solutions",
                    format!("{} strings for {} students", r.len(), self.students),
                ));
            }
            if r.iter().any(|s| s.len() != self.solution_len) {
                return Err(ExamError::config(
                    "solutions",
                    "every solution must have solution_len bits",
                ));
            }
        }
        let attack = self.attack_config()?;
        let needed = self.students + 1 + attack.extra_qubits(self.students);
        if needed > MAX_QUBITS {
            return Err(ExamError::QubitBudget {
                requested: needed,
                cap: MAX_QUBITS,
            });
        }
        Ok(())
    }

    /// Turns `attack` and `attack_params` into an [`AttackConfig`].
    pub fn attack_config(&self) -> Result<AttackConfig> {
        parse_attack(self.attack, &self.attack_params, self.students)
    }
}

fn param_err(key: &str, reason: impl Into<String>) -> ExamError {
    ExamError::config(format!("attack_params.{key}"), reason)
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| param_err(key, format!("cannot parse `{raw}`")))
}

/// `"re"` or `"re,im"`.
fn parse_complex(key: &str, raw: &str) -> Result<Complex64> {
    match raw.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(parse_value(key, re)?, parse_value(key, im)?)),
        None => Ok(Complex64::new(parse_value(key, raw)?, 0.0)),
    }
}

fn parse_rounds(raw: &str) -> Result<TargetRounds> {
    let raw = raw.trim();
    if raw == "all" {
        return Ok(TargetRounds::All);
    }
    if let Some(p) = raw.strip_prefix("p:") {
        return Ok(TargetRounds::Probability(parse_value("rounds", p)?));
    }
    let rounds: BTreeSet<usize> = raw
        .split(',')
        .map(|r| parse_value("rounds", r))
        .collect::<Result<_>>()?;
    Ok(TargetRounds::Rounds(rounds))
}

/// Builds an attack from its kind and string parameters:
///
/// * `rounds`: `all`, `p:<prob>` or a comma list of round numbers (any attack)
/// * entangle-measure: `beta` and optionally `alpha` (`re[,im]`), or `flip`
///   for real weights with |β|² = flip; `target` Bob (default 1)
/// * intercept-resend: `mask` = `auto`, `random`, `zero` or a bit string
/// * masquerade: `party` = `alice` or `bob:N`
pub fn parse_attack(
    kind: AttackKind,
    params: &BTreeMap<String, String>,
    students: usize,
) -> Result<AttackConfig> {
    let allowed: &[&str] = match kind {
        AttackKind::None => &[],
        AttackKind::MeasureResend | AttackKind::Disturbance => &["rounds"],
        AttackKind::EntangleMeasure => &["rounds", "alpha", "beta", "flip", "target"],
        AttackKind::InterceptResend => &["rounds", "mask"],
        AttackKind::Masquerade => &["rounds", "party"],
    };
    if let Some(key) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(param_err(key, format!("not a parameter of {kind}")));
    }
    let get = |k: &str| params.get(k).map(String::as_str);
    let attack = match kind {
        AttackKind::None => Attack::None,
        AttackKind::MeasureResend => Attack::MeasureResend,
        AttackKind::Disturbance => Attack::Disturbance,
        AttackKind::EntangleMeasure => {
            let target = get("target")
                .map(|t| parse_value("target", t))
                .transpose()?
                .unwrap_or(1);
            match (get("flip"), get("alpha"), get("beta")) {
                (Some(f), None, None) => {
                    let flip: f64 = parse_value("flip", f)?;
                    if !(0.0..=1.0).contains(&flip) {
                        return Err(param_err("flip", "must lie in [0, 1]"));
                    }
                    Attack::entangle_measure(flip, target)
                }
                (None, alpha, Some(b)) => {
                    let beta = parse_complex("beta", b)?;
                    let alpha = match alpha {
                        Some(a) => parse_complex("alpha", a)?,
                        None => Complex64::new((1.0 - beta.norm_sqr()).max(0.0).sqrt(), 0.0),
                    };
                    Attack::EntangleMeasure {
                        alpha,
                        beta,
                        target,
                    }
                }
                (Some(_), _, _) => return Err(param_err("flip", "give either flip or alpha/beta")),
                (None, _, None) => {
                    return Err(param_err("beta", "entangle-measure needs beta or flip"))
                }
            }
        }
        AttackKind::InterceptResend => {
            let mask = match get("mask").unwrap_or("auto") {
                "auto" => EveMask::Auto,
                "random" => EveMask::Random,
                "zero" => EveMask::Zero,
                bits => {
                    let b: BitString = bits
                        .parse()
                        .map_err(|_| param_err("mask", format!("cannot parse `{bits}`")))?;
                    EveMask::Fixed(
                        ShiftMask::new(b.bits().to_vec())
                            .map_err(|e| param_err("mask", e.to_string()))?,
                    )
                }
            };
            Attack::InterceptResend { mask }
        }
        AttackKind::Masquerade => {
            let raw = get("party")
                .ok_or_else(|| param_err("party", "masquerade needs the impersonated party"))?;
            let impersonated: Party = raw
                .parse()
                .map_err(|_| param_err("party", format!("cannot parse `{raw}`")))?;
            Attack::Masquerade { impersonated }
        }
    };
    let targets = get("rounds")
        .map(parse_rounds)
        .transpose()?
        .unwrap_or(TargetRounds::All);
    let config = AttackConfig { attack, targets };
    config
        .validate(students)
        .map_err(|e| ExamError::config("attack_params", e.to_string()))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults_are_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip_through_json() {
        let mut c = ScenarioConfig {
            protocol: ProtocolKind::Direct,
            phase: Phase::Give,
            attack: AttackKind::EntangleMeasure,
            ..ScenarioConfig::default()
        };
        c.attack_params.insert("beta".into(), "0.5,0.1".into());
        c.problem = Some(BitString::constant(16, 1));
        let text = c.to_json();
        let back = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn field_diagnosis() {
        let err = ScenarioConfig::from_json(r#"{"students": "many"}"#).unwrap_err();
        assert!(matches!(err, ExamError::Config { ref field, .. } if field == "students"));
        let err = ScenarioConfig::from_json(r#"{"studnets": 3}"#).unwrap_err();
        assert!(matches!(err, ExamError::Config { ref field, .. } if field == "studnets"));
        let err = ScenarioConfig::from_json(r#"{"phase": "share_psi", "protocol": "direct"}"#)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(matches!(err, ExamError::Config { ref field, .. } if field == "phase"));
        let c = ScenarioConfig {
            control_rate: 1.0,
            ..ScenarioConfig::default()
        };
        assert!(
            matches!(c.validate(), Err(ExamError::Config { ref field, .. }) if field == "control_rate")
        );
    }

    #[test]
    fn qubit_budget_is_a_resource_error() {
        let c = ScenarioConfig {
            students: 12,
            attack: AttackKind::InterceptResend,
            ..ScenarioConfig::default()
        };
        assert_eq!(
            c.validate(),
            Err(ExamError::QubitBudget {
                requested: 26,
                cap: 24
            })
        );
        let c = ScenarioConfig {
            students: 24,
            ..ScenarioConfig::default()
        };
        assert!(matches!(c.validate(), Err(ExamError::QubitBudget { .. })));
    }

    #[test]
    fn attack_parameters() {
        let em = parse_attack(
            AttackKind::EntangleMeasure,
            &params(&[("flip", "0.25"), ("target", "2")]),
            3,
        )
        .unwrap();
        match em.attack {
            Attack::EntangleMeasure { beta, target, .. } => {
                assert!((beta.norm_sqr() - 0.25).abs() < 1e-12);
                assert_eq!(target, 2);
            }
            other => panic!("{other:?}"),
        }
        let mq = parse_attack(
            AttackKind::Masquerade,
            &params(&[("party", "bob:2"), ("rounds", "p:0.5")]),
            3,
        )
        .unwrap();
        assert_eq!(
            mq.attack,
            Attack::Masquerade {
                impersonated: Party::Bob(2)
            }
        );
        assert_eq!(mq.targets, TargetRounds::Probability(0.5));
        let ir = parse_attack(
            AttackKind::InterceptResend,
            &params(&[("mask", "101"), ("rounds", "1,4")]),
            3,
        )
        .unwrap();
        assert_eq!(ir.targets, TargetRounds::Rounds([1, 4].into()));

        assert!(parse_attack(AttackKind::MeasureResend, &params(&[("beta", "1")]), 3).is_err());
        assert!(parse_attack(AttackKind::Masquerade, &params(&[]), 3).is_err());
        assert!(parse_attack(AttackKind::Masquerade, &params(&[("party", "bob:9")]), 3).is_err());
        assert!(parse_attack(
            AttackKind::EntangleMeasure,
            &params(&[("alpha", "1"), ("beta", "1")]),
            3
        )
        .is_err());
        assert!(parse_attack(AttackKind::InterceptResend, &params(&[("mask", "10")]), 3).is_err());
    }
}
