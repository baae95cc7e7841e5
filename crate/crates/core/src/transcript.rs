//! Classical-channel transcript.
//!
//! Every protocol run appends [`TranscriptEvent`]s here. The export format is
//! one JSON object per line with the fields `seq`, `m`, `actor`, `kind`,
//! `payload` in that order. Round numbers `m` start at 1; `m = 0` marks events
//! that belong to no round. Qubit index conventions used by the simulator
//! (Alice = 0, Bob n = n, eavesdropper qubits appended) never appear here.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ExamError, Result};
use crate::quantum::Basis;

/// A participant on the classical channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    Alice,
    /// Bob `n`, numbered from 1.
    Bob(usize),
    Eve,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Alice => f.write_str("alice"),
            Party::Bob(n) => write!(f, "bob:{n}"),
            Party::Eve => f.write_str("eve"),
        }
    }
}

impl FromStr for Party {
    type Err = ExamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alice" => Ok(Party::Alice),
            "eve" => Ok(Party::Eve),
            _ => {
                let n = s
                    .strip_prefix("bob:")
                    .or_else(|| s.strip_prefix("bob"))
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| ExamError::invalid(format!("unknown party `{s}`")))?;
                Ok(Party::Bob(n))
            }
        }
    }
}

impl Serialize for Party {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Party {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatingMode {
    Control,
    Message,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AbortCause {
    /// A message carried an identity token that does not belong to its claimed sender.
    Masquerade { impersonated: Party },
    /// A control-mode check failed in a direct protocol.
    CheckFailed,
    /// Every permitted sharing attempt exceeded the error-rate threshold.
    RestartBudgetExhausted { restarts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    PhaseBoundary,
    AuthNotice,
    QubitSent,
    QubitReceiptConfirmed,
    CheckSubset,
    ModeAnnounce,
    BasisAnnounce,
    Measurement,
    PublicBit,
    PublicSign,
    Encode,
    Decode,
    CheckResult,
    Restart,
    Abort,
    Announcement,
}

/// Event payloads, tagged by kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    PhaseBoundary {
        phase: String,
    },
    /// Alice's notice to one Bob before a qubit is sent to him.
    AuthNotice {
        recipient: Party,
        authentic: bool,
    },
    QubitSent {
        recipient: Party,
    },
    QubitReceiptConfirmed {
        sender: Party,
        authentic: bool,
    },
    CheckSubset {
        rounds: Vec<usize>,
    },
    ModeAnnounce {
        mode: OperatingMode,
    },
    BasisAnnounce {
        basis: Basis,
    },
    /// Private measurement record: a bit for Z, a sign for X.
    Measurement {
        basis: Basis,
        value: i8,
    },
    PublicBit {
        value: u8,
    },
    PublicSign {
        value: i8,
    },
    /// Private encode record: `public = plaintext ⊕ pad`.
    Encode {
        plaintext: u8,
        pad: u8,
        public: u8,
    },
    /// Private decode record: `decoded = public ⊕ pad ⊕ mask`.
    Decode {
        source: Party,
        public: u8,
        pad: u8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<u8>,
        decoded: u8,
    },
    /// Alice's verdict for one checked resource.
    CheckResult {
        basis: Basis,
        alice: i8,
        bobs: Vec<i8>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<u8>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        agree: Option<Vec<bool>>,
        passed: bool,
    },
    Restart {
        reason: String,
    },
    Abort {
        cause: AbortCause,
    },
    Announcement {
        text: String,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::PhaseBoundary { .. } => EventKind::PhaseBoundary,
            EventBody::AuthNotice { .. } => EventKind::AuthNotice,
            EventBody::QubitSent { .. } => EventKind::QubitSent,
            EventBody::QubitReceiptConfirmed { .. } => EventKind::QubitReceiptConfirmed,
            EventBody::CheckSubset { .. } => EventKind::CheckSubset,
            EventBody::ModeAnnounce { .. } => EventKind::ModeAnnounce,
            EventBody::BasisAnnounce { .. } => EventKind::BasisAnnounce,
            EventBody::Measurement { .. } => EventKind::Measurement,
            EventBody::PublicBit { .. } => EventKind::PublicBit,
            EventBody::PublicSign { .. } => EventKind::PublicSign,
            EventBody::Encode { .. } => EventKind::Encode,
            EventBody::Decode { .. } => EventKind::Decode,
            EventBody::CheckResult { .. } => EventKind::CheckResult,
            EventBody::Restart { .. } => EventKind::Restart,
            EventBody::Abort { .. } => EventKind::Abort,
            EventBody::Announcement { .. } => EventKind::Announcement,
        }
    }

    /// Whether an eavesdropper on the classical channel may read this event.
    pub fn is_public(&self) -> bool {
        !matches!(
            self,
            EventBody::Measurement { .. }
                | EventBody::Encode { .. }
                | EventBody::Decode { .. }
                | EventBody::CheckResult { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub seq: u64,
    pub m: usize,
    pub actor: Party,
    #[serde(flatten)]
    pub body: EventBody,
}

impl TranscriptEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<TranscriptEvent>) -> Self {
        Transcript { events }
    }

    pub fn record(&mut self, m: usize, actor: Party, body: EventBody) {
        let seq = self.events.len() as u64;
        self.events.push(TranscriptEvent {
            seq,
            m,
            actor,
            body,
        });
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// The part of the transcript visible to an outsider.
    pub fn public_view(&self) -> impl Iterator<Item = &TranscriptEvent> {
        self.events.iter().filter(|e| e.body.is_public())
    }

    /// Latest public bit broadcast by `actor` in round `m`, looking only at the
    /// trailing events of that round.
    pub fn public_bit(&self, m: usize, actor: Party) -> Option<u8> {
        self.events
            .iter()
            .rev()
            .take_while(|e| e.m == m)
            .find_map(|e| match e.body {
                EventBody::PublicBit { value } if e.actor == actor => Some(value),
                _ => None,
            })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            // serializing plain data into a String cannot fail
            out.push_str(&serde_json::to_string(event).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Transcript> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: TranscriptEvent =
                serde_json::from_str(line).map_err(|e| ExamError::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            events.push(event);
        }
        Ok(Transcript { events })
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Transcript> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_jsonl(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn party_round_trip() {
        for p in [Party::Alice, Party::Bob(3), Party::Eve] {
            assert_eq!(p.to_string().parse::<Party>().unwrap(), p);
        }
        assert_eq!("bob2".parse::<Party>().unwrap(), Party::Bob(2));
        assert!("bob:0".parse::<Party>().is_err());
        assert!("carol".parse::<Party>().is_err());
    }

    #[test]
    fn field_order_is_stable() {
        let mut t = Transcript::new();
        t.record(4, Party::Bob(1), EventBody::PublicBit { value: 1 });
        assert_eq!(
            t.to_jsonl(),
            "{\"seq\":0,\"m\":4,\"actor\":\"bob:1\",\"kind\":\"public_bit\",\"payload\":{\"value\":1}}\n"
        );
    }

    #[test]
    fn jsonl_round_trip() {
        let mut t = Transcript::new();
        t.record(
            0,
            Party::Alice,
            EventBody::PhaseBoundary {
                phase: "share_psi".into(),
            },
        );
        t.record(
            1,
            Party::Alice,
            EventBody::Decode {
                source: Party::Bob(2),
                public: 1,
                pad: 0,
                mask: Some(1),
                decoded: 0,
            },
        );
        t.record(
            2,
            Party::Alice,
            EventBody::Abort {
                cause: AbortCause::Masquerade {
                    impersonated: Party::Bob(2),
                },
            },
        );
        let back = Transcript::parse_jsonl(&t.to_jsonl()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "{\"seq\":0,\"m\":0,\"actor\":\"alice\",\"kind\":\"public_bit\",\"payload\":{\"value\":1}}\nnot json\n";
        match Transcript::parse_jsonl(text) {
            Err(ExamError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn private_events_hidden_from_public_view() {
        let mut t = Transcript::new();
        t.record(
            1,
            Party::Alice,
            EventBody::Measurement {
                basis: Basis::Z,
                value: 1,
            },
        );
        t.record(1, Party::Alice, EventBody::PublicBit { value: 0 });
        let public: Vec<_> = t.public_view().map(|e| e.kind()).collect();
        assert_eq!(public, vec![EventKind::PublicBit]);
        assert_eq!(t.public_bit(1, Party::Alice), Some(0));
        assert_eq!(t.public_bit(1, Party::Bob(1)), None);
    }
}
