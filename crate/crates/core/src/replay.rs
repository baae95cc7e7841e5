//! Offline consistency check of an exported transcript.
//!
//! Every private value in a transcript is recorded once where it is produced
//! (a `measurement`, an `encode`) and echoed once where it is consumed (a
//! `decode`, a public reveal, a `check_result`). Replay re-derives each XOR
//! and parity relation from those records and demands that every echo match
//! its source, so any single altered bit or sign breaks at least one
//! relation. Physical correlations between parties are deliberately not
//! assumed: attacked runs are consistent too, as long as each party did what
//! it claims.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::quantum::Basis;
use crate::transcript::{AbortCause, EventBody, Party, Transcript, TranscriptEvent};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Inconsistency {
    pub seq: u64,
    /// 1-based line in the exported JSONL file.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplayVerdict {
    pub events: usize,
    pub decodes_verified: usize,
    pub encodes_verified: usize,
    pub checks_verified: usize,
    /// Sequence number of the abort that ended the run, if any.
    pub aborted_at: Option<u64>,
    pub inconsistencies: Vec<Inconsistency>,
}

impl ReplayVerdict {
    pub fn is_consistent(&self) -> bool {
        self.inconsistencies.is_empty()
    }
}

struct Record {
    basis: Basis,
    value: i8,
    consumed: bool,
    line: usize,
    seq: u64,
}

struct Reveal {
    value: i8,
    basis: Basis,
    consumed: bool,
    line: usize,
    seq: u64,
}

struct PendingEncode {
    public: u8,
    consumed: bool,
    line: usize,
    seq: u64,
}

#[derive(Default)]
struct Scope {
    measurements: HashMap<(usize, Party), Record>,
    reveals: HashMap<(usize, Party), Reveal>,
    broadcasts: HashMap<(usize, Party), u8>,
    encodes: HashMap<(usize, Party), PendingEncode>,
    announced: HashMap<usize, Basis>,
}

struct Checker {
    verdict: ReplayVerdict,
    scope: Scope,
}

fn valid_value(basis: Basis, value: i8) -> bool {
    match basis {
        Basis::Z => value == 0 || value == 1,
        Basis::X => value == 1 || value == -1,
    }
}

impl Checker {
    fn flag(&mut self, event: &TranscriptEvent, line: usize, reason: impl Into<String>) {
        self.verdict.inconsistencies.push(Inconsistency {
            seq: event.seq,
            line,
            reason: reason.into(),
        });
    }

    fn close_scope(&mut self) {
        let scope = std::mem::take(&mut self.scope);
        let mut leftovers: Vec<Inconsistency> = Vec::new();
        for ((m, party), r) in scope.measurements {
            if !r.consumed {
                leftovers.push(Inconsistency {
                    seq: r.seq,
                    line: r.line,
                    reason: format!("measurement of {party} in round {m} is never used"),
                });
            }
        }
        for ((m, party), r) in scope.reveals {
            if !r.consumed {
                leftovers.push(Inconsistency {
                    seq: r.seq,
                    line: r.line,
                    reason: format!("check reveal of {party} in round {m} is never evaluated"),
                });
            }
        }
        for ((m, party), e) in scope.encodes {
            if !e.consumed {
                leftovers.push(Inconsistency {
                    seq: e.seq,
                    line: e.line,
                    reason: format!("encode of {party} in round {m} is never broadcast"),
                });
            }
        }
        leftovers.sort_by_key(|i| i.seq);
        self.verdict.inconsistencies.extend(leftovers);
    }

    /// Looks up and consumes `party`'s Z measurement in round `m`.
    fn z_pad(&mut self, m: usize, party: Party) -> std::result::Result<u8, String> {
        match self.scope.measurements.get_mut(&(m, party)) {
            Some(r) if r.basis == Basis::Z => {
                r.consumed = true;
                Ok(r.value as u8)
            }
            Some(_) => Err(format!("{party} measured round {m} in the x basis")),
            None => Err(format!("no measurement by {party} in round {m}")),
        }
    }

    fn event(&mut self, event: &TranscriptEvent, line: usize) {
        let m = event.m;
        let actor = event.actor;
        match &event.body {
            EventBody::PhaseBoundary { .. } | EventBody::Restart { .. } => self.close_scope(),
            EventBody::BasisAnnounce { basis } => {
                if self.scope.announced.insert(m, *basis).is_some() {
                    self.flag(event, line, format!("basis announced twice for round {m}"));
                }
            }
            EventBody::Measurement { basis, value } => {
                if !valid_value(*basis, *value) {
                    self.flag(
                        event,
                        line,
                        format!("{value} is not a {basis}-basis outcome"),
                    );
                }
                if let Some(announced) = self.scope.announced.get(&m) {
                    if announced != basis {
                        self.flag(
                            event,
                            line,
                            format!("measured in {basis} but {announced} was announced"),
                        );
                    }
                }
                let record = Record {
                    basis: *basis,
                    value: *value,
                    consumed: false,
                    line,
                    seq: event.seq,
                };
                if self.scope.measurements.insert((m, actor), record).is_some() {
                    self.flag(event, line, format!("{actor} measured round {m} twice"));
                }
            }
            EventBody::PublicBit { value } => {
                if *value > 1 {
                    self.flag(event, line, format!("public bit {value} is not a bit"));
                }
                if self.scope.announced.contains_key(&m) {
                    self.reveal(event, line, Basis::Z, *value as i8);
                } else {
                    match self.scope.encodes.get_mut(&(m, actor)) {
                        Some(enc) if enc.public == *value => enc.consumed = true,
                        Some(enc) => {
                            let claimed = enc.public;
                            self.flag(
                                event,
                                line,
                                format!("broadcast {value} differs from encoded {claimed}"),
                            );
                        }
                        None => self.flag(event, line, "broadcast without a matching encode"),
                    }
                    self.scope.broadcasts.insert((m, actor), *value);
                }
            }
            EventBody::PublicSign { value } => {
                if !valid_value(Basis::X, *value) {
                    self.flag(event, line, format!("public sign {value} is not ±1"));
                }
                self.reveal(event, line, Basis::X, *value);
            }
            EventBody::Encode {
                plaintext,
                pad,
                public,
            } => {
                self.verdict.encodes_verified += 1;
                if plaintext ^ pad != *public {
                    self.flag(event, line, format!("{plaintext} xor {pad} != {public}"));
                }
                match self.z_pad(m, actor) {
                    Ok(j) if j == *pad => {}
                    Ok(j) => self.flag(event, line, format!("pad {pad} differs from measured {j}")),
                    Err(e) => self.flag(event, line, e),
                }
                let pending = PendingEncode {
                    public: *public,
                    consumed: false,
                    line,
                    seq: event.seq,
                };
                if self.scope.encodes.insert((m, actor), pending).is_some() {
                    self.flag(event, line, format!("{actor} encoded twice in round {m}"));
                }
            }
            EventBody::Decode {
                source,
                public,
                pad,
                mask,
                decoded,
            } => {
                self.verdict.decodes_verified += 1;
                let expected = public ^ pad ^ mask.unwrap_or(0);
                if expected != *decoded {
                    self.flag(
                        event,
                        line,
                        format!("decoded {decoded}, relation gives {expected}"),
                    );
                }
                match self.scope.broadcasts.get(&(m, *source)) {
                    Some(b) if b == public => {}
                    Some(b) => {
                        let b = *b;
                        self.flag(
                            event,
                            line,
                            format!("used broadcast {public}, {source} sent {b}"),
                        );
                    }
                    None => self.flag(
                        event,
                        line,
                        format!("no broadcast from {source} in round {m}"),
                    ),
                }
                match self.z_pad(m, actor) {
                    Ok(j) if j == *pad => {}
                    Ok(j) => self.flag(event, line, format!("pad {pad} differs from measured {j}")),
                    Err(e) => self.flag(event, line, e),
                }
            }
            EventBody::CheckResult {
                basis,
                alice,
                bobs,
                mask,
                agree,
                passed,
            } => {
                self.verdict.checks_verified += 1;
                self.check_result(
                    event,
                    line,
                    *basis,
                    *alice,
                    bobs,
                    mask.as_deref(),
                    agree.as_deref(),
                    *passed,
                );
            }
            EventBody::AuthNotice { .. }
            | EventBody::QubitSent { .. }
            | EventBody::QubitReceiptConfirmed { .. }
            | EventBody::CheckSubset { .. }
            | EventBody::ModeAnnounce { .. }
            | EventBody::Abort { .. }
            | EventBody::Announcement { .. } => {}
        }
    }

    fn reveal(&mut self, event: &TranscriptEvent, line: usize, basis: Basis, value: i8) {
        let m = event.m;
        let actor = event.actor;
        match self.scope.announced.get(&m) {
            Some(b) if *b == basis => {}
            _ => {
                self.flag(
                    event,
                    line,
                    format!("{basis}-basis reveal without matching announcement"),
                );
                return;
            }
        }
        match self.scope.measurements.get_mut(&(m, actor)) {
            Some(r) if r.basis == basis && r.value == value => r.consumed = true,
            Some(r) => {
                r.consumed = true;
                let measured = r.value;
                self.flag(
                    event,
                    line,
                    format!("revealed {value} but measured {measured}"),
                );
            }
            None => self.flag(
                event,
                line,
                format!("reveal without measurement by {actor}"),
            ),
        }
        let reveal = Reveal {
            value,
            basis,
            consumed: false,
            line,
            seq: event.seq,
        };
        if self.scope.reveals.insert((m, actor), reveal).is_some() {
            self.flag(event, line, format!("{actor} revealed twice in round {m}"));
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn check_result(
        &mut self,
        event: &TranscriptEvent,
        line: usize,
        basis: Basis,
        alice: i8,
        bobs: &[i8],
        mask: Option<&[u8]>,
        agree: Option<&[bool]>,
        passed: bool,
    ) {
        let m = event.m;
        if self.scope.announced.get(&m) != Some(&basis) {
            self.flag(event, line, "check basis differs from the announced one");
        }
        match self.scope.measurements.get_mut(&(m, Party::Alice)) {
            Some(r) if r.basis == basis && r.value == alice => r.consumed = true,
            Some(r) => {
                r.consumed = true;
                let measured = r.value;
                self.flag(
                    event,
                    line,
                    format!("check uses alice={alice}, measured {measured}"),
                );
            }
            None => self.flag(event, line, "check without alice's measurement"),
        }
        for (i, &value) in bobs.iter().enumerate() {
            let bob = Party::Bob(i + 1);
            match self.scope.reveals.get_mut(&(m, bob)) {
                Some(r) if r.basis == basis && r.value == value => r.consumed = true,
                Some(r) => {
                    r.consumed = true;
                    let revealed = r.value;
                    self.flag(
                        event,
                        line,
                        format!("check uses {bob}={value}, revealed {revealed}"),
                    );
                }
                None => self.flag(event, line, format!("check without a reveal from {bob}")),
            }
        }
        let expected = match basis {
            Basis::Z => {
                let Some(agree) = agree else {
                    self.flag(event, line, "z check without agreement flags");
                    return;
                };
                if agree.len() != bobs.len() || mask.is_some_and(|s| s.len() != bobs.len()) {
                    self.flag(event, line, "z check field lengths disagree");
                    return;
                }
                for (i, (&j, &flag)) in bobs.iter().zip(agree).enumerate() {
                    let s = mask.map_or(0, |s| s[i]);
                    let derived = (j as u8 ^ s) as i8 == alice;
                    if derived != flag {
                        self.flag(
                            event,
                            line,
                            format!(
                                "agreement flag of bob:{} is {flag}, relation gives {derived}",
                                i + 1
                            ),
                        );
                    }
                }
                bobs.iter()
                    .enumerate()
                    .all(|(i, &j)| (j as u8 ^ mask.map_or(0, |s| s[i])) as i8 == alice)
            }
            Basis::X => {
                if mask.is_some() || agree.is_some() {
                    self.flag(event, line, "x check carries z-only fields");
                }
                alice == bobs.iter().product::<i8>()
            }
        };
        if expected != passed {
            self.flag(
                event,
                line,
                format!("verdict {passed}, relation gives {expected}"),
            );
        }
    }
}

/// Checks every relation in `transcript`.
pub fn replay_transcript(transcript: &Transcript) -> ReplayVerdict {
    let mut checker = Checker {
        verdict: ReplayVerdict {
            events: transcript.len(),
            ..ReplayVerdict::default()
        },
        scope: Scope::default(),
    };
    let events = transcript.events();
    let mut last_seq: Option<u64> = None;
    for (i, event) in events.iter().enumerate() {
        let line = i + 1;
        if let Some(prev) = last_seq {
            if event.seq <= prev {
                checker.flag(
                    event,
                    line,
                    format!("sequence number {} after {prev}", event.seq),
                );
            }
        }
        last_seq = Some(event.seq);

        if let Some(at) = checker.verdict.aborted_at {
            checker.flag(event, line, format!("event after abort at seq {at}"));
            continue;
        }

        let forged = match &event.body {
            EventBody::AuthNotice { authentic, .. }
            | EventBody::QubitReceiptConfirmed { authentic, .. } => Some(!authentic),
            _ => None,
        };
        let next_is_masquerade_abort = matches!(
            events.get(i + 1).map(|e| &e.body),
            Some(EventBody::Abort { cause: AbortCause::Masquerade { impersonated } }) if *impersonated == event.actor
        );
        match forged {
            Some(true) if !next_is_masquerade_abort => {
                checker.flag(
                    event,
                    line,
                    "forged identity not followed by a masquerade abort",
                );
            }
            Some(false) if next_is_masquerade_abort => {
                checker.flag(
                    event,
                    line,
                    "authentic message followed by a masquerade abort",
                );
            }
            _ => {}
        }
        if let EventBody::Abort {
            cause: AbortCause::Masquerade { impersonated },
        } = &event.body
        {
            let prev_forged = i > 0
                && events[i - 1].actor == *impersonated
                && matches!(
                    events[i - 1].body,
                    EventBody::AuthNotice {
                        authentic: false,
                        ..
                    } | EventBody::QubitReceiptConfirmed {
                        authentic: false,
                        ..
                    }
                );
            if !prev_forged {
                checker.flag(event, line, "masquerade abort without a forged message");
            }
        }

        checker.event(event, line);
        if matches!(event.body, EventBody::Abort { .. }) {
            checker.verdict.aborted_at = Some(event.seq);
        }
    }
    checker.close_scope();
    checker.verdict
}

/// Parses a JSONL transcript file and replays it.
pub fn replay(path: &Path) -> Result<ReplayVerdict> {
    let transcript = Transcript::read_jsonl(path)?;
    Ok(replay_transcript(&transcript))
}
