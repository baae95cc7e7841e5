use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::resource::{EntangledResource, ResourceKind};
use super::{ExamSession, ProtocolOutcome, ProtocolStatus};
use crate::error::{ExamError, Result};
use crate::transcript::{AbortCause, EventBody, Party};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingConfig {
    /// Resources Alice prepares and sends per attempt.
    pub count: usize,
    /// Fraction of them sacrificed to security checks.
    pub check_fraction: f64,
    /// Largest tolerated fraction of failed checks.
    pub error_threshold: f64,
    /// Fewest resources that must survive the checks.
    pub min_pool: usize,
    pub max_restarts: usize,
}

impl Default for SharingConfig {
    fn default() -> Self {
        SharingConfig {
            count: 200,
            check_fraction: 0.25,
            error_threshold: 0.0,
            min_pool: 0,
            max_restarts: 3,
        }
    }
}

impl SharingConfig {
    /// Smallest configuration that leaves `needed` resources after checks.
    pub fn for_payload(needed: usize, check_fraction: f64) -> Self {
        let mut count = needed.max(1);
        while count - checks_for(count, check_fraction) < needed {
            count += 1;
        }
        SharingConfig {
            count,
            check_fraction,
            min_pool: needed,
            ..SharingConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(ExamError::invalid("sharing count must be positive"));
        }
        if !(0.0..=1.0).contains(&self.check_fraction) {
            return Err(ExamError::invalid(format!(
                "check fraction {} outside [0, 1]",
                self.check_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.error_threshold) {
            return Err(ExamError::invalid(format!(
                "error threshold {} outside [0, 1]",
                self.error_threshold
            )));
        }
        Ok(())
    }
}

fn checks_for(count: usize, fraction: f64) -> usize {
    ((count as f64 * fraction).round() as usize).min(count)
}

impl<R: Rng> ExamSession<R> {
    /// One attempt at sharing identical GHZ states.
    pub fn share_psi(
        &mut self,
        config: &SharingConfig,
    ) -> Result<(Vec<EntangledResource>, ProtocolOutcome)> {
        self.share_attempt(ResourceKind::Psi, config)
    }

    /// One attempt at sharing masked GHZ states.
    pub fn share_phi(
        &mut self,
        config: &SharingConfig,
    ) -> Result<(Vec<EntangledResource>, ProtocolOutcome)> {
        self.share_attempt(ResourceKind::Phi, config)
    }

    /// Repeats sharing attempts until one passes or `max_restarts` restarts
    /// have been spent, after which the phase is hard-aborted.
    pub fn share_with_restarts(
        &mut self,
        kind: ResourceKind,
        config: &SharingConfig,
    ) -> Result<(Vec<EntangledResource>, ProtocolOutcome)> {
        let mut restarts = 0;
        loop {
            let (pool, mut outcome) = self.share_attempt(kind, config)?;
            outcome.stats.restarts = restarts;
            if outcome.status != ProtocolStatus::Restarted {
                return Ok((pool, outcome));
            }
            if restarts == config.max_restarts {
                let cause = AbortCause::RestartBudgetExhausted { restarts };
                self.abort(0, cause.clone());
                outcome.status = ProtocolStatus::AbortedEveDetected { cause };
                outcome.events.end = self.transcript.len();
                return Ok((Vec::new(), outcome));
            }
            restarts += 1;
        }
    }

    fn share_attempt(
        &mut self,
        kind: ResourceKind,
        config: &SharingConfig,
    ) -> Result<(Vec<EntangledResource>, ProtocolOutcome)> {
        config.validate()?;
        let mut outcome = ProtocolOutcome::new(self.transcript.len());
        self.mark_phase(match kind {
            ResourceKind::Psi => "share_psi",
            ResourceKind::Phi => "share_phi",
        });

        let mut resources = Vec::with_capacity(config.count);
        for round in 1..=config.count {
            outcome.stats.rounds += 1;
            match self.distribute(round, kind)? {
                Ok(resource) => resources.push(resource),
                Err(cause) => {
                    outcome.status = ProtocolStatus::AbortedEveDetected { cause };
                    outcome.events.end = self.transcript.len();
                    return Ok((Vec::new(), outcome));
                }
            }
        }

        let n_checks = checks_for(config.count, config.check_fraction);
        let mut chosen = sample(&mut self.rng, config.count, n_checks).into_vec();
        chosen.sort_unstable();
        self.transcript.record(
            0,
            Party::Alice,
            EventBody::CheckSubset {
                rounds: chosen.iter().map(|i| i + 1).collect(),
            },
        );

        let mut is_check = vec![false; config.count];
        for &i in &chosen {
            is_check[i] = true;
            let basis = self.random_basis();
            if self.check(&mut resources[i], basis)? {
                outcome.stats.checks_passed += 1;
            } else {
                outcome.stats.checks_failed += 1;
            }
            outcome.stats.control_rounds += 1;
        }

        if outcome.stats.error_rate() > config.error_threshold {
            self.transcript.record(
                0,
                Party::Alice,
                EventBody::Restart {
                    reason: format!(
                        "{} of {} checks failed",
                        outcome.stats.checks_failed, n_checks
                    ),
                },
            );
            outcome.status = ProtocolStatus::Restarted;
            outcome.events.end = self.transcript.len();
            return Ok((Vec::new(), outcome));
        }

        let pool: Vec<EntangledResource> = resources
            .into_iter()
            .zip(is_check)
            .filter_map(|(r, checked)| (!checked).then_some(r))
            .collect();
        if pool.len() < config.min_pool {
            return Err(ExamError::InsufficientResources {
                surviving: pool.len(),
                required: config.min_pool,
            });
        }
        outcome.events.end = self.transcript.len();
        Ok((pool, outcome))
    }
}
