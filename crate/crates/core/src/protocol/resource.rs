use serde::{Deserialize, Serialize};

use crate::adversary::EveHoldings;
use crate::error::{ExamError, Result};
use crate::quantum::{ShiftMask, StateVector};
use crate::transcript::Party;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    /// Identical GHZ states, used to hand out the problem.
    Psi,
    /// GHZ states with a private per-student flip mask, used to collect solutions.
    Phi,
}

/// One shared (N+1)-party state together with who holds which qubit.
#[derive(Debug, Clone)]
pub struct EntangledResource {
    pub index: usize,
    pub kind: ResourceKind,
    pub state: StateVector,
    /// `ownership[0]` is Alice's qubit, `ownership[n]` Bob n's.
    pub ownership: Vec<usize>,
    /// Present iff `kind == Phi`; only Alice reads it.
    pub mask: Option<ShiftMask>,
    /// Whatever an eavesdropper left attached to this resource in transit.
    pub eve: Option<EveHoldings>,
}

impl EntangledResource {
    /// Fresh resource as Alice prepares it, before anything leaves her lab.
    pub fn prepare(index: usize, students: usize, mask: Option<ShiftMask>) -> Result<Self> {
        let mut state = StateVector::ghz(students + 1)?;
        let kind = match &mask {
            Some(mask) => {
                if mask.len() != students {
                    return Err(ExamError::invalid(format!(
                        "mask length {} != {students} students",
                        mask.len()
                    )));
                }
                state.apply_shift_mask(mask)?;
                ResourceKind::Phi
            }
            None => ResourceKind::Psi,
        };
        Ok(EntangledResource {
            index,
            kind,
            state,
            ownership: (0..=students).collect(),
            mask,
            eve: None,
        })
    }

    pub fn students(&self) -> usize {
        self.ownership.len() - 1
    }

    pub fn qubit_of(&self, party: Party) -> Option<usize> {
        match party {
            Party::Alice => Some(self.ownership[0]),
            Party::Bob(n) if n >= 1 && n < self.ownership.len() => Some(self.ownership[n]),
            _ => None,
        }
    }

    /// Alice's flip bit for Bob `bob`; zero for Psi resources.
    pub fn mask_bit(&self, bob: usize) -> u8 {
        self.mask.as_ref().map_or(0, |m| m.for_bob(bob))
    }
}
