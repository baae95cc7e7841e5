use std::collections::BTreeMap;

use rand::Rng;

use crate::transcript::Party;

/// Ideal identity credential; only the channel and its owner know it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IdentityToken(u64);

/// Authenticated classical broadcast channel.
///
/// Every registered party holds a secret token. A message is authentic iff
/// the token it presents is the one registered for the party it claims to
/// come from.
#[derive(Debug, Clone)]
pub struct ClassicalChannel {
    registry: BTreeMap<Party, IdentityToken>,
}

impl ClassicalChannel {
    /// Registers Alice, Bobs `1..=students`, and an outsider slot for Eve.
    pub fn register<R: Rng + ?Sized>(students: usize, rng: &mut R) -> Self {
        let mut registry = BTreeMap::new();
        let parties = std::iter::once(Party::Alice)
            .chain((1..=students).map(Party::Bob))
            .chain(std::iter::once(Party::Eve));
        for party in parties {
            // redraw on the (astronomically rare) collision so tokens stay unique
            loop {
                let token = IdentityToken(rng.random());
                if !registry.values().any(|t| *t == token) {
                    registry.insert(party, token);
                    break;
                }
            }
        }
        ClassicalChannel { registry }
    }

    pub fn token(&self, party: Party) -> Option<IdentityToken> {
        self.registry.get(&party).copied()
    }

    pub fn is_authentic(&self, claimed: Party, presented: IdentityToken) -> bool {
        self.registry.get(&claimed) == Some(&presented)
    }
}
