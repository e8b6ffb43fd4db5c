use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{PayloadKind, Rejection, Transaction, TxPayload};
use crate::governance::GovAction;
use crate::policy::{Pattern, Role};
use crate::state::ChainState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterPredicate {
    MaxPayloadSize {
        bytes: usize,
    },
    /// Only the listed kinds may be sent, except by holders of an exempt role.
    AllowedPayloadTypes {
        allowed: BTreeSet<PayloadKind>,
        #[serde(default)]
        exempt_roles: BTreeSet<Role>,
    },
    /// Refuses transactions from, or transfers to, a scam-listed address.
    ScamListCheck,
    /// Only registered members may send; joining is exempt.
    PermissionedSenderCheck,
}

impl FilterPredicate {
    pub fn name(&self) -> &'static str {
        match self {
            FilterPredicate::MaxPayloadSize { .. } => "max-payload-size",
            FilterPredicate::AllowedPayloadTypes { .. } => "allowed-payload-types",
            FilterPredicate::ScamListCheck => "scam-list-check",
            FilterPredicate::PermissionedSenderCheck => "permissioned-sender-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRule {
    pub rule_id: String,
    pub predicate: FilterPredicate,
}

impl FilterRule {
    /// A rule whose id is the predicate's name.
    pub fn new(predicate: FilterPredicate) -> FilterRule {
        FilterRule {
            rule_id: predicate.name().to_string(),
            predicate,
        }
    }

    pub fn admits(&self, state: &ChainState, tx: &Transaction) -> bool {
        match &self.predicate {
            FilterPredicate::MaxPayloadSize { bytes } => tx.payload_size() <= *bytes,
            FilterPredicate::AllowedPayloadTypes {
                allowed,
                exempt_roles,
            } => {
                allowed.contains(&tx.kind())
                    || state.roles_of(&tx.sender).iter().any(|r| exempt_roles.contains(r))
            }
            FilterPredicate::ScamListCheck => {
                if !state.policy.is_active(Pattern::ScamList) {
                    return true;
                }
                let listed = |a| state.contracts.scam_list_check(a);
                if listed(&tx.sender) {
                    return false;
                }
                !matches!(&tx.payload, TxPayload::Transfer { to, .. } if listed(to))
            }
            FilterPredicate::PermissionedSenderCheck => {
                state.is_member(&tx.sender)
                    || matches!(
                        &tx.payload,
                        TxPayload::Governance {
                            action: GovAction::Join { .. }
                        }
                    )
            }
        }
    }
}

/// First rule of the chain's policy refusing `tx`, if the transaction filter
/// is active. System payloads are never filtered.
pub fn check_filters(state: &ChainState, tx: &Transaction) -> Result<(), Rejection> {
    if !state.policy.is_active(Pattern::TransactionFilter) || tx.is_system() {
        return Ok(());
    }
    for rule in &state.policy.filters {
        if !rule.admits(state, tx) {
            return Err(Rejection::Filter {
                rule_id: rule.rule_id.clone(),
            });
        }
    }
    Ok(())
}
