//! Built-in governance registries: the scam list, the social contract and
//! the contract freezer.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{Pattern, Role};
use crate::primitives::Address;
use crate::state::{fields, ChainState, Height, StateError};

pub const SCAM_LIST: &str = "scam-list";
pub const SOCIAL_CONTRACT: &str = "social-contract";
pub const GOVERNANCE: &str = "governance";
pub const TOKEN_LOCKER: &str = "token-locker";

/// Everything the freezer can suspend.
pub const TARGETS: [&str; 4] = [SCAM_LIST, SOCIAL_CONTRACT, GOVERNANCE, TOKEN_LOCKER];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub registry: String,
    pub key: String,
    pub value: BTreeMap<String, String>,
    pub added_by: Address,
    pub height: Height,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezeFlag {
    pub frozen: bool,
    pub frozen_by: String,
    pub height: Height,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractRegistry {
    pub scam_list: BTreeMap<Address, RegistryEntry>,
    pub social_contract: Option<RegistryEntry>,
    pub freezes: BTreeMap<String, FreezeFlag>,
    /// Addresses allowed to trigger the freezer, fixed at genesis.
    pub freezer_eligible: BTreeSet<Address>,
}

impl ContractRegistry {
    pub fn scam_list_check(&self, address: &Address) -> bool {
        self.scam_list.contains_key(address)
    }

    pub fn social_contract_get(&self) -> Option<&str> {
        self.social_contract
            .as_ref()
            .and_then(|e| e.value.get("maintainer").map(String::as_str))
    }

    pub fn is_frozen(&self, target: &str) -> bool {
        self.freezes.get(target).is_some_and(|f| f.frozen)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum ContractAction {
    ScamListAdd {
        address: Address,
        #[serde(default)]
        note: String,
    },
    SocialContractSet {
        maintainer_spec: String,
    },
    Freeze {
        target: String,
    },
    Unfreeze {
        target: String,
    },
}

impl ContractAction {
    /// Registry this action writes to. Freeze controls are not themselves
    /// subject to freezing.
    pub fn mutated_target(&self) -> Option<&'static str> {
        match self {
            ContractAction::ScamListAdd { .. } => Some(SCAM_LIST),
            ContractAction::SocialContractSet { .. } => Some(SOCIAL_CONTRACT),
            ContractAction::Freeze { .. } | ContractAction::Unfreeze { .. } => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractError {
    #[error("{actor} may not write to {registry}")]
    Unauthorized { actor: Address, registry: String },
    #[error("{0} is frozen")]
    Frozen(String),
    #[error("unknown contract {0}")]
    UnknownTarget(String),
    #[error(transparent)]
    State(#[from] StateError),
}

impl ContractError {
    pub fn code(&self) -> &'static str {
        match self {
            ContractError::Unauthorized { .. } => "unauthorized",
            ContractError::Frozen(_) => "frozen",
            ContractError::UnknownTarget(_) => "unknown-target",
            ContractError::State(_) => "state",
        }
    }
}

pub fn ensure_not_frozen(state: &ChainState, target: &str) -> Result<(), ContractError> {
    if state.contracts.is_frozen(target) {
        return Err(ContractError::Frozen(target.to_string()));
    }
    Ok(())
}

fn authorize(
    state: &ChainState,
    actor: Address,
    registry: &str,
    roles: &BTreeSet<Role>,
) -> Result<Role, ContractError> {
    let held = state.roles_of(&actor);
    roles
        .iter()
        .copied()
        .find(|r| held.contains(r))
        .ok_or(ContractError::Unauthorized {
            actor,
            registry: registry.to_string(),
        })
}

pub fn scam_list_add(
    state: &mut ChainState,
    actor: Address,
    address: Address,
    note: &str,
) -> Result<(), ContractError> {
    state.require_pattern(Pattern::ScamList)?;
    ensure_not_frozen(state, SCAM_LIST)?;
    let writers = state.policy.scam_list_writers.clone();
    let role = authorize(state, actor, SCAM_LIST, &writers)?;
    let height = state.height;
    state.contracts.scam_list.insert(
        address,
        RegistryEntry {
            registry: SCAM_LIST.into(),
            key: address.to_string(),
            value: fields([("note", note.to_string())]),
            added_by: actor,
            height,
        },
    );
    state.emit(
        "scam-list.added",
        fields([
            ("address", address.to_string()),
            ("note", note.to_string()),
            ("by", actor.to_string()),
            ("by_role", role.name().to_string()),
        ]),
    );
    Ok(())
}

pub fn social_contract_set(
    state: &mut ChainState,
    actor: Address,
    maintainer_spec: &str,
) -> Result<(), ContractError> {
    state.require_pattern(Pattern::SocialContract)?;
    ensure_not_frozen(state, SOCIAL_CONTRACT)?;
    let allowed: BTreeSet<Role> = std::iter::once(Role::Deployer)
        .chain(state.policy.dictator_roles.iter().copied())
        .collect();
    let role = authorize(state, actor, SOCIAL_CONTRACT, &allowed)?;
    let height = state.height;
    state.contracts.social_contract = Some(RegistryEntry {
        registry: SOCIAL_CONTRACT.into(),
        key: "maintainer".into(),
        value: fields([("maintainer", maintainer_spec.to_string())]),
        added_by: actor,
        height,
    });
    state.emit(
        "social-contract.set",
        fields([
            ("maintainer", maintainer_spec.to_string()),
            ("by", actor.to_string()),
            ("by_role", role.name().to_string()),
        ]),
    );
    Ok(())
}

/// Sets a freeze flag without an authorization check; callers authorize.
/// Re-freezing a frozen target changes nothing but is still logged.
pub(crate) fn set_freeze(state: &mut ChainState, target: &str, frozen: bool, by: &str) {
    let height = state.height;
    let unchanged = state.contracts.is_frozen(target) == frozen;
    if !unchanged {
        state.contracts.freezes.insert(
            target.to_string(),
            FreezeFlag {
                frozen,
                frozen_by: by.to_string(),
                height,
            },
        );
    }
    state.emit(
        if frozen {
            "contract.frozen"
        } else {
            "contract.unfrozen"
        },
        fields([
            ("target", target.to_string()),
            ("by", by.to_string()),
            ("changed", (!unchanged).to_string()),
        ]),
    );
}

fn freeze_control(
    state: &mut ChainState,
    actor: Address,
    target: &str,
    frozen: bool,
) -> Result<(), ContractError> {
    state.require_pattern(Pattern::ContractFreezer)?;
    if !TARGETS.contains(&target) {
        return Err(ContractError::UnknownTarget(target.to_string()));
    }
    if !state.contracts.freezer_eligible.contains(&actor) {
        return Err(ContractError::Unauthorized {
            actor,
            registry: "contract-freezer".into(),
        });
    }
    set_freeze(state, target, frozen, &actor.to_string());
    Ok(())
}

pub fn freeze_contract(state: &mut ChainState, actor: Address, target: &str) -> Result<(), ContractError> {
    freeze_control(state, actor, target, true)
}

pub fn unfreeze_contract(state: &mut ChainState, actor: Address, target: &str) -> Result<(), ContractError> {
    freeze_control(state, actor, target, false)
}

pub fn execute(state: &mut ChainState, actor: Address, action: &ContractAction) -> Result<(), ContractError> {
    match action {
        ContractAction::ScamListAdd { address, note } => scam_list_add(state, actor, *address, note),
        ContractAction::SocialContractSet { maintainer_spec } => {
            social_contract_set(state, actor, maintainer_spec)
        }
        ContractAction::Freeze { target } => freeze_contract(state, actor, target),
        ContractAction::Unfreeze { target } => unfreeze_contract(state, actor, target),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Pattern;
    use crate::primitives::KeyPair;
    use crate::state::{GenesisAccount, GenesisConfig};

    fn setup() -> (ChainState, KeyPair, KeyPair) {
        let admin = KeyPair::from_name("admin");
        let member = KeyPair::from_name("member");
        let policy = crate::state::tests::open_policy().with_patterns([
            Pattern::ScamList,
            Pattern::SocialContract,
            Pattern::ContractFreezer,
        ]);
        let mut cfg = GenesisConfig::new("c", policy)
            .account(GenesisAccount::new(admin.public_key(), 100).with_roles([Role::Administrator, Role::Deployer]))
            .account(GenesisAccount::new(member.public_key(), 100));
        cfg.freezer_eligible.push(admin.address());
        let (state, _) = cfg.build().unwrap();
        (state, admin, member)
    }

    #[test]
    fn scam_list_access() {
        let (mut s, admin, member) = setup();
        let x = KeyPair::from_name("x").address();
        assert!(!s.contracts.scam_list_check(&x));
        let err = scam_list_add(&mut s, member.address(), x, "").unwrap_err();
        assert_eq!(err.code(), "unauthorized");
        scam_list_add(&mut s, admin.address(), x, "phishing").unwrap();
        assert!(s.contracts.scam_list_check(&x));
    }

    #[test]
    fn frozen_registry_refuses_writes_but_answers_reads() {
        let (mut s, admin, _) = setup();
        let x = KeyPair::from_name("x").address();
        let y = KeyPair::from_name("y").address();
        scam_list_add(&mut s, admin.address(), x, "").unwrap();
        freeze_contract(&mut s, admin.address(), SCAM_LIST).unwrap();
        let before = s.state_hash();
        assert_eq!(
            scam_list_add(&mut s, admin.address(), y, "").unwrap_err(),
            ContractError::Frozen(SCAM_LIST.into())
        );
        assert_eq!(s.state_hash(), before);
        assert!(s.contracts.scam_list_check(&x));
        // A second freeze is a logged no-op.
        freeze_contract(&mut s, admin.address(), SCAM_LIST).unwrap();
        assert_eq!(s.state_hash(), before);
        assert_eq!(s.events.last().unwrap().get("changed"), Some("false"));
        unfreeze_contract(&mut s, admin.address(), SCAM_LIST).unwrap();
        scam_list_add(&mut s, admin.address(), y, "").unwrap();
    }

    #[test]
    fn freezer_eligibility() {
        let (mut s, _, member) = setup();
        assert_eq!(
            freeze_contract(&mut s, member.address(), SCAM_LIST).unwrap_err().code(),
            "unauthorized"
        );
    }

    #[test]
    fn social_contract_overwrites_and_logs() {
        let (mut s, admin, member) = setup();
        assert_eq!(s.contracts.social_contract_get(), None);
        social_contract_set(&mut s, admin.address(), "maintainer = council").unwrap();
        assert_eq!(s.contracts.social_contract_get(), Some("maintainer = council"));
        social_contract_set(&mut s, admin.address(), "maintainer = foundation").unwrap();
        assert_eq!(s.contracts.social_contract_get(), Some("maintainer = foundation"));
        let history = s.extract_logs(Some("social-contract.set"), None).unwrap();
        assert_eq!(history.len(), 2);
        assert!(social_contract_set(&mut s, member.address(), "me").is_err());
    }
}
