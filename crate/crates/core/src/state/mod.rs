//! The ledger of one chain: accounts, locks, supply accounting, governance
//! registries and the event log.

mod apply;
mod block;
mod events;
mod snapshot;

pub use apply::{BlockError, ExecError};
pub use block::{transactions_root, Block, BlockHeader, BlockTemplate};
pub use events::{extract_logs, fields, EventRecord, LogError};
pub use snapshot::{
    export_snapshot, import_snapshot, import_snapshot_bytes, Snapshot, SnapshotError,
    SnapshotLock,
};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::ContractRegistry;
use crate::governance::{GovernanceState, JoinVia, MemberRecord};
use crate::policy::{GovernancePolicy, Pattern, Role};
use crate::primitives::{hash, Address, Digest, PublicKey};

pub type Amount = u64;
pub type Height = u64;
pub type LockId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LockPurpose {
    ValidatorCandidacy,
    ProposalDeposit,
    VoteWeight,
}

impl LockPurpose {
    pub fn name(self) -> &'static str {
        match self {
            LockPurpose::ValidatorCandidacy => "validator-candidacy",
            LockPurpose::ProposalDeposit => "proposal-deposit",
            LockPurpose::VoteWeight => "vote-weight",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLock {
    pub id: LockId,
    pub amount: Amount,
    pub unlock_height: Height,
    pub purpose: LockPurpose,
}

impl TokenLock {
    pub fn is_active(&self, height: Height) -> bool {
        height < self.unlock_height
    }
}

/// `balance` counts locked tokens too; only the unlocked part is spendable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub address: Address,
    pub balance: Amount,
    pub locks: Vec<TokenLock>,
    pub nonce: u64,
    pub public_key: Option<PublicKey>,
    pub identity: Option<String>,
}

impl Account {
    pub fn new(address: Address) -> Account {
        Account {
            address,
            balance: 0,
            locks: Vec::new(),
            nonce: 0,
            public_key: None,
            identity: None,
        }
    }

    pub fn locked(&self, height: Height) -> Amount {
        self.locks
            .iter()
            .filter(|l| l.is_active(height))
            .map(|l| l.amount)
            .sum()
    }

    pub fn spendable(&self, height: Height) -> Amount {
        self.balance.saturating_sub(self.locked(height))
    }
}

/// Where every token came from and where destroyed tokens went.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplyLedger {
    pub genesis: Amount,
    pub minted: Amount,
    pub slashed: Amount,
    pub burned: Amount,
}

impl SupplyLedger {
    /// Tokens that should currently exist.
    pub fn expected_total(&self) -> Amount {
        self.genesis + self.minted - self.slashed - self.burned
    }
}

/// Latest shard block known to a relay chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardHead {
    pub hash: Digest,
    pub height: Height,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error("{address} can spend {available} but needs {needed} (short by {})", needed - available)]
    InsufficientBalance {
        address: Address,
        needed: Amount,
        available: Amount,
    },
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("lock duration must be positive")]
    ZeroDuration,
    #[error("{address} has no lock {id}")]
    UnknownLock { address: Address, id: LockId },
    #[error("lock {id} of {address} has expired")]
    ExpiredLock { address: Address, id: LockId },
    #[error("pattern {0} is not active on this chain")]
    PatternInactive(Pattern),
    #[error("genesis configuration: {0}")]
    Genesis(String),
    #[error("arithmetic overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub chain_id: String,
    pub height: Height,
    pub tip: Digest,
    pub last_round: u64,
    pub accounts: BTreeMap<Address, Account>,
    pub supply: SupplyLedger,
    pub policy: GovernancePolicy,
    pub governance: GovernanceState,
    pub contracts: ContractRegistry,
    pub shard_heads: BTreeMap<u32, ShardHead>,
    pub next_lock_id: LockId,
    pub events: Vec<Arc<EventRecord>>,
    /// Hash of the transaction being executed, stamped onto its events.
    cursor: Option<Digest>,
}

#[derive(Serialize)]
struct CanonicalView<'a> {
    accounts: &'a BTreeMap<Address, Account>,
    supply: &'a SupplyLedger,
    policy: &'a GovernancePolicy,
    governance: &'a GovernanceState,
    contracts: &'a ContractRegistry,
    shard_heads: &'a BTreeMap<u32, ShardHead>,
    next_lock_id: LockId,
}

impl ChainState {
    pub fn empty(chain_id: impl Into<String>, policy: GovernancePolicy) -> ChainState {
        let version = policy.genesis_version;
        ChainState {
            chain_id: chain_id.into(),
            height: 0,
            tip: Digest::ZERO,
            last_round: 0,
            accounts: BTreeMap::new(),
            supply: SupplyLedger::default(),
            policy,
            governance: GovernanceState::new(version),
            contracts: ContractRegistry::default(),
            shard_heads: BTreeMap::new(),
            next_lock_id: 0,
            events: Vec::new(),
            cursor: None,
        }
    }

    /// Hash of accounts, locks, supply, registries and policy. Height, tip,
    /// chain id and the event log are deliberately left out so that a
    /// migrated chain reproduces its source's hash.
    pub fn state_hash(&self) -> Digest {
        let view = CanonicalView {
            accounts: &self.accounts,
            supply: &self.supply,
            policy: &self.policy,
            governance: &self.governance,
            contracts: &self.contracts,
            shard_heads: &self.shard_heads,
            next_lock_id: self.next_lock_id,
        };
        hash(&serde_json::to_vec(&view).expect("state serializes"))
    }

    pub fn account(&self, address: &Address) -> Option<&Account> {
        self.accounts.get(address)
    }

    pub fn balance(&self, address: &Address) -> Amount {
        self.accounts.get(address).map_or(0, |a| a.balance)
    }

    pub fn spendable(&self, address: &Address) -> Amount {
        self.accounts
            .get(address)
            .map_or(0, |a| a.spendable(self.height))
    }

    pub fn nonce(&self, address: &Address) -> u64 {
        self.accounts.get(address).map_or(0, |a| a.nonce)
    }

    /// Σ balances, locked tokens included.
    pub fn total_balances(&self) -> Amount {
        self.accounts.values().map(|a| a.balance).sum()
    }

    pub fn total_active_locks(&self) -> Amount {
        self.accounts.values().map(|a| a.locked(self.height)).sum()
    }

    pub fn has_role(&self, address: &Address, role: Role) -> bool {
        self.governance
            .roles
            .get(address)
            .is_some_and(|r| r.contains(&role))
    }

    pub fn roles_of(&self, address: &Address) -> BTreeSet<Role> {
        self.governance
            .roles
            .get(address)
            .cloned()
            .unwrap_or_default()
    }

    pub fn is_member(&self, address: &Address) -> bool {
        self.governance.participation.members.contains_key(address)
    }

    pub fn require_pattern(&self, pattern: Pattern) -> Result<(), StateError> {
        if self.policy.is_active(pattern) {
            Ok(())
        } else {
            Err(StateError::PatternInactive(pattern))
        }
    }

    pub(crate) fn account_mut(&mut self, address: Address) -> &mut Account {
        self.accounts
            .entry(address)
            .or_insert_with(|| Account::new(address))
    }

    pub fn credit(&mut self, address: Address, amount: Amount) {
        if amount > 0 {
            self.account_mut(address).balance += amount;
        }
    }

    pub fn debit(&mut self, address: Address, amount: Amount) -> Result<(), StateError> {
        let available = self.spendable(&address);
        if available < amount {
            return Err(StateError::InsufficientBalance {
                address,
                needed: amount,
                available,
            });
        }
        if amount > 0 {
            self.account_mut(address).balance -= amount;
        }
        Ok(())
    }

    pub fn transfer(&mut self, from: Address, to: Address, amount: Amount) -> Result<(), StateError> {
        self.debit(from, amount)?;
        self.credit(to, amount);
        Ok(())
    }

    /// Locks `amount` of `address`'s spendable tokens until `height + duration`.
    pub fn lock_tokens(
        &mut self,
        address: Address,
        amount: Amount,
        duration: Height,
        purpose: LockPurpose,
    ) -> Result<LockId, StateError> {
        if amount == 0 {
            return Err(StateError::ZeroAmount);
        }
        if duration == 0 {
            return Err(StateError::ZeroDuration);
        }
        let available = self.spendable(&address);
        if available < amount {
            return Err(StateError::InsufficientBalance {
                address,
                needed: amount,
                available,
            });
        }
        let unlock_height = self.height.checked_add(duration).ok_or(StateError::Overflow)?;
        let id = self.next_lock_id;
        self.next_lock_id += 1;
        self.account_mut(address).locks.push(TokenLock {
            id,
            amount,
            unlock_height,
            purpose,
        });
        self.emit(
            "lock.created",
            fields([
                ("address", address.to_string()),
                ("lock_id", id.to_string()),
                ("amount", amount.to_string()),
                ("unlock_height", unlock_height.to_string()),
                ("purpose", purpose.name().to_string()),
            ]),
        );
        Ok(id)
    }

    /// Destroys an active lock together with the tokens it holds.
    pub fn slash_lock(&mut self, address: Address, lock_id: LockId) -> Result<Amount, StateError> {
        let height = self.height;
        let account = self
            .accounts
            .get_mut(&address)
            .ok_or(StateError::UnknownLock { address, id: lock_id })?;
        let pos = account
            .locks
            .iter()
            .position(|l| l.id == lock_id)
            .ok_or(StateError::UnknownLock { address, id: lock_id })?;
        if !account.locks[pos].is_active(height) {
            return Err(StateError::ExpiredLock { address, id: lock_id });
        }
        let lock = account.locks.remove(pos);
        account.balance -= lock.amount;
        self.supply.slashed += lock.amount;
        self.emit(
            "slash",
            fields([
                ("address", address.to_string()),
                ("lock_id", lock_id.to_string()),
                ("amount", lock.amount.to_string()),
                ("purpose", lock.purpose.name().to_string()),
            ]),
        );
        Ok(lock.amount)
    }

    /// Ends an active lock early, returning its tokens to the spendable pool.
    pub fn release_lock(&mut self, address: Address, lock_id: LockId) -> Result<(), StateError> {
        let height = self.height;
        let lock = self
            .accounts
            .get_mut(&address)
            .and_then(|a| a.locks.iter_mut().find(|l| l.id == lock_id))
            .ok_or(StateError::UnknownLock { address, id: lock_id })?;
        if !lock.is_active(height) {
            return Err(StateError::ExpiredLock { address, id: lock_id });
        }
        lock.unlock_height = height;
        self.emit(
            "lock.released",
            fields([
                ("address", address.to_string()),
                ("lock_id", lock_id.to_string()),
            ]),
        );
        Ok(())
    }

    pub fn emit(&mut self, topic: &str, payload: BTreeMap<String, String>) {
        let index = match self.events.last() {
            Some(last) if last.height == self.height => last.index + 1,
            _ => 0,
        };
        self.events.push(Arc::new(EventRecord {
            height: self.height,
            index,
            tx_hash: self.cursor,
            topic: topic.to_string(),
            payload,
        }));
    }

    pub(crate) fn set_cursor(&mut self, tx: Option<Digest>) {
        self.cursor = tx;
    }

    pub fn extract_logs(
        &self,
        topic: Option<&str>,
        range: Option<(Height, Height)>,
    ) -> Result<Vec<EventRecord>, LogError> {
        extract_logs(&self.events, topic, range)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisLock {
    pub amount: Amount,
    pub duration: Height,
    pub purpose: LockPurpose,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisAccount {
    pub address: Address,
    pub public_key: Option<PublicKey>,
    pub balance: Amount,
    pub locks: Vec<GenesisLock>,
    pub roles: Vec<Role>,
    pub identity: Option<String>,
    pub member: bool,
}

impl GenesisAccount {
    pub fn new(public_key: PublicKey, balance: Amount) -> GenesisAccount {
        GenesisAccount {
            address: public_key.address(),
            public_key: Some(public_key),
            balance,
            locks: Vec::new(),
            roles: Vec::new(),
            identity: None,
            member: true,
        }
    }

    pub fn with_roles(mut self, roles: impl IntoIterator<Item = Role>) -> Self {
        self.roles.extend(roles);
        self
    }

    pub fn with_lock(mut self, amount: Amount, duration: Height, purpose: LockPurpose) -> Self {
        self.locks.push(GenesisLock {
            amount,
            duration,
            purpose,
        });
        self
    }

    pub fn with_identity(mut self, identity: impl Into<String>) -> Self {
        self.identity = Some(identity.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenesisConfig {
    pub chain_id: String,
    pub policy: GovernancePolicy,
    pub accounts: Vec<GenesisAccount>,
    pub freezer_eligible: Vec<Address>,
    /// Genesis heads of the shards a relay chain coordinates.
    pub shard_heads: BTreeMap<u32, ShardHead>,
}

impl GenesisConfig {
    pub fn new(chain_id: impl Into<String>, policy: GovernancePolicy) -> GenesisConfig {
        GenesisConfig {
            chain_id: chain_id.into(),
            policy,
            accounts: Vec::new(),
            freezer_eligible: Vec::new(),
            shard_heads: BTreeMap::new(),
        }
    }

    pub fn account(mut self, account: GenesisAccount) -> Self {
        self.accounts.push(account);
        self
    }

    pub fn build(self) -> Result<(ChainState, Block), StateError> {
        let misplaced = self.policy.misplaced_patterns();
        if let Some(p) = misplaced.first() {
            return Err(StateError::Genesis(format!(
                "pattern {p} is {} only but the chain is {}",
                p.applicability(),
                self.policy.mode
            )));
        }
        if self.policy.is_permissioned()
            && !self.accounts.iter().any(|a| a.roles.contains(&Role::Administrator))
        {
            return Err(StateError::Genesis(
                "a permissioned chain needs at least one administrator".into(),
            ));
        }
        let shard_id = self.policy.shard.map_or(0, |s| s.shard_id);
        let version = self.policy.genesis_version;
        let mut state = ChainState::empty(self.chain_id, self.policy);
        state.emit(
            "chain.genesis",
            fields([
                ("chain_id", state.chain_id.clone()),
                ("mode", state.policy.mode.to_string()),
                ("protocol_version", version.to_string()),
                ("selection", state.policy.consensus.selection.name().to_string()),
                ("finality", state.policy.consensus.finality.name().to_string()),
                (
                    "patterns",
                    state
                        .policy
                        .patterns
                        .iter()
                        .map(|p| p.name())
                        .collect::<Vec<_>>()
                        .join(","),
                ),
            ]),
        );
        let inc = state.policy.consensus.incentive.clone();
        state.emit(
            "incentive.configured",
            fields([
                ("enabled", inc.enabled.to_string()),
                ("block_reward", inc.block_reward.to_string()),
                ("validator_fee_share", inc.validator_fee_share.to_string()),
                (
                    "treasury",
                    inc.treasury.map_or_else(|| "none".to_string(), |t| t.to_string()),
                ),
            ]),
        );
        for spec in self.accounts {
            if state.accounts.contains_key(&spec.address) {
                return Err(StateError::Genesis(format!(
                    "account {} declared twice",
                    spec.address
                )));
            }
            let account = state.account_mut(spec.address);
            account.balance = spec.balance;
            account.public_key = spec.public_key;
            account.identity = spec.identity.clone();
            state.supply.genesis = state
                .supply
                .genesis
                .checked_add(spec.balance)
                .ok_or(StateError::Overflow)?;
            for role in &spec.roles {
                state.governance.grant_role(spec.address, *role);
                state.emit(
                    "role.granted",
                    fields([
                        ("address", spec.address.to_string()),
                        ("role", role.name().to_string()),
                        ("by", "genesis".to_string()),
                    ]),
                );
            }
            if spec.member {
                state.governance.participation.members.insert(
                    spec.address,
                    MemberRecord {
                        identity: spec.identity.clone(),
                        via: JoinVia::DeployerGrant,
                        height: 0,
                    },
                );
                state.emit(
                    "member.joined",
                    fields([
                        ("address", spec.address.to_string()),
                        ("via", JoinVia::DeployerGrant.name().to_string()),
                    ]),
                );
            }
            for lock in spec.locks {
                state.require_pattern(Pattern::TokenLocker)?;
                state.lock_tokens(spec.address, lock.amount, lock.duration, lock.purpose)?;
            }
        }
        state.contracts.freezer_eligible = self.freezer_eligible.into_iter().collect();
        state.shard_heads = self.shard_heads;
        let genesis = Block::genesis(&state.chain_id, 0, state.state_hash(), shard_id, version);
        state.tip = genesis.hash();
        Ok((state, genesis))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::consensus::{ConsensusPolicy, FinalityPolicy, IncentivePolicy, ValidatorSelectionPolicy};
    use crate::policy::Decentralisation;
    use crate::primitives::KeyPair;

    pub(crate) fn open_policy() -> GovernancePolicy {
        GovernancePolicy::new(
            Decentralisation::Permissionless,
            ConsensusPolicy {
                selection: ValidatorSelectionPolicy::ProofOfStake,
                finality: FinalityPolicy::KDeep { k: 2 },
                incentive: IncentivePolicy::disabled(),
                seed: 7,
            },
        )
        .with_patterns([Pattern::TokenLocker])
    }

    fn one_account(balance: Amount) -> (ChainState, Address) {
        let key = KeyPair::from_name("alice");
        let (state, _) = GenesisConfig::new("t", open_policy())
            .account(GenesisAccount::new(key.public_key(), balance))
            .build()
            .unwrap();
        (state, key.address())
    }

    #[test]
    fn lock_reduces_spendable_until_unlock_height() {
        let (mut s, a) = one_account(100);
        s.lock_tokens(a, 40, 10, LockPurpose::VoteWeight).unwrap();
        assert_eq!(s.spendable(&a), 60);
        assert_eq!(s.balance(&a), 100);
        s.height = 9;
        assert_eq!(s.spendable(&a), 60);
        s.height = 10;
        assert_eq!(s.spendable(&a), 100);
    }

    #[test]
    fn over_lock_names_shortfall() {
        let (mut s, a) = one_account(100);
        let err = s.lock_tokens(a, 101, 5, LockPurpose::VoteWeight).unwrap_err();
        assert_eq!(
            err,
            StateError::InsufficientBalance {
                address: a,
                needed: 101,
                available: 100
            }
        );
        assert!(err.to_string().contains("short by 1"));
    }

    #[test]
    fn slash_destroys_tokens() {
        let (mut s, a) = one_account(100);
        let id = s.lock_tokens(a, 40, 10, LockPurpose::ProposalDeposit).unwrap();
        let before = s.supply.expected_total();
        assert_eq!(s.slash_lock(a, id).unwrap(), 40);
        assert_eq!(s.balance(&a), 60);
        assert!(s.account(&a).unwrap().locks.is_empty());
        assert_eq!(before - s.supply.expected_total(), 40);
        assert_eq!(s.total_balances(), s.supply.expected_total());
        assert_eq!(s.extract_logs(Some("slash"), None).unwrap().len(), 1);
    }

    #[test]
    fn slashing_expired_lock_leaves_state_alone() {
        let (mut s, a) = one_account(100);
        let id = s.lock_tokens(a, 40, 3, LockPurpose::ProposalDeposit).unwrap();
        s.height = 3;
        let hash = s.state_hash();
        assert_eq!(
            s.slash_lock(a, id),
            Err(StateError::ExpiredLock { address: a, id })
        );
        assert_eq!(s.state_hash(), hash);
        assert!(matches!(s.slash_lock(a, 99), Err(StateError::UnknownLock { .. })));
    }

    #[test]
    fn permissioned_genesis_requires_admin() {
        let mut policy = open_policy();
        policy.mode = Decentralisation::Permissioned;
        policy.patterns.remove(&Pattern::TokenLocker);
        let err = GenesisConfig::new("p", policy).build().unwrap_err();
        assert!(err.to_string().contains("administrator"));
    }

    #[test]
    fn misplaced_pattern_is_rejected_at_genesis() {
        let mut policy = open_policy();
        policy.mode = Decentralisation::Permissioned;
        let err = GenesisConfig::new("p", policy).build().unwrap_err();
        assert!(err.to_string().contains("token-locker"), "{err}");
    }
}
