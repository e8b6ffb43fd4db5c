//! Snapshot export and import for chain migration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    fields, Account, Block, BlockError, ChainState, Height, LockId, LockPurpose, ShardHead,
    SupplyLedger, TokenLock,
};
use crate::contracts::ContractRegistry;
use crate::governance::GovernanceState;
use crate::policy::GovernancePolicy;
use crate::primitives::{hash, Address, Digest, PublicKey};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotAccount {
    pub address: Address,
    pub balance: u64,
    pub nonce: u64,
    pub public_key: Option<PublicKey>,
    pub identity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotLock {
    pub owner: Address,
    pub id: LockId,
    pub amount: u64,
    pub unlock_height: Height,
    pub purpose: LockPurpose,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registries {
    pub governance: GovernanceState,
    pub contracts: ContractRegistry,
    pub shard_heads: BTreeMap<u32, ShardHead>,
}

/// A self-verifying export of one chain at one height.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub chain_id: String,
    pub taken_at_height: Height,
    pub state_hash: Digest,
    pub accounts: Vec<SnapshotAccount>,
    pub locks: Vec<SnapshotLock>,
    pub registries: Registries,
    pub blocks: Vec<Block>,
    pub policy: GovernancePolicy,
    pub supply: SupplyLedger,
    pub next_lock_id: LockId,
    pub last_round: u64,
    /// Hash of the snapshot serialized with this field zeroed.
    pub seal: Digest,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SnapshotError {
    #[error("snapshot does not parse: {0}")]
    Parse(String),
    #[error("snapshot bytes are not in canonical form")]
    NonCanonical,
    #[error("snapshot seal does not match its content")]
    Seal,
    #[error("recomputed state hash {actual} differs from embedded {embedded}")]
    StateHash { embedded: Digest, actual: Digest },
    #[error("block {index}: {reason}")]
    Block { index: usize, reason: String },
    #[error("lock {id} names unknown account {owner}")]
    OrphanLock { owner: Address, id: LockId },
}

impl Snapshot {
    fn compute_seal(&self) -> Digest {
        let mut unsealed = self.clone();
        unsealed.seal = Digest::ZERO;
        hash(&serde_json::to_vec(&unsealed).expect("snapshot serializes"))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("snapshot serializes")
    }
}

/// Exports `state` together with the chain `blocks` leading to it, genesis
/// first.
pub fn export_snapshot(state: &ChainState, blocks: &[Block]) -> Snapshot {
    let mut accounts = Vec::new();
    let mut locks = Vec::new();
    for account in state.accounts.values() {
        accounts.push(SnapshotAccount {
            address: account.address,
            balance: account.balance,
            nonce: account.nonce,
            public_key: account.public_key,
            identity: account.identity.clone(),
        });
        for lock in &account.locks {
            locks.push(SnapshotLock {
                owner: account.address,
                id: lock.id,
                amount: lock.amount,
                unlock_height: lock.unlock_height,
                purpose: lock.purpose,
            });
        }
    }
    let mut snapshot = Snapshot {
        chain_id: state.chain_id.clone(),
        taken_at_height: state.height,
        state_hash: state.state_hash(),
        accounts,
        locks,
        registries: Registries {
            governance: state.governance.clone(),
            contracts: state.contracts.clone(),
            shard_heads: state.shard_heads.clone(),
        },
        blocks: blocks.to_vec(),
        policy: state.policy.clone(),
        supply: state.supply,
        next_lock_id: state.next_lock_id,
        last_round: state.last_round,
        seal: Digest::ZERO,
    };
    snapshot.seal = snapshot.compute_seal();
    snapshot
}

fn verify_blocks(snapshot: &Snapshot) -> Result<(), SnapshotError> {
    let bad = |index, reason: String| SnapshotError::Block { index, reason };
    let mut prev: Option<&Block> = None;
    for (index, block) in snapshot.blocks.iter().enumerate() {
        let h = &block.header;
        if h.chain_id != snapshot.chain_id {
            return Err(bad(index, format!("belongs to chain {}", h.chain_id)));
        }
        match prev {
            None => {
                if h.parent.is_some() {
                    return Err(bad(index, "first block is not a genesis block".into()));
                }
            }
            Some(p) => {
                if h.parent != Some(p.hash()) || h.height != p.header.height + 1 {
                    return Err(bad(index, "does not extend its predecessor".into()));
                }
            }
        }
        block
            .verify_structure()
            .map_err(|e: BlockError| bad(index, e.to_string()))?;
        prev = Some(block);
    }
    if let Some(last) = prev {
        if last.header.height != snapshot.taken_at_height {
            return Err(bad(
                snapshot.blocks.len() - 1,
                format!("chain ends at {} not {}", last.header.height, snapshot.taken_at_height),
            ));
        }
    }
    Ok(())
}

/// Verifies `snapshot` and builds a new chain `target_chain_id` whose genesis
/// embeds the imported state.
pub fn import_snapshot(
    snapshot: &Snapshot,
    target_chain_id: &str,
) -> Result<(ChainState, Block), SnapshotError> {
    if snapshot.compute_seal() != snapshot.seal {
        return Err(SnapshotError::Seal);
    }
    verify_blocks(snapshot)?;
    let mut accounts: BTreeMap<Address, Account> = snapshot
        .accounts
        .iter()
        .map(|a| {
            (
                a.address,
                Account {
                    address: a.address,
                    balance: a.balance,
                    locks: Vec::new(),
                    nonce: a.nonce,
                    public_key: a.public_key,
                    identity: a.identity.clone(),
                },
            )
        })
        .collect();
    for lock in &snapshot.locks {
        let account = accounts.get_mut(&lock.owner).ok_or(SnapshotError::OrphanLock {
            owner: lock.owner,
            id: lock.id,
        })?;
        account.locks.push(TokenLock {
            id: lock.id,
            amount: lock.amount,
            unlock_height: lock.unlock_height,
            purpose: lock.purpose,
        });
    }
    let mut state = ChainState::empty(snapshot.chain_id.clone(), snapshot.policy.clone());
    state.accounts = accounts;
    state.governance = snapshot.registries.governance.clone();
    state.contracts = snapshot.registries.contracts.clone();
    state.shard_heads = snapshot.registries.shard_heads.clone();
    state.supply = snapshot.supply;
    state.next_lock_id = snapshot.next_lock_id;
    let actual = state.state_hash();
    if actual != snapshot.state_hash {
        return Err(SnapshotError::StateHash {
            embedded: snapshot.state_hash,
            actual,
        });
    }
    // Lock expiry is measured in source heights, so the target's genesis
    // continues the source's height numbering.
    state.chain_id = target_chain_id.to_string();
    state.height = snapshot.taken_at_height;
    state.last_round = snapshot.last_round;
    let shard_id = state.policy.shard.map_or(0, |s| s.shard_id);
    let genesis = Block::genesis(
        target_chain_id,
        state.height,
        actual,
        shard_id,
        state.governance.protocol_version,
    );
    state.tip = genesis.hash();
    state.emit(
        "migration.imported",
        fields([
            ("source_chain", snapshot.chain_id.clone()),
            ("taken_at_height", snapshot.taken_at_height.to_string()),
            ("state_hash", actual.to_string()),
            ("blocks", snapshot.blocks.len().to_string()),
        ]),
    );
    Ok((state, genesis))
}

/// Parses and imports a serialized snapshot. Any byte that differs from the
/// canonical encoding of the parsed content is a rejection.
pub fn import_snapshot_bytes(
    bytes: &[u8],
    target_chain_id: &str,
) -> Result<(ChainState, Block), SnapshotError> {
    let snapshot: Snapshot =
        serde_json::from_slice(bytes).map_err(|e| SnapshotError::Parse(e.to_string()))?;
    if snapshot.to_bytes() != bytes {
        return Err(SnapshotError::NonCanonical);
    }
    import_snapshot(&snapshot, target_chain_id)
}
