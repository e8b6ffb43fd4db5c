//! Transactions, filter rules, the pool and candidate-block building.

mod filter;
mod pool;

pub use filter::{check_filters, FilterPredicate, FilterRule};
pub use pool::{build_candidate_block, BuildOutcome, Eviction, TxPool};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::ContractAction;
use crate::governance::{CrossChainResult, GovAction, ProposalId};
use crate::primitives::{hash, Address, Digest, KeyPair, PublicKey, Signature};
use crate::state::{Amount, BlockHeader, ChainState, Height, LockPurpose};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TxPayload {
    Transfer {
        to: Address,
        amount: Amount,
        #[serde(default)]
        memo: String,
    },
    Lock {
        amount: Amount,
        duration: Height,
        purpose: LockPurpose,
    },
    Governance {
        action: GovAction,
    },
    Contract {
        action: ContractAction,
    },
    /// Validator-only bookkeeping; never accepted from the pool.
    System {
        action: SystemAction,
    },
}

/// A shard header together with its producer's signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedHeader {
    pub header: BlockHeader,
    pub validator_key: PublicKey,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemAction {
    IncludeShardHeader { header: SignedHeader },
    ImportCrossChainResult { result: CrossChainResult },
    AbortCrossChainVote { proposal: ProposalId, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadKind {
    Transfer,
    Lock,
    Governance,
    Contract,
    System,
}

impl PayloadKind {
    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::Transfer => "transfer",
            PayloadKind::Lock => "lock",
            PayloadKind::Governance => "governance",
            PayloadKind::Contract => "contract",
            PayloadKind::System => "system",
        }
    }
}

impl TxPayload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            TxPayload::Transfer { .. } => PayloadKind::Transfer,
            TxPayload::Lock { .. } => PayloadKind::Lock,
            TxPayload::Governance { .. } => PayloadKind::Governance,
            TxPayload::Contract { .. } => PayloadKind::Contract,
            TxPayload::System { .. } => PayloadKind::System,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub public_key: PublicKey,
    pub payload: TxPayload,
    pub nonce: u64,
    pub fee: Amount,
    /// Signature over the hash of every other field.
    pub signature: Signature,
}

#[derive(Serialize)]
struct Unsigned<'a> {
    sender: &'a Address,
    public_key: &'a PublicKey,
    payload: &'a TxPayload,
    nonce: u64,
    fee: Amount,
}

impl Transaction {
    pub fn signed(key: &KeyPair, payload: TxPayload, nonce: u64, fee: Amount) -> Transaction {
        let mut tx = Transaction {
            sender: key.address(),
            public_key: key.public_key(),
            payload,
            nonce,
            fee,
            signature: Signature::EMPTY,
        };
        tx.signature = key.sign(&tx.signing_digest().0);
        tx
    }

    pub fn system(key: &KeyPair, action: SystemAction) -> Transaction {
        Transaction::signed(key, TxPayload::System { action }, 0, 0)
    }

    pub fn signing_digest(&self) -> Digest {
        let unsigned = Unsigned {
            sender: &self.sender,
            public_key: &self.public_key,
            payload: &self.payload,
            nonce: self.nonce,
            fee: self.fee,
        };
        hash(&serde_json::to_vec(&unsigned).expect("tx serializes"))
    }

    pub fn hash(&self) -> Digest {
        hash(&serde_json::to_vec(self).expect("tx serializes"))
    }

    pub fn kind(&self) -> PayloadKind {
        self.payload.kind()
    }

    pub fn is_system(&self) -> bool {
        self.kind() == PayloadKind::System
    }

    /// Serialized payload length in bytes.
    pub fn payload_size(&self) -> usize {
        serde_json::to_vec(&self.payload).map_or(0, |v| v.len())
    }

    pub fn verify_signature(&self) -> Result<(), Rejection> {
        if self.public_key.address() != self.sender {
            return Err(Rejection::Signature);
        }
        self.public_key
            .verify(&self.signing_digest().0, &self.signature)
            .map_err(|_| Rejection::Signature)
    }

    /// Registry targets this transaction would mutate; used by freeze checks.
    pub fn touched_targets(&self) -> BTreeSet<&'static str> {
        let mut out = BTreeSet::new();
        match &self.payload {
            TxPayload::Lock { .. } => {
                out.insert(crate::contracts::TOKEN_LOCKER);
            }
            TxPayload::Governance { action } => {
                if action.touches_proposals() {
                    out.insert(crate::contracts::GOVERNANCE);
                }
            }
            TxPayload::Contract { action } => {
                if let Some(t) = action.mutated_target() {
                    out.insert(t);
                }
            }
            TxPayload::Transfer { .. } | TxPayload::System { .. } => {}
        }
        out
    }
}

/// Why a transaction was refused. `reason()` gives the stable identifier
/// surfaced in logs and reports.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Rejection {
    #[error("signature does not verify")]
    Signature,
    #[error("nonce {got} does not match expected {expected}")]
    Nonce { expected: u64, got: u64 },
    #[error("transaction already pooled")]
    Duplicate,
    #[error("filter rule {rule_id} refused the transaction")]
    Filter { rule_id: String },
    #[error("target {0} is frozen")]
    Frozen(String),
    #[error("network is frozen")]
    NetworkFrozen,
    #[error("system payloads are only produced by validators")]
    SystemPayload,
    #[error("sender belongs to shard {expected}, not {got}")]
    WrongShard { expected: u32, got: u32 },
}

impl Rejection {
    pub fn reason(&self) -> String {
        match self {
            Rejection::Signature => "signature".into(),
            Rejection::Nonce { .. } => "nonce".into(),
            Rejection::Duplicate => "duplicate".into(),
            Rejection::Filter { rule_id } => format!("filter.{rule_id}"),
            Rejection::Frozen(target) => format!("frozen.{target}"),
            Rejection::NetworkFrozen => "network.frozen".into(),
            Rejection::SystemPayload => "payload.system".into(),
            Rejection::WrongShard { .. } => "shard.misrouted".into(),
        }
    }
}

/// Shard of `address`: its bytes read as a big-endian integer, mod `shards`.
pub fn route_shard(address: &Address, shards: u32) -> u32 {
    assert!(shards > 0, "shard count must be positive");
    let m = shards as u64;
    let mut acc = 0u64;
    for b in address.0 {
        acc = (acc * 256 + b as u64) % m;
    }
    acc as u32
}

/// Sender of a transaction found in a block; identity only on permissioned
/// chains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenderTrace {
    pub address: Address,
    pub identity: Option<String>,
    pub height: Height,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown transaction {0}")]
pub struct UnknownTx(pub Digest);

impl fmt::Display for SenderTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.identity {
            Some(id) => write!(f, "{} ({id})", self.address),
            None => write!(f, "{}", self.address),
        }
    }
}

/// Looks `tx_hash` up in `blocks` (a finalized canonical prefix) and reports
/// its sender. Identity comes from `state` and is withheld on permissionless
/// chains.
pub fn trace_sender<'a>(
    state: &ChainState,
    blocks: impl IntoIterator<Item = &'a crate::state::Block>,
    tx_hash: &Digest,
) -> Result<SenderTrace, UnknownTx> {
    for block in blocks {
        if let Some(tx) = block.transactions.iter().find(|t| t.hash() == *tx_hash) {
            let identity = if state.policy.is_permissioned() {
                state
                    .governance
                    .participation
                    .members
                    .get(&tx.sender)
                    .and_then(|m| m.identity.clone())
                    .or_else(|| state.account(&tx.sender).and_then(|a| a.identity.clone()))
            } else {
                None
            };
            return Ok(SenderTrace {
                address: tx.sender,
                identity,
                height: block.header.height,
            });
        }
    }
    Err(UnknownTx(*tx_hash))
}
