use thiserror::Error;

use super::{fields, Amount, Block, ChainState, Height, StateError};
use crate::consensus::{self, ConsensusError};
use crate::contracts::{self, ContractError};
use crate::governance::{self, GovernanceError};
use crate::policy::Pattern;
use crate::primitives::Address;
use crate::tx::{check_filters, Rejection, SystemAction, Transaction, TxPayload};

/// Failure of a single transaction during execution.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error(transparent)]
    Rejected(#[from] Rejection),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Governance(#[from] GovernanceError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("system transaction not sent by the block validator")]
    SystemSender,
    #[error("shard header rejected: {0}")]
    ShardHeader(String),
}

impl ExecError {
    /// Stable identifier for logs.
    pub fn reason(&self) -> String {
        match self {
            ExecError::Rejected(r) => r.reason(),
            ExecError::State(StateError::InsufficientBalance { .. }) => "balance".into(),
            ExecError::State(StateError::PatternInactive(p)) => format!("pattern.{p}"),
            ExecError::State(_) => "state".into(),
            ExecError::Governance(g) => format!("governance.{}", g.code()),
            ExecError::Contract(c) => format!("contract.{}", c.code()),
            ExecError::SystemSender => "payload.system".into(),
            ExecError::ShardHeader(_) => "shard.header".into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockError {
    #[error("block is for chain {got}, not {expected}")]
    ChainId { expected: String, got: String },
    #[error("parent does not match the current tip")]
    Parent,
    #[error("height {got} does not follow {expected}")]
    Height { expected: Height, got: Height },
    #[error("round {got} is not after {last}")]
    Round { last: u64, got: u64 },
    #[error("merkle root does not match the transactions")]
    MerkleRoot,
    #[error("validator key does not match the header's validator")]
    ValidatorKey,
    #[error("validator signature does not verify")]
    Signature,
    #[error("{got} is not the selected validator {expected}")]
    Unauthorized { expected: Address, got: Address },
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error("transaction {index} is invalid: {source}")]
    Transaction { index: usize, source: ExecError },
}

impl ChainState {
    /// Moves to `height` for a new block and runs the begin-block hook:
    /// due proposals are resolved and activated upgrades enacted.
    pub fn enter_block(&mut self, height: Height, round: u64) {
        self.height = height;
        self.last_round = round;
        self.set_cursor(None);
        self.begin_block();
    }

    pub fn begin_block(&mut self) {
        governance::on_begin_block(self);
    }

    /// Validates and applies `block`, returning the successor state. The
    /// receiver is never modified; any invalid transaction rejects the
    /// whole block.
    pub fn apply_block(&self, block: &Block) -> Result<ChainState, BlockError> {
        let h = &block.header;
        if h.chain_id != self.chain_id {
            return Err(BlockError::ChainId {
                expected: self.chain_id.clone(),
                got: h.chain_id.clone(),
            });
        }
        if h.parent != Some(self.tip) {
            return Err(BlockError::Parent);
        }
        if h.height != self.height + 1 {
            return Err(BlockError::Height {
                expected: self.height + 1,
                got: h.height,
            });
        }
        if h.round <= self.last_round && self.height > 0 {
            return Err(BlockError::Round {
                last: self.last_round,
                got: h.round,
            });
        }
        block.verify_structure()?;
        let expected = consensus::select_validator(self, h.round)?;
        if expected != h.validator {
            return Err(BlockError::Unauthorized {
                expected,
                got: h.validator,
            });
        }
        let mut next = self.clone();
        next.enter_block(h.height, h.round);
        let mut fees: Amount = 0;
        for (index, tx) in block.transactions.iter().enumerate() {
            let fee = next
                .execute(tx, h.validator)
                .map_err(|source| BlockError::Transaction { index, source })?;
            fees += fee;
        }
        next.set_cursor(None);
        let incentive = next.policy.consensus.incentive.clone();
        consensus::distribute_incentives(&mut next, h.validator, fees, &incentive);
        let hash = block.hash();
        next.tip = hash;
        next.emit(
            "block.applied",
            fields([
                ("hash", hash.to_string()),
                ("validator", h.validator.to_string()),
                ("round", h.round.to_string()),
                ("txs", block.transactions.len().to_string()),
                ("protocol_version", h.protocol_version.to_string()),
                ("selection", next.policy.consensus.selection.name().to_string()),
            ]),
        );
        Ok(next)
    }

    /// Executes one transaction inside the current block, returning the fee
    /// it paid. On error the state may be partially modified; callers work
    /// on a copy.
    pub fn execute(&mut self, tx: &Transaction, validator: Address) -> Result<Amount, ExecError> {
        self.set_cursor(Some(tx.hash()));
        let result = self.execute_inner(tx, validator);
        self.set_cursor(None);
        result
    }

    fn execute_inner(&mut self, tx: &Transaction, validator: Address) -> Result<Amount, ExecError> {
        tx.verify_signature()?;
        if let TxPayload::System { action } = &tx.payload {
            if tx.sender != validator {
                return Err(ExecError::SystemSender);
            }
            self.execute_system(action)?;
            return Ok(0);
        }
        let expected = self.nonce(&tx.sender);
        if tx.nonce != expected {
            return Err(Rejection::Nonce {
                expected,
                got: tx.nonce,
            }
            .into());
        }
        if let Some(shard) = self.policy.shard {
            let home = crate::tx::route_shard(&tx.sender, shard.shard_count);
            if home != shard.shard_id {
                return Err(Rejection::WrongShard {
                    expected: home,
                    got: shard.shard_id,
                }
                .into());
            }
        }
        check_filters(self, tx)?;
        let fee = if self.policy.consensus.incentive.enabled {
            self.debit(tx.sender, tx.fee)?;
            tx.fee
        } else {
            0
        };
        {
            let account = self.account_mut(tx.sender);
            account.nonce += 1;
            if account.public_key.is_none() {
                account.public_key = Some(tx.public_key);
            }
        }
        match &tx.payload {
            TxPayload::Transfer { to, amount, memo } => {
                self.transfer(tx.sender, *to, *amount)?;
                self.emit(
                    "transfer",
                    fields([
                        ("from", tx.sender.to_string()),
                        ("to", to.to_string()),
                        ("amount", amount.to_string()),
                        ("memo_bytes", memo.len().to_string()),
                    ]),
                );
            }
            TxPayload::Lock {
                amount,
                duration,
                purpose,
            } => {
                self.require_pattern(Pattern::TokenLocker)?;
                contracts::ensure_not_frozen(self, contracts::TOKEN_LOCKER)?;
                self.lock_tokens(tx.sender, *amount, *duration, *purpose)?;
            }
            TxPayload::Governance { action } => {
                governance::execute(self, tx.sender, &tx.public_key, action)?;
            }
            TxPayload::Contract { action } => {
                contracts::execute(self, tx.sender, action)?;
            }
            TxPayload::System { .. } => unreachable!("handled above"),
        }
        Ok(fee)
    }

    fn execute_system(&mut self, action: &SystemAction) -> Result<(), ExecError> {
        match action {
            SystemAction::IncludeShardHeader { header } => {
                self.require_pattern(Pattern::ShardedChain)?;
                let h = &header.header;
                crate::state::block::verify_header(h, &header.validator_key, &header.signature)
                    .map_err(|e| ExecError::ShardHeader(e.to_string()))?;
                let head = self
                    .shard_heads
                    .get(&h.shard_id)
                    .copied()
                    .ok_or_else(|| ExecError::ShardHeader(format!("unknown shard {}", h.shard_id)))?;
                if h.parent != Some(head.hash) || h.height != head.height + 1 {
                    return Err(ExecError::ShardHeader(format!(
                        "shard {} header does not extend its head",
                        h.shard_id
                    )));
                }
                let hash = h.hash();
                self.shard_heads.insert(
                    h.shard_id,
                    super::ShardHead {
                        hash,
                        height: h.height,
                    },
                );
                self.emit(
                    "shard.header-included",
                    fields([
                        ("shard", h.shard_id.to_string()),
                        ("shard_height", h.height.to_string()),
                        ("shard_hash", hash.to_string()),
                    ]),
                );
            }
            SystemAction::ImportCrossChainResult { result } => {
                governance::import_cross_chain_result(self, result)?;
            }
            SystemAction::AbortCrossChainVote { proposal, reason } => {
                governance::abort_cross_chain_vote(self, *proposal, reason)?;
            }
        }
        Ok(())
    }

}
