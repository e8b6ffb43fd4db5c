use std::cmp::Reverse;
use std::collections::BTreeMap;

use super::{check_filters, Rejection, Transaction};
use crate::primitives::{Address, Digest, KeyPair};
use crate::state::{Block, BlockTemplate, ChainState};

/// Pending transactions of one node, keyed by `(sender, nonce)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TxPool {
    pending: BTreeMap<(Address, u64), Transaction>,
}

/// A pooled transaction dropped because it can no longer be applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eviction {
    pub tx_hash: Digest,
    pub sender: Address,
    pub nonce: u64,
    pub reason: String,
}

impl Eviction {
    fn of(tx: &Transaction, reason: String) -> Eviction {
        Eviction {
            tx_hash: tx.hash(),
            sender: tx.sender,
            nonce: tx.nonce,
            reason,
        }
    }
}

/// Checks shared by pool admission and re-validation.
fn admissible(state: &ChainState, tx: &Transaction) -> Result<(), Rejection> {
    if let Some(shard) = state.policy.shard {
        let home = super::route_shard(&tx.sender, shard.shard_count);
        if home != shard.shard_id {
            return Err(Rejection::WrongShard {
                expected: home,
                got: shard.shard_id,
            });
        }
    }
    check_filters(state, tx)?;
    if let Some(target) = tx
        .touched_targets()
        .into_iter()
        .find(|t| state.contracts.is_frozen(t))
    {
        return Err(Rejection::Frozen(target.to_string()));
    }
    Ok(())
}

impl TxPool {
    pub fn new() -> TxPool {
        TxPool::default()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn get(&self, sender: &Address, nonce: u64) -> Option<&Transaction> {
        self.pending.get(&(*sender, nonce))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transaction> {
        self.pending.values()
    }

    /// Admits `tx` against the node's current canonical state.
    pub fn submit(&mut self, state: &ChainState, tx: Transaction) -> Result<Digest, Rejection> {
        if tx.is_system() {
            return Err(Rejection::SystemPayload);
        }
        tx.verify_signature()?;
        let expected = state.nonce(&tx.sender);
        if tx.nonce < expected {
            return Err(Rejection::Nonce {
                expected,
                got: tx.nonce,
            });
        }
        let key = (tx.sender, tx.nonce);
        if self.pending.contains_key(&key) {
            return Err(Rejection::Duplicate);
        }
        admissible(state, &tx)?;
        let hash = tx.hash();
        self.pending.insert(key, tx);
        Ok(hash)
    }

    /// Drops transactions made stale by `state` silently, and evicts those
    /// that an active filter or freeze now refuses.
    pub fn revalidate(&mut self, state: &ChainState) -> Vec<Eviction> {
        let mut evicted = Vec::new();
        self.pending.retain(|(sender, nonce), tx| {
            if *nonce < state.nonce(sender) {
                return false;
            }
            match admissible(state, tx) {
                Ok(()) => true,
                Err(r) => {
                    evicted.push(Eviction::of(tx, r.reason()));
                    false
                }
            }
        });
        evicted
    }

    pub fn remove(&mut self, sender: &Address, nonce: u64) -> Option<Transaction> {
        self.pending.remove(&(*sender, nonce))
    }

    /// Candidates by fee descending, then sender ascending, then nonce.
    pub fn ordered(&self) -> Vec<&Transaction> {
        let mut txs: Vec<&Transaction> = self.pending.values().collect();
        txs.sort_by_key(|t| (Reverse(t.fee), t.sender, t.nonce));
        txs
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub block: Block,
    /// Pooled transactions that failed their dry run.
    pub evicted: Vec<Eviction>,
    /// System transactions that failed their dry run.
    pub dropped_system: Vec<Eviction>,
}

/// Builds and signs a candidate block on top of `state`.
///
/// System transactions go first. Pooled transactions are then taken in
/// [`TxPool::ordered`] order, each dry-run against the running state; one
/// whose nonce is ahead of its sender is retried in a later pass, and one
/// that fails outright is evicted.
pub fn build_candidate_block(
    state: &ChainState,
    pool: &TxPool,
    key: &KeyPair,
    template: BlockTemplate,
    system_txs: Vec<Transaction>,
    max_txs: usize,
) -> BuildOutcome {
    let validator = key.address();
    let mut work = state.clone();
    work.enter_block(template.height, template.round);
    let mut included = Vec::new();
    let mut dropped_system = Vec::new();
    for tx in system_txs {
        let mut trial = work.clone();
        match trial.execute(&tx, validator) {
            Ok(_) => {
                work = trial;
                included.push(tx);
            }
            Err(e) => dropped_system.push(Eviction::of(&tx, e.reason())),
        }
    }
    let mut evicted = Vec::new();
    let mut remaining = pool.ordered();
    let mut taken = 0;
    while taken < max_txs && !remaining.is_empty() {
        let mut deferred = Vec::new();
        let mut progress = false;
        for tx in remaining {
            if taken >= max_txs {
                break;
            }
            let expected = work.nonce(&tx.sender);
            if tx.nonce > expected {
                deferred.push(tx);
                continue;
            }
            if tx.nonce < expected {
                continue;
            }
            let mut trial = work.clone();
            match trial.execute(tx, validator) {
                Ok(_) => {
                    work = trial;
                    included.push(tx.clone());
                    taken += 1;
                    progress = true;
                }
                Err(e) => evicted.push(Eviction::of(tx, e.reason())),
            }
        }
        if !progress {
            break;
        }
        remaining = deferred;
    }
    BuildOutcome {
        block: Block::produce(template, included, key),
        evicted,
        dropped_system,
    }
}
