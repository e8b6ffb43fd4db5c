use serde::{Deserialize, Serialize};

use super::{BlockError, Height};
use crate::primitives::{
    hash, merkle_root, Address, Digest, KeyPair, MerkleProof, MerkleTree, PublicKey, Signature,
};
use crate::tx::Transaction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub chain_id: String,
    pub parent: Option<Digest>,
    pub height: Height,
    pub round: u64,
    pub merkle_root: Digest,
    pub validator: Address,
    pub protocol_version: u32,
    pub shard_id: u32,
}

impl BlockHeader {
    pub fn hash(&self) -> Digest {
        hash(&serde_json::to_vec(self).expect("header serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
    pub validator_key: PublicKey,
    /// Validator signature over the header hash.
    pub signature: Signature,
}

/// Merkle root over transaction hashes; an empty list uses a single
/// empty-string leaf.
pub fn transactions_root(txs: &[Transaction]) -> Digest {
    if txs.is_empty() {
        return merkle_root(&[b""]).expect("one leaf");
    }
    let leaves: Vec<Digest> = txs.iter().map(Transaction::hash).collect();
    merkle_root(&leaves).expect("non-empty")
}

/// Header fields chosen by a producer before its transactions are fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTemplate {
    pub chain_id: String,
    pub parent: Digest,
    pub height: Height,
    pub round: u64,
    pub protocol_version: u32,
    pub shard_id: u32,
}

impl Block {
    /// Genesis blocks commit to the genesis state through their Merkle root
    /// and carry no signature.
    pub fn genesis(
        chain_id: &str,
        height: Height,
        state_hash: Digest,
        shard_id: u32,
        version: u32,
    ) -> Block {
        Block {
            header: BlockHeader {
                chain_id: chain_id.to_string(),
                parent: None,
                height,
                round: 0,
                merkle_root: merkle_root(&[state_hash]).expect("one leaf"),
                validator: Address::ZERO,
                protocol_version: version,
                shard_id,
            },
            transactions: Vec::new(),
            validator_key: PublicKey([0; 32]),
            signature: Signature::EMPTY,
        }
    }

    pub fn produce(template: BlockTemplate, transactions: Vec<Transaction>, key: &KeyPair) -> Block {
        let header = BlockHeader {
            chain_id: template.chain_id,
            parent: Some(template.parent),
            height: template.height,
            round: template.round,
            merkle_root: transactions_root(&transactions),
            validator: key.address(),
            protocol_version: template.protocol_version,
            shard_id: template.shard_id,
        };
        let signature = key.sign(&header.hash().0);
        Block {
            header,
            transactions,
            validator_key: key.public_key(),
            signature,
        }
    }

    pub fn hash(&self) -> Digest {
        self.header.hash()
    }

    pub fn is_genesis(&self) -> bool {
        self.header.parent.is_none()
    }

    /// Merkle root, validator key and signature checks. Linkage and
    /// authorization need the parent state and live in `apply_block`.
    pub fn verify_structure(&self) -> Result<(), BlockError> {
        if self.is_genesis() {
            return Ok(());
        }
        if transactions_root(&self.transactions) != self.header.merkle_root {
            return Err(BlockError::MerkleRoot);
        }
        verify_header(&self.header, &self.validator_key, &self.signature)
    }

    pub fn tx_proof(&self, index: usize) -> Option<MerkleProof> {
        if self.transactions.is_empty() {
            return None;
        }
        let leaves: Vec<Digest> = self.transactions.iter().map(Transaction::hash).collect();
        MerkleTree::new(&leaves).ok()?.proof(index).ok()
    }
}

pub(crate) fn verify_header(
    header: &BlockHeader,
    key: &PublicKey,
    signature: &Signature,
) -> Result<(), BlockError> {
    if key.address() != header.validator {
        return Err(BlockError::ValidatorKey);
    }
    key.verify(&header.hash().0, signature)
        .map_err(|_| BlockError::Signature)
}
