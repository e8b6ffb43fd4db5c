//! Validator selection, fork choice, finality and incentive distribution.
//!
//! Everything here is a pure function over state values, so distinct chains
//! can be evaluated from different threads without coordination.

mod finality;
mod fork_choice;
mod incentives;
mod selection;

pub use finality::{finalized_height, supermajority_height, FinalityInput};
pub use fork_choice::{choose_canonical_chain, choose_canonical_chain_from, BlockTree, TreeEntry};
pub use incentives::distribute_incentives;
pub use selection::{select_validator, select_validator_with, stake_table, validator_weights};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::Address;
use crate::ratio::Fraction;
use crate::state::{Amount, Height};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ValidatorSelectionPolicy {
    /// Stake-weighted lottery over active validator-candidacy locks.
    ProofOfStake,
    /// Authorities appointed by the administrator, taken in turn.
    ProofOfAuthority { authorities: Vec<Address> },
    /// Stand-in for proof-of-work: plain rotation with no hashing work.
    RoundRobin { authorities: Vec<Address> },
}

impl ValidatorSelectionPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            ValidatorSelectionPolicy::ProofOfStake => "proof-of-stake",
            ValidatorSelectionPolicy::ProofOfAuthority { .. } => "proof-of-authority",
            ValidatorSelectionPolicy::RoundRobin { .. } => "round-robin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FinalityPolicy {
    KDeep { k: Height },
    Immediate,
    SupermajorityVote { quorum: Fraction },
    /// Shard chains: a block is final once the relay block carrying its
    /// header is final on the relay chain.
    RelayInclusion,
}

impl FinalityPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            FinalityPolicy::KDeep { .. } => "k-deep",
            FinalityPolicy::Immediate => "immediate",
            FinalityPolicy::SupermajorityVote { .. } => "supermajority-vote",
            FinalityPolicy::RelayInclusion => "relay-inclusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncentivePolicy {
    pub enabled: bool,
    pub block_reward: Amount,
    /// Share of fees paid to the block validator; the remainder goes to the
    /// treasury, or is destroyed when no treasury is configured.
    pub validator_fee_share: Fraction,
    pub treasury: Option<Address>,
}

impl IncentivePolicy {
    pub fn disabled() -> IncentivePolicy {
        IncentivePolicy {
            enabled: false,
            block_reward: 0,
            validator_fee_share: Fraction::ONE,
            treasury: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusPolicy {
    pub selection: ValidatorSelectionPolicy,
    pub finality: FinalityPolicy,
    pub incentive: IncentivePolicy,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("no eligible validator for round {round}")]
    NoEligibleValidator { round: u64 },
}
