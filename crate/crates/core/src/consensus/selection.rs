use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConsensusError, ValidatorSelectionPolicy};
use crate::primitives::{hash_concat, Address};
use crate::state::{ChainState, LockPurpose};

/// Active validator-candidacy stake per address, at the state's height.
pub fn stake_table(state: &ChainState) -> BTreeMap<Address, u64> {
    let mut table = BTreeMap::new();
    for (addr, account) in &state.accounts {
        let stake: u64 = account
            .locks
            .iter()
            .filter(|l| l.purpose == LockPurpose::ValidatorCandidacy && l.is_active(state.height))
            .map(|l| l.amount)
            .sum();
        if stake > 0 {
            table.insert(*addr, stake);
        }
    }
    table
}

/// Voting weight of each validator: stake under proof-of-stake, one per
/// authority otherwise.
pub fn validator_weights(state: &ChainState) -> BTreeMap<Address, u64> {
    match &state.policy.consensus.selection {
        ValidatorSelectionPolicy::ProofOfStake => stake_table(state),
        ValidatorSelectionPolicy::ProofOfAuthority { authorities }
        | ValidatorSelectionPolicy::RoundRobin { authorities } => {
            authorities.iter().map(|a| (*a, 1)).collect()
        }
    }
}

/// The validator for `round` under the chain's own policy and seed.
pub fn select_validator(state: &ChainState, round: u64) -> Result<Address, ConsensusError> {
    let consensus = &state.policy.consensus;
    select_validator_with(state, round, consensus.seed, &consensus.selection)
}

pub fn select_validator_with(
    state: &ChainState,
    round: u64,
    seed: u64,
    policy: &ValidatorSelectionPolicy,
) -> Result<Address, ConsensusError> {
    match policy {
        ValidatorSelectionPolicy::ProofOfAuthority { authorities }
        | ValidatorSelectionPolicy::RoundRobin { authorities } => {
            if authorities.is_empty() {
                return Err(ConsensusError::NoEligibleValidator { round });
            }
            Ok(authorities[(round % authorities.len() as u64) as usize])
        }
        ValidatorSelectionPolicy::ProofOfStake => {
            let stakes = stake_table(state);
            let total: u64 = stakes.values().sum();
            if total == 0 {
                return Err(ConsensusError::NoEligibleValidator { round });
            }
            let key = hash_concat(&[
                b"govsim/pos-lottery/",
                state.chain_id.as_bytes(),
                &round.to_be_bytes(),
                &seed.to_be_bytes(),
            ]);
            let mut rng = ChaCha8Rng::from_seed(key.0);
            let ticket = rng.gen_range(0..total);
            let mut cumulative = 0;
            for (addr, stake) in &stakes {
                cumulative += stake;
                if ticket < cumulative {
                    return Ok(*addr);
                }
            }
            unreachable!("ticket below total stake")
        }
    }
}
