use super::IncentivePolicy;
use crate::primitives::Address;
use crate::state::{fields, Amount, ChainState};

/// Pays the block reward and distributes `fees` already collected from
/// senders. A disabled policy leaves the state untouched.
pub fn distribute_incentives(
    state: &mut ChainState,
    validator: Address,
    fees: Amount,
    policy: &IncentivePolicy,
) {
    if !policy.enabled {
        return;
    }
    if policy.block_reward > 0 {
        state.credit(validator, policy.block_reward);
        state.supply.minted += policy.block_reward;
        state.emit(
            "reward.minted",
            fields([
                ("validator", validator.to_string()),
                ("amount", policy.block_reward.to_string()),
            ]),
        );
    }
    if fees == 0 {
        return;
    }
    let to_validator = policy.validator_fee_share.apply_floor(fees);
    let reserved = fees - to_validator;
    state.credit(validator, to_validator);
    let sink = match policy.treasury {
        Some(treasury) => {
            state.credit(treasury, reserved);
            treasury.to_string()
        }
        None => {
            state.supply.burned += reserved;
            "burned".to_string()
        }
    };
    state.emit(
        "fee.distributed",
        fields([
            ("validator", validator.to_string()),
            ("validator_amount", to_validator.to_string()),
            ("reserved_amount", reserved.to_string()),
            ("reserved_to", sink),
        ]),
    );
}
