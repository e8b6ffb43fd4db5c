use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{GovernanceError, ProposalId};
use crate::state::{ChainState, Height};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compatibility {
    SoftFork,
    HardFork,
}

impl Compatibility {
    pub fn name(self) -> &'static str {
        match self {
            Compatibility::SoftFork => "soft-fork",
            Compatibility::HardFork => "hard-fork",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolUpgrade {
    pub new_version: u32,
    pub compatibility: Compatibility,
    pub activation_height: Height,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovedUpgrade {
    pub upgrade: ProtocolUpgrade,
    pub proposal: ProposalId,
    pub approved_at: Height,
    /// Set once the activation height has been reached on chain.
    pub enacted: bool,
}

/// Installs `upgrade` into a node's set of supported versions. Only upgrades
/// approved on the node's chain can be installed; they take effect at their
/// activation height.
pub fn enact_upgrade(
    state: &ChainState,
    installed: &mut BTreeSet<u32>,
    upgrade: &ProtocolUpgrade,
) -> Result<(), GovernanceError> {
    match state.governance.upgrades.get(&upgrade.new_version) {
        Some(a) if a.upgrade == *upgrade => {
            installed.insert(upgrade.new_version);
            Ok(())
        }
        _ => Err(GovernanceError::UpgradeNotApproved(upgrade.new_version)),
    }
}

/// Version a node produces and validates under at `height`: the highest
/// installed version whose approved activation height has been reached.
pub fn rule_version(state: &ChainState, installed: &BTreeSet<u32>, height: Height) -> u32 {
    state
        .governance
        .upgrades
        .values()
        .filter(|a| installed.contains(&a.upgrade.new_version) && a.upgrade.activation_height <= height)
        .map(|a| a.upgrade.new_version)
        .fold(state.policy.genesis_version, u32::max)
}

/// Whether a node running `local` accepts a block at `height` produced under
/// `remote`. Versions separated only by soft-fork upgrades stay mutually
/// acceptable once the newer one has activated; a hard fork in between
/// splits them.
pub fn accepts_block_version(state: &ChainState, local: u32, remote: u32, height: Height) -> bool {
    if local == remote {
        return true;
    }
    let (lo, hi) = (local.min(remote), local.max(remote));
    let upgrades = &state.governance.upgrades;
    let Some(top) = upgrades.get(&hi) else {
        return false;
    };
    if top.upgrade.activation_height > height {
        return false;
    }
    upgrades
        .range(lo + 1..=hi)
        .all(|(_, a)| a.upgrade.compatibility == Compatibility::SoftFork)
}
