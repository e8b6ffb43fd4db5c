//! The pluggable governance configuration of one chain.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::consensus::ConsensusPolicy;
use crate::state::{Amount, Height};
use crate::tx::FilterRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decentralisation {
    Permissionless,
    Permissioned,
}

impl fmt::Display for Decentralisation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decentralisation::Permissionless => "permissionless",
            Decentralisation::Permissioned => "permissioned",
        })
    }
}

/// Which deployments a pattern applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applicability {
    Permissioned,
    Permissionless,
    Both,
}

impl Applicability {
    pub fn admits(self, mode: Decentralisation) -> bool {
        matches!(
            (self, mode),
            (Applicability::Both, _)
                | (Applicability::Permissioned, Decentralisation::Permissioned)
                | (Applicability::Permissionless, Decentralisation::Permissionless)
        )
    }
}

impl fmt::Display for Applicability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Applicability::Permissioned => "Permissioned",
            Applicability::Permissionless => "Permissionless",
            Applicability::Both => "Permissioned & permissionless",
        })
    }
}

/// The twenty pattern-oriented governance components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    NetworkFreezer,
    ShardedChain,
    IncentiveDistributor,
    ProtocolUpgrade,
    DataMigrator,
    ParticipationPermission,
    AccountabilityTracer,
    BenevolentDictator,
    TransactionFilter,
    ValidatorSelection,
    BlockFinalityDecider,
    LogExtractor,
    ContractFreezer,
    SocialContract,
    ScamList,
    TokenLocker,
    Carbonvote,
    QuadraticVoting,
    CrossChainTokenVoting,
    LiquidDemocracy,
}

impl Pattern {
    pub const ALL: [Pattern; 20] = [
        Pattern::NetworkFreezer,
        Pattern::ShardedChain,
        Pattern::IncentiveDistributor,
        Pattern::ProtocolUpgrade,
        Pattern::DataMigrator,
        Pattern::ParticipationPermission,
        Pattern::AccountabilityTracer,
        Pattern::BenevolentDictator,
        Pattern::TransactionFilter,
        Pattern::ValidatorSelection,
        Pattern::BlockFinalityDecider,
        Pattern::LogExtractor,
        Pattern::ContractFreezer,
        Pattern::SocialContract,
        Pattern::ScamList,
        Pattern::TokenLocker,
        Pattern::Carbonvote,
        Pattern::QuadraticVoting,
        Pattern::CrossChainTokenVoting,
        Pattern::LiquidDemocracy,
    ];

    /// The fourteen rows of the Polkadot/Quorum comparison, in table order.
    pub const COMPARISON_ROWS: [Pattern; 14] = [
        Pattern::NetworkFreezer,
        Pattern::ShardedChain,
        Pattern::IncentiveDistributor,
        Pattern::ProtocolUpgrade,
        Pattern::DataMigrator,
        Pattern::ParticipationPermission,
        Pattern::AccountabilityTracer,
        Pattern::BenevolentDictator,
        Pattern::TransactionFilter,
        Pattern::ValidatorSelection,
        Pattern::BlockFinalityDecider,
        Pattern::LogExtractor,
        Pattern::TokenLocker,
        Pattern::Carbonvote,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::NetworkFreezer => "network-freezer",
            Pattern::ShardedChain => "sharded-chain",
            Pattern::IncentiveDistributor => "incentive-distributor",
            Pattern::ProtocolUpgrade => "protocol-upgrade",
            Pattern::DataMigrator => "data-migrator",
            Pattern::ParticipationPermission => "participation-permission",
            Pattern::AccountabilityTracer => "accountability-tracer",
            Pattern::BenevolentDictator => "benevolent-dictator",
            Pattern::TransactionFilter => "transaction-filter",
            Pattern::ValidatorSelection => "validator-selection",
            Pattern::BlockFinalityDecider => "block-finality-decider",
            Pattern::LogExtractor => "log-extractor",
            Pattern::ContractFreezer => "contract-freezer",
            Pattern::SocialContract => "social-contract",
            Pattern::ScamList => "scam-list",
            Pattern::TokenLocker => "token-locker",
            Pattern::Carbonvote => "carbonvote",
            Pattern::QuadraticVoting => "quadratic-voting",
            Pattern::CrossChainTokenVoting => "cross-chain-token-voting",
            Pattern::LiquidDemocracy => "liquid-democracy",
        }
    }

    pub fn applicability(self) -> Applicability {
        match self {
            Pattern::ParticipationPermission => Applicability::Permissioned,
            Pattern::ScamList
            | Pattern::TokenLocker
            | Pattern::Carbonvote
            | Pattern::QuadraticVoting
            | Pattern::CrossChainTokenVoting
            | Pattern::LiquidDemocracy => Applicability::Permissionless,
            _ => Applicability::Both,
        }
    }

    pub fn is_mandatory(self) -> bool {
        matches!(
            self,
            Pattern::ProtocolUpgrade
                | Pattern::AccountabilityTracer
                | Pattern::BenevolentDictator
                | Pattern::ValidatorSelection
        )
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown pattern `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Deployer,
    Administrator,
    BenevolentDictator,
    CouncilMember,
    Ordinary,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Deployer => "deployer",
            Role::Administrator => "administrator",
            Role::BenevolentDictator => "benevolent-dictator",
            Role::CouncilMember => "council-member",
            Role::Ordinary => "ordinary",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Routing of a shard chain inside a sharded deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardAssignment {
    pub shard_id: u32,
    pub shard_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernancePolicy {
    pub mode: Decentralisation,
    pub patterns: BTreeSet<Pattern>,
    pub consensus: ConsensusPolicy,
    pub filters: Vec<FilterRule>,
    /// Tokens locked by each proposer; zero disables deposits.
    pub proposal_deposit: Amount,
    pub fast_track_window: Height,
    /// Roles allowed to cancel or fast-track proposals.
    pub dictator_roles: BTreeSet<Role>,
    pub scam_list_writers: BTreeSet<Role>,
    pub genesis_version: u32,
    pub shard: Option<ShardAssignment>,
}

impl GovernancePolicy {
    pub fn new(mode: Decentralisation, consensus: ConsensusPolicy) -> GovernancePolicy {
        GovernancePolicy {
            mode,
            patterns: Pattern::ALL
                .into_iter()
                .filter(|p| p.is_mandatory())
                .collect(),
            consensus,
            filters: Vec::new(),
            proposal_deposit: 0,
            fast_track_window: 10,
            dictator_roles: [Role::BenevolentDictator, Role::CouncilMember]
                .into_iter()
                .collect(),
            scam_list_writers: [
                Role::Administrator,
                Role::BenevolentDictator,
                Role::CouncilMember,
            ]
            .into_iter()
            .collect(),
            genesis_version: 1,
            shard: None,
        }
    }

    pub fn with_patterns(mut self, patterns: impl IntoIterator<Item = Pattern>) -> Self {
        self.patterns.extend(patterns);
        self
    }

    pub fn is_active(&self, pattern: Pattern) -> bool {
        self.patterns.contains(&pattern)
    }

    pub fn is_permissioned(&self) -> bool {
        self.mode == Decentralisation::Permissioned
    }

    /// Patterns whose applicability excludes this policy's mode.
    pub fn misplaced_patterns(&self) -> Vec<Pattern> {
        self.patterns
            .iter()
            .copied()
            .filter(|p| !p.applicability().admits(self.mode))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn applicability_column() {
        assert_eq!(Pattern::TokenLocker.applicability(), Applicability::Permissionless);
        assert_eq!(
            Pattern::ParticipationPermission.applicability(),
            Applicability::Permissioned
        );
        assert!(Pattern::NetworkFreezer
            .applicability()
            .admits(Decentralisation::Permissioned));
        assert!(!Applicability::Permissionless.admits(Decentralisation::Permissioned));
    }

    #[test]
    fn names_round_trip() {
        for p in Pattern::ALL {
            assert_eq!(p.name().parse::<Pattern>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
        assert_eq!(Pattern::ALL.iter().filter(|p| p.is_mandatory()).count(), 4);
    }
}
