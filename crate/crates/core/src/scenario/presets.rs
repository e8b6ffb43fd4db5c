use thiserror::Error;

use super::config::{
    Action, ActorConfig, ConsensusSection, IncentiveSection, PatternParams, ScenarioConfig,
    ScriptedAction, SchemeSpec, SelectionKind, ShardSection, SPEC_VERSION,
};
use crate::consensus::FinalityPolicy;
use crate::governance::{Choice, Compatibility, LockWeighting, ProposalPayload, ProtocolUpgrade, ThresholdPolicy};
use crate::network::NetworkConfig;
use crate::policy::{Decentralisation, Pattern, Role};
use crate::ratio::Fraction;
use crate::state::LockPurpose;
use crate::tx::{FilterPredicate, FilterRule, PayloadKind};

pub const PRESETS: [&str; 2] = ["polkadot-like", "quorum-like"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown preset {0:?}; known presets: polkadot-like, quorum-like")]
pub struct UnknownPreset(pub String);

pub fn preset(name: &str) -> Result<ScenarioConfig, UnknownPreset> {
    match name {
        "polkadot-like" => Ok(polkadot_like()),
        "quorum-like" => Ok(quorum_like()),
        other => Err(UnknownPreset(other.to_string())),
    }
}

fn at(tick: u64, actor: &str, action: Action) -> ScriptedAction {
    ScriptedAction {
        tick,
        actor: actor.to_string(),
        action,
    }
}

fn transfer(to: &str, amount: u64) -> Action {
    transfer_with(to, amount, String::new(), 0, false)
}

fn transfer_with(to: &str, amount: u64, memo: String, fee: u64, route: bool) -> Action {
    Action::Transfer {
        to: to.to_string(),
        amount,
        memo,
        fee,
        route,
        chain: None,
    }
}

fn vote(proposal: u64, choice: Choice) -> Action {
    Action::Vote {
        proposal,
        choice,
        votes: 0,
        chain: None,
    }
}

fn upgrade(version: u32, activation_height: u64) -> ProposalPayload {
    ProposalPayload::Upgrade {
        upgrade: ProtocolUpgrade {
            new_version: version,
            compatibility: Compatibility::SoftFork,
            activation_height,
        },
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Permissionless relay chain with two shards, staked validators, council
/// fast-tracking and lock-weighted token voting.
pub fn polkadot_like() -> ScenarioConfig {
    let validators = names("v", 4);
    let mut actors: Vec<ActorConfig> = validators
        .iter()
        .map(|v| ActorConfig {
            stake: 100,
            ..ActorConfig::new(v, 1_000)
        })
        .collect();
    actors.push(ActorConfig {
        shard_balance: 500,
        ..ActorConfig::new("alice", 1_000)
    });
    actors.push(ActorConfig {
        shard_balance: 200,
        ..ActorConfig::new("bob", 500)
    });
    actors.push(ActorConfig::new("carol", 300));
    actors.push(ActorConfig {
        roles: vec![Role::CouncilMember],
        ..ActorConfig::new("council", 100)
    });
    actors.push(ActorConfig::new("treasury", 0));
    actors.push(ActorConfig::new("ops", 0));

    let all: Vec<String> = validators.clone();
    let actions = vec![
        at(
            2,
            "alice",
            Action::Lock {
                amount: 200,
                duration: 200,
                purpose: LockPurpose::VoteWeight,
                chain: None,
            },
        ),
        at(
            2,
            "alice",
            transfer_with("bob", 50, String::new(), 0, true),
        ),
        at(
            4,
            "bob",
            transfer_with("carol", 20, String::new(), 2, false),
        ),
        at(
            6,
            "alice",
            Action::SubmitProposal {
                description: "runtime v2".to_string(),
                payload: upgrade(2, 45),
                scheme: SchemeSpec::Carbonvote {
                    lock_weighting: Some(LockWeighting {
                        factor: Fraction::ONE,
                        horizon: 100,
                    }),
                },
                threshold: ThresholdPolicy::simple_majority(),
                duration: 20,
            },
        ),
        at(10, "alice", vote(0, Choice::Yes)),
        at(10, "bob", vote(0, Choice::No)),
        at(10, "carol", vote(0, Choice::Yes)),
        at(14, "council", Action::FastTrack { proposal: 0 }),
        at(
            30,
            "v0",
            Action::InstallUpgrade {
                version: 2,
                nodes: all,
            },
        ),
        at(
            34,
            "bob",
            transfer_with("carol", 1, "x".repeat(600), 0, false),
        ),
        at(40, "v1", Action::VoteFreeze { chain: None }),
        at(40, "v2", Action::VoteFreeze { chain: None }),
        at(40, "v3", Action::VoteFreeze { chain: None }),
        at(46, "ops", Action::OperatorUnfreeze { chain: None }),
        at(
            60,
            "v0",
            Action::Migrate {
                target_chain: "polka-archive".to_string(),
            },
        ),
        at(
            64,
            "ops",
            Action::Trace {
                subject: "alice".to_string(),
            },
        ),
    ];
    ScenarioConfig {
        spec_version: SPEC_VERSION,
        name: "polkadot-like".to_string(),
        chain_id: "polka".to_string(),
        seed: 7,
        ticks: 120,
        mode: Decentralisation::Permissionless,
        consensus: ConsensusSection {
            selection: SelectionKind::ProofOfStake,
            finality: FinalityPolicy::SupermajorityVote {
                quorum: Fraction::TWO_THIRDS,
            },
            incentive: IncentiveSection {
                enabled: true,
                block_reward: 5,
                validator_fee_share: Fraction::new(1, 2).expect("valid"),
                treasury: Some("treasury".to_string()),
            },
        },
        patterns: vec![
            Pattern::NetworkFreezer,
            Pattern::ShardedChain,
            Pattern::IncentiveDistributor,
            Pattern::ProtocolUpgrade,
            Pattern::DataMigrator,
            Pattern::AccountabilityTracer,
            Pattern::BenevolentDictator,
            Pattern::TransactionFilter,
            Pattern::ValidatorSelection,
            Pattern::BlockFinalityDecider,
            Pattern::TokenLocker,
            Pattern::Carbonvote,
        ],
        params: PatternParams {
            proposal_deposit: 10,
            fast_track_window: 4,
            dictator_roles: Some(vec![Role::CouncilMember]),
            filters: vec![FilterRule::new(FilterPredicate::MaxPayloadSize { bytes: 512 })],
            ..PatternParams::default()
        },
        actors,
        validators: validators.clone(),
        network: NetworkConfig {
            jitter: 1,
            ..NetworkConfig::default()
        },
        shards: Some(ShardSection {
            count: 2,
            validators: vec![validators[..2].to_vec(), validators[2..].to_vec()],
        }),
        aux_chain: None,
        actions,
    }
}

/// Permissioned consortium chain: appointed authorities, immediate
/// finality, invitation-only membership and a transaction-type filter.
pub fn quorum_like() -> ScenarioConfig {
    let validators = names("q", 4);
    let mut actors: Vec<ActorConfig> = validators
        .iter()
        .enumerate()
        .map(|(i, v)| ActorConfig {
            identity: Some(format!("Operator {i} Ltd")),
            roles: if i == 0 {
                vec![Role::Administrator, Role::Deployer]
            } else {
                Vec::new()
            },
            ..ActorConfig::new(v, 1_000)
        })
        .collect();
    actors.push(ActorConfig {
        identity: Some("Acme Corp".to_string()),
        ..ActorConfig::new("acme", 1_000)
    });
    actors.push(ActorConfig {
        identity: Some("Governance Team".to_string()),
        roles: vec![Role::BenevolentDictator],
        ..ActorConfig::new("team", 100)
    });
    actors.push(ActorConfig {
        member: false,
        ..ActorConfig::new("newco", 100)
    });

    let members = ["q0", "q1", "q2", "q3", "acme", "team", "newco"];
    let mut actions = vec![
        at(
            2,
            "q0",
            Action::IssueInvite {
                code: "newco-invite".to_string(),
            },
        ),
        at(
            6,
            "newco",
            Action::Join {
                invite: Some("newco-invite".to_string()),
                identity: Some("NewCo GmbH".to_string()),
            },
        ),
        at(10, "newco", transfer("acme", 10)),
        at(
            12,
            "acme",
            Action::Lock {
                amount: 100,
                duration: 10,
                purpose: LockPurpose::VoteWeight,
                chain: None,
            },
        ),
        at(
            14,
            "acme",
            Action::SubmitProposal {
                description: "enable v2 rules".to_string(),
                payload: upgrade(2, 30),
                scheme: SchemeSpec::OneAddressOneVote,
                threshold: ThresholdPolicy::Unanimous,
                duration: 12,
            },
        ),
    ];
    actions.extend(members.iter().map(|m| at(18, m, vote(0, Choice::Yes))));
    actions.extend([
        at(22, "team", Action::FastTrack { proposal: 0 }),
        at(
            34,
            "q0",
            Action::InstallUpgrade {
                version: 2,
                nodes: validators.clone(),
            },
        ),
        at(44, "q0", Action::FreezeNetwork { chain: None }),
        at(50, "q0", Action::UnfreezeNetwork { chain: None }),
        at(
            56,
            "q1",
            Action::ExtractLogs {
                topic: Some("member.joined".to_string()),
                from: None,
                to: None,
            },
        ),
        at(
            60,
            "q0",
            Action::Trace {
                subject: "newco".to_string(),
            },
        ),
    ]);
    ScenarioConfig {
        spec_version: SPEC_VERSION,
        name: "quorum-like".to_string(),
        chain_id: "quorum".to_string(),
        seed: 11,
        ticks: 80,
        mode: Decentralisation::Permissioned,
        consensus: ConsensusSection {
            selection: SelectionKind::ProofOfAuthority,
            finality: FinalityPolicy::Immediate,
            incentive: IncentiveSection::default(),
        },
        patterns: vec![
            Pattern::NetworkFreezer,
            Pattern::IncentiveDistributor,
            Pattern::ProtocolUpgrade,
            Pattern::ParticipationPermission,
            Pattern::AccountabilityTracer,
            Pattern::BenevolentDictator,
            Pattern::TransactionFilter,
            Pattern::ValidatorSelection,
            Pattern::BlockFinalityDecider,
            Pattern::LogExtractor,
        ],
        params: PatternParams {
            fast_track_window: 4,
            filters: vec![
                FilterRule::new(FilterPredicate::AllowedPayloadTypes {
                    allowed: [PayloadKind::Transfer, PayloadKind::Governance, PayloadKind::Contract]
                        .into_iter()
                        .collect(),
                    exempt_roles: [Role::Administrator].into_iter().collect(),
                }),
                FilterRule::new(FilterPredicate::PermissionedSenderCheck),
            ],
            ..PatternParams::default()
        },
        actors,
        validators,
        network: NetworkConfig::default(),
        shards: None,
        aux_chain: None,
        actions,
    }
}
