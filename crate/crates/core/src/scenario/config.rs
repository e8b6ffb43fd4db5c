use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::consensus::FinalityPolicy;
use crate::governance::{Choice, LockWeighting, ProposalPayload, ThresholdPolicy};
use crate::network::NetworkConfig;
use crate::policy::{Applicability, Decentralisation, Pattern, Role};
use crate::ratio::Fraction;
use crate::state::{Amount, Height, LockPurpose};
use crate::tx::{FilterPredicate, FilterRule};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionKind {
    ProofOfStake,
    ProofOfAuthority,
    RoundRobin,
}

fn one() -> Fraction {
    Fraction::ONE
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncentiveSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub block_reward: Amount,
    #[serde(default = "one")]
    pub validator_fee_share: Fraction,
    /// Actor receiving the fee remainder; without one it is destroyed.
    #[serde(default)]
    pub treasury: Option<String>,
}

impl Default for IncentiveSection {
    fn default() -> Self {
        IncentiveSection {
            enabled: false,
            block_reward: 0,
            validator_fee_share: Fraction::ONE,
            treasury: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusSection {
    pub selection: SelectionKind,
    pub finality: FinalityPolicy,
    #[serde(default)]
    pub incentive: IncentiveSection,
}

fn ten() -> Height {
    10
}
fn version_one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternParams {
    #[serde(default)]
    pub proposal_deposit: Amount,
    #[serde(default = "ten")]
    pub fast_track_window: Height,
    #[serde(default)]
    pub dictator_roles: Option<Vec<Role>>,
    #[serde(default)]
    pub scam_list_writers: Option<Vec<Role>>,
    #[serde(default)]
    pub filters: Vec<FilterRule>,
    /// Actors allowed to trigger the contract freezer.
    #[serde(default)]
    pub freezer_eligible: Vec<String>,
    #[serde(default = "version_one")]
    pub genesis_version: u32,
}

impl Default for PatternParams {
    fn default() -> Self {
        PatternParams {
            proposal_deposit: 0,
            fast_track_window: ten(),
            dictator_roles: None,
            scam_list_writers: None,
            filters: Vec::new(),
            freezer_eligible: Vec::new(),
            genesis_version: 1,
        }
    }
}

fn yes() -> bool {
    true
}
fn long_stake() -> Height {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorConfig {
    pub name: String,
    #[serde(default)]
    pub balance: Amount,
    #[serde(default)]
    pub roles: Vec<Role>,
    #[serde(default)]
    pub identity: Option<String>,
    /// Validator-candidacy stake locked at genesis.
    #[serde(default)]
    pub stake: Amount,
    #[serde(default = "long_stake")]
    pub stake_duration: Height,
    #[serde(default = "yes")]
    pub member: bool,
    /// Balance held on the actor's home shard.
    #[serde(default)]
    pub shard_balance: Amount,
}

impl ActorConfig {
    pub fn new(name: &str, balance: Amount) -> ActorConfig {
        ActorConfig {
            name: name.to_string(),
            balance,
            roles: Vec::new(),
            identity: None,
            stake: 0,
            stake_duration: long_stake(),
            member: true,
            shard_balance: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShardSection {
    pub count: u32,
    /// Authorities of each shard, by shard id.
    pub validators: Vec<Vec<String>>,
}

fn permissioned() -> Decentralisation {
    Decentralisation::Permissioned
}
fn aux_patterns() -> Vec<Pattern> {
    vec![Pattern::NetworkFreezer]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxChainSection {
    pub chain_id: String,
    #[serde(default = "permissioned")]
    pub mode: Decentralisation,
    pub validators: Vec<String>,
    /// Opens mirrored votes; gets the administrator and deployer roles.
    pub admin: String,
    /// Signs finished tallies.
    pub tally: String,
    /// Main-chain validator forwarding new cross-chain proposals.
    pub bridge: String,
    #[serde(default = "aux_patterns")]
    pub patterns: Vec<Pattern>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchemeSpec {
    OneAddressOneVote,
    Carbonvote {
        #[serde(default)]
        lock_weighting: Option<LockWeighting>,
    },
    Quadratic {
        cost_account: String,
    },
    LiquidDemocracy,
    /// Ballots are cast on the configured auxiliary chain.
    CrossChainToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Action {
    Transfer {
        to: String,
        amount: Amount,
        #[serde(default)]
        memo: String,
        #[serde(default)]
        fee: Amount,
        /// Send to the sender's shard instead of the main chain.
        #[serde(default)]
        route: bool,
        #[serde(default)]
        chain: Option<String>,
    },
    Lock {
        amount: Amount,
        duration: Height,
        purpose: LockPurpose,
        #[serde(default)]
        chain: Option<String>,
    },
    SubmitProposal {
        description: String,
        payload: ProposalPayload,
        scheme: SchemeSpec,
        threshold: ThresholdPolicy,
        /// Blocks from the submitting node's tip to the deadline.
        duration: Height,
    },
    Vote {
        proposal: u64,
        choice: Choice,
        #[serde(default)]
        votes: u64,
        #[serde(default)]
        chain: Option<String>,
    },
    Delegate {
        proposal: u64,
        to: String,
    },
    RevokeDelegation {
        proposal: u64,
    },
    Cancel {
        proposal: u64,
        #[serde(default)]
        slash_deposit: bool,
    },
    FastTrack {
        proposal: u64,
    },
    Join {
        #[serde(default)]
        invite: Option<String>,
        #[serde(default)]
        identity: Option<String>,
    },
    IssueInvite {
        code: String,
    },
    GrantRole {
        to: String,
        role: Role,
    },
    ScamListAdd {
        target: String,
        #[serde(default)]
        note: String,
    },
    SocialContractSet {
        maintainer_spec: String,
    },
    FreezeContract {
        target: String,
    },
    UnfreezeContract {
        target: String,
    },
    FreezeNetwork {
        #[serde(default)]
        chain: Option<String>,
    },
    VoteFreeze {
        #[serde(default)]
        chain: Option<String>,
    },
    UnfreezeNetwork {
        #[serde(default)]
        chain: Option<String>,
    },
    OperatorUnfreeze {
        #[serde(default)]
        chain: Option<String>,
    },
    /// Installs an approved version on the nodes run by `nodes` (the actor's
    /// own node when empty).
    InstallUpgrade {
        version: u32,
        #[serde(default)]
        nodes: Vec<String>,
    },
    Migrate {
        target_chain: String,
    },
    ExtractLogs {
        #[serde(default)]
        topic: Option<String>,
        #[serde(default)]
        from: Option<Height>,
        #[serde(default)]
        to: Option<Height>,
    },
    /// Traces the sender of `subject`'s latest finalized transaction.
    Trace {
        subject: String,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Transfer { .. } => "transfer",
            Action::Lock { .. } => "lock",
            Action::SubmitProposal { .. } => "submit-proposal",
            Action::Vote { .. } => "vote",
            Action::Delegate { .. } => "delegate",
            Action::RevokeDelegation { .. } => "revoke-delegation",
            Action::Cancel { .. } => "cancel",
            Action::FastTrack { .. } => "fast-track",
            Action::Join { .. } => "join",
            Action::IssueInvite { .. } => "issue-invite",
            Action::GrantRole { .. } => "grant-role",
            Action::ScamListAdd { .. } => "scam-list-add",
            Action::SocialContractSet { .. } => "social-contract-set",
            Action::FreezeContract { .. } => "freeze-contract",
            Action::UnfreezeContract { .. } => "unfreeze-contract",
            Action::FreezeNetwork { .. } => "freeze-network",
            Action::VoteFreeze { .. } => "vote-freeze",
            Action::UnfreezeNetwork { .. } => "unfreeze-network",
            Action::OperatorUnfreeze { .. } => "operator-unfreeze",
            Action::InstallUpgrade { .. } => "install-upgrade",
            Action::Migrate { .. } => "migrate",
            Action::ExtractLogs { .. } => "extract-logs",
            Action::Trace { .. } => "trace",
        }
    }

    /// Actor names the action refers to besides its own actor.
    fn referenced_actors(&self) -> Vec<&str> {
        match self {
            Action::Transfer { to, .. } | Action::Delegate { to, .. } | Action::GrantRole { to, .. } => {
                vec![to]
            }
            Action::ScamListAdd { target, .. } => vec![target],
            Action::Trace { subject } => vec![subject],
            Action::InstallUpgrade { nodes, .. } => nodes.iter().map(String::as_str).collect(),
            Action::SubmitProposal {
                scheme: SchemeSpec::Quadratic { cost_account },
                ..
            } => vec![cost_account],
            _ => Vec::new(),
        }
    }
}

// No deny_unknown_fields here: serde does not support it next to a
// flattened field. Action itself still refuses unknown keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedAction {
    pub tick: u64,
    pub actor: String,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub spec_version: u32,
    pub name: String,
    pub chain_id: String,
    /// Drives message jitter; the network section's own seed is ignored.
    pub seed: u64,
    /// Ticks to simulate.
    pub ticks: u64,
    pub mode: Decentralisation,
    pub consensus: ConsensusSection,
    pub patterns: Vec<Pattern>,
    #[serde(default)]
    pub params: PatternParams,
    pub actors: Vec<ActorConfig>,
    /// Actors running main-chain nodes; under proof of authority they are
    /// the authorities, in turn order.
    pub validators: Vec<String>,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub shards: Option<ShardSection>,
    #[serde(default)]
    pub aux_chain: Option<AuxChainSection>,
    #[serde(default)]
    pub actions: Vec<ScriptedAction>,
}

/// A rejected configuration: the offending field and the rule it breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub constraint: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: impl Into<String>, constraint: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        constraint: constraint.into(),
    }
}

fn level(a: Applicability) -> &'static str {
    match a {
        Applicability::Permissioned => "permissioned only",
        Applicability::Permissionless => "permissionless only",
        Applicability::Both => "either level",
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| err("<document>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn has_pattern(&self, pattern: Pattern) -> bool {
        pattern.is_mandatory() || self.patterns.contains(&pattern)
    }

    pub fn actor(&self, name: &str) -> Option<&ActorConfig> {
        self.actors.iter().find(|a| a.name == name)
    }

    /// Checks every constraint; the first violation names its field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.spec_version != SPEC_VERSION {
            return Err(err(
                "spec_version",
                format!("unsupported version {}; expected {SPEC_VERSION}", self.spec_version),
            ));
        }
        if self.chain_id.is_empty() {
            return Err(err("chain_id", "must not be empty"));
        }
        if self.ticks == 0 {
            return Err(err("ticks", "must be at least 1"));
        }
        let mut seen = BTreeSet::new();
        for (i, p) in self.patterns.iter().enumerate() {
            if !seen.insert(*p) {
                return Err(err(format!("patterns[{i}]"), format!("{p} is listed twice")));
            }
            let a = p.applicability();
            if !a.admits(self.mode) {
                return Err(err(
                    format!("patterns[{i}]"),
                    format!(
                        "{p} has decentralisation level \"{a}\" ({}) but mode is {}",
                        level(a),
                        self.mode
                    ),
                ));
            }
        }
        let mut names = BTreeSet::new();
        for (i, a) in self.actors.iter().enumerate() {
            if a.name.is_empty() || a.name.contains('@') {
                return Err(err(format!("actors[{i}].name"), "must be non-empty and contain no '@'"));
            }
            if !names.insert(a.name.as_str()) {
                return Err(err(format!("actors[{i}].name"), format!("actor {} declared twice", a.name)));
            }
            if a.stake > a.balance {
                return Err(err(format!("actors[{i}].stake"), "stake exceeds the actor's balance"));
            }
            if a.shard_balance > 0 && self.shards.is_none() {
                return Err(err(format!("actors[{i}].shard_balance"), "needs a shards section"));
            }
        }
        let known = |field: String, name: &str| -> Result<(), ConfigError> {
            if names.contains(name) {
                Ok(())
            } else {
                Err(err(field, format!("undeclared actor {name}")))
            }
        };
        if self.mode == Decentralisation::Permissioned
            && !self.actors.iter().any(|a| a.roles.contains(&Role::Administrator))
        {
            return Err(err("actors", "a permissioned chain needs an actor with the administrator role"));
        }
        if self.validators.is_empty() {
            return Err(err("validators", "at least one validator node is required"));
        }
        let mut vset = BTreeSet::new();
        for (i, v) in self.validators.iter().enumerate() {
            known(format!("validators[{i}]"), v)?;
            if !vset.insert(v) {
                return Err(err(format!("validators[{i}]"), format!("{v} listed twice")));
            }
        }
        if self.consensus.selection == SelectionKind::ProofOfStake {
            if !self.has_pattern(Pattern::TokenLocker) {
                return Err(err(
                    "consensus.selection",
                    "proof-of-stake needs the token-locker pattern, which is permissionless only",
                ));
            }
            if let Some(v) = self.validators.iter().find(|v| self.actor(v).is_some_and(|a| a.stake == 0)) {
                return Err(err("validators", format!("proof-of-stake validator {v} has no stake")));
            }
        }
        if matches!(self.consensus.finality, FinalityPolicy::RelayInclusion) {
            return Err(err(
                "consensus.finality",
                "relay-inclusion is reserved for shard chains",
            ));
        }
        if let FinalityPolicy::SupermajorityVote { quorum } = self.consensus.finality {
            if !quorum.is_at_most_one() {
                return Err(err("consensus.finality.quorum", "must not exceed 1"));
            }
        }
        let inc = &self.consensus.incentive;
        if inc.enabled && !self.has_pattern(Pattern::IncentiveDistributor) {
            return Err(err(
                "consensus.incentive.enabled",
                "requires the incentive-distributor pattern",
            ));
        }
        if !inc.validator_fee_share.is_at_most_one() {
            return Err(err("consensus.incentive.validator_fee_share", "must not exceed 1"));
        }
        if let Some(t) = &inc.treasury {
            known("consensus.incentive.treasury".into(), t)?;
        }
        if !self.params.filters.is_empty() && !self.has_pattern(Pattern::TransactionFilter) {
            return Err(err("params.filters", "requires the transaction-filter pattern"));
        }
        for (i, f) in self.params.filters.iter().enumerate() {
            if matches!(f.predicate, FilterPredicate::PermissionedSenderCheck)
                && self.mode == Decentralisation::Permissionless
            {
                return Err(err(
                    format!("params.filters[{i}]"),
                    "permissioned-sender-check needs participation permission, which is permissioned only",
                ));
            }
        }
        for (i, a) in self.params.freezer_eligible.iter().enumerate() {
            known(format!("params.freezer_eligible[{i}]"), a)?;
        }
        if !self.params.freezer_eligible.is_empty() && !self.has_pattern(Pattern::ContractFreezer) {
            return Err(err("params.freezer_eligible", "requires the contract-freezer pattern"));
        }
        self.network
            .validate()
            .map_err(|e| err("network", e))?;
        if let Some(s) = &self.shards {
            if !self.has_pattern(Pattern::ShardedChain) {
                return Err(err("shards", "requires the sharded-chain pattern"));
            }
            if s.count == 0 {
                return Err(err("shards.count", "must be at least 1"));
            }
            if s.validators.len() != s.count as usize {
                return Err(err(
                    "shards.validators",
                    format!("expected {} validator lists, got {}", s.count, s.validators.len()),
                ));
            }
            for (i, list) in s.validators.iter().enumerate() {
                if list.is_empty() {
                    return Err(err(format!("shards.validators[{i}]"), "a shard needs a validator"));
                }
                for (j, v) in list.iter().enumerate() {
                    known(format!("shards.validators[{i}][{j}]"), v)?;
                }
            }
        }
        if let Some(aux) = &self.aux_chain {
            if aux.chain_id == self.chain_id {
                return Err(err("aux_chain.chain_id", "must differ from the main chain id"));
            }
            for (i, p) in aux.patterns.iter().enumerate() {
                if !p.applicability().admits(aux.mode) {
                    return Err(err(
                        format!("aux_chain.patterns[{i}]"),
                        format!("{p} has decentralisation level \"{}\" but the auxiliary chain is {}", p.applicability(), aux.mode),
                    ));
                }
            }
            for (i, v) in aux.validators.iter().enumerate() {
                known(format!("aux_chain.validators[{i}]"), v)?;
            }
            if aux.validators.is_empty() {
                return Err(err("aux_chain.validators", "at least one validator is required"));
            }
            for (field, who) in [("aux_chain.admin", &aux.admin), ("aux_chain.tally", &aux.tally)] {
                if !aux.validators.contains(who) {
                    return Err(err(field, format!("{who} must be one of the auxiliary validators")));
                }
            }
            if !self.validators.contains(&aux.bridge) {
                return Err(err("aux_chain.bridge", format!("{} must be a main-chain validator", aux.bridge)));
            }
        }
        let mut last_tick = 0;
        let chains = self.chain_ids();
        for (i, sa) in self.actions.iter().enumerate() {
            let field = |f: &str| format!("actions[{i}].{f}");
            known(field("actor"), &sa.actor)?;
            for r in sa.action.referenced_actors() {
                known(field(sa.action.name()), r)?;
            }
            if sa.tick > self.ticks {
                return Err(err(field("tick"), format!("beyond the horizon of {} ticks", self.ticks)));
            }
            if sa.tick < last_tick {
                return Err(err(field("tick"), "actions must be listed in tick order"));
            }
            last_tick = sa.tick;
            match &sa.action {
                Action::Lock {
                    chain: None, ..
                } if !self.has_pattern(Pattern::TokenLocker) && self.mode == Decentralisation::Permissioned => {
                    // Allowed on purpose: such a lock is refused at run time.
                }
                Action::Transfer { route: true, .. } if self.shards.is_none() => {
                    return Err(err(field("route"), "routing needs a shards section"));
                }
                Action::SubmitProposal {
                    scheme: SchemeSpec::CrossChainToken,
                    ..
                } if self.aux_chain.is_none() => {
                    return Err(err(field("scheme"), "cross-chain-token voting needs an aux_chain section"));
                }
                Action::SubmitProposal { duration: 0, .. } => {
                    return Err(err(field("duration"), "must be at least 1"));
                }
                Action::Migrate { target_chain } if chains.contains(target_chain) => {
                    return Err(err(field("target_chain"), format!("chain {target_chain} already exists")));
                }
                Action::ExtractLogs {
                    from: Some(a),
                    to: Some(b),
                    ..
                } if a > b => {
                    return Err(err(field("from"), "range starts after it ends"));
                }
                _ => {}
            }
            let chain = match &sa.action {
                Action::Transfer { chain, .. }
                | Action::Lock { chain, .. }
                | Action::Vote { chain, .. }
                | Action::FreezeNetwork { chain }
                | Action::VoteFreeze { chain }
                | Action::UnfreezeNetwork { chain }
                | Action::OperatorUnfreeze { chain } => chain.as_ref(),
                _ => None,
            };
            if let Some(c) = chain {
                let migrated = self.actions[..i]
                    .iter()
                    .any(|a| matches!(&a.action, Action::Migrate { target_chain } if target_chain == c));
                if !chains.contains(c) && !migrated {
                    return Err(err(field("chain"), format!("unknown chain {c}")));
                }
            }
        }
        Ok(())
    }

    pub fn shard_chain_id(&self, shard: u32) -> String {
        format!("{}-shard-{shard}", self.chain_id)
    }

    /// Chains present from genesis.
    pub fn chain_ids(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        out.insert(self.chain_id.clone());
        if let Some(s) = &self.shards {
            out.extend((0..s.count).map(|i| self.shard_chain_id(i)));
        }
        if let Some(a) = &self.aux_chain {
            out.insert(a.chain_id.clone());
        }
        out
    }

    /// Roles by actor, for reports.
    pub fn roles(&self) -> BTreeMap<&str, &[Role]> {
        self.actors.iter().map(|a| (a.name.as_str(), a.roles.as_slice())).collect()
    }
}
