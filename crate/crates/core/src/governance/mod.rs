//! Roles, membership, the proposal lifecycle, voting schemes, protocol
//! upgrades and cross-chain vote results.

mod crosschain;
mod upgrade;
mod voting;

pub use crosschain::{
    abort_cross_chain_vote, import_cross_chain_result, open_mirrored_vote, CrossChainResult,
    ResultBody,
};
pub use upgrade::{accepts_block_version, enact_upgrade, rule_version, ApprovedUpgrade, Compatibility, ProtocolUpgrade};
pub use voting::{
    resolve_liquid, tally, tally_proposal, Ballot, Choice, LockWeighting, TallyResult,
    ThresholdPolicy, VotingScheme,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::{self, ContractError};
use crate::policy::{Pattern, Role};
use crate::primitives::{hash_concat, Address, Digest, PublicKey};
use crate::state::{fields, Amount, ChainState, Height, LockId, LockPurpose, StateError};
use crate::tx::FilterRule;

pub type ProposalId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JoinVia {
    DeployerGrant,
    Invite,
    Open,
}

impl JoinVia {
    pub fn name(self) -> &'static str {
        match self {
            JoinVia::DeployerGrant => "deployer-grant",
            JoinVia::Invite => "invite",
            JoinVia::Open => "open",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub identity: Option<String>,
    pub via: JoinVia,
    pub height: Height,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InviteRecord {
    pub issued_by: Address,
    pub height: Height,
    pub consumed_by: Option<Address>,
}

/// Invites are stored by hash; the plain code only appears in the join.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipationRegistry {
    pub invites: BTreeMap<Digest, InviteRecord>,
    pub members: BTreeMap<Address, MemberRecord>,
}

pub fn invite_hash(code: &str) -> Digest {
    hash_concat(&[b"govsim/invite/", code.as_bytes()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalStatus {
    Open,
    Approved,
    Rejected,
    Cancelled,
    Enacted,
}

impl ProposalStatus {
    pub fn name(self) -> &'static str {
        match self {
            ProposalStatus::Open => "open",
            ProposalStatus::Approved => "approved",
            ProposalStatus::Rejected => "rejected",
            ProposalStatus::Cancelled => "cancelled",
            ProposalStatus::Enacted => "enacted",
        }
    }

    /// The declared transition relation.
    pub fn may_become(self, next: ProposalStatus) -> bool {
        use ProposalStatus::*;
        matches!(
            (self, next),
            (Open, Approved) | (Open, Rejected) | (Open, Cancelled) | (Approved, Enacted)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "parameter", rename_all = "kebab-case")]
pub enum ParameterChange {
    ProposalDeposit { value: Amount },
    FastTrackWindow { value: Height },
    BlockReward { value: Amount },
    AddFilter { rule: FilterRule },
    RemoveFilter { rule_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProposalPayload {
    Upgrade { upgrade: ProtocolUpgrade },
    ParameterChange { change: ParameterChange },
    Freeze { target: String, freeze: bool },
}

impl ProposalPayload {
    pub fn name(&self) -> &'static str {
        match self {
            ProposalPayload::Upgrade { .. } => "upgrade",
            ProposalPayload::ParameterChange { .. } => "parameter-change",
            ProposalPayload::Freeze { .. } => "freeze",
        }
    }
}

/// Reference from a mirrored vote on an auxiliary chain to its home proposal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MirrorRef {
    pub home_chain: String,
    pub proposal: ProposalId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: ProposalId,
    pub proposer: Address,
    pub description: String,
    pub payload: ProposalPayload,
    pub scheme: VotingScheme,
    pub threshold: ThresholdPolicy,
    pub deadline: Height,
    pub opened_at: Height,
    pub deposit_lock: Option<LockId>,
    pub status: ProposalStatus,
    /// Voting weight of every eligible voter, fixed when the proposal opens.
    pub eligible: BTreeMap<Address, u128>,
    /// Weights are integers scaled by this factor.
    pub weight_scale: u128,
    pub ballots: BTreeMap<Address, Ballot>,
    pub delegations: BTreeMap<Address, Address>,
    pub tally: Option<TallyResult>,
    pub resolved_at: Option<Height>,
    pub aborted: bool,
    pub mirror_of: Option<MirrorRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernanceState {
    pub roles: BTreeMap<Address, BTreeSet<Role>>,
    pub participation: ParticipationRegistry,
    pub proposals: BTreeMap<ProposalId, Proposal>,
    pub next_proposal_id: ProposalId,
    /// On-chain protocol version: the highest enacted upgrade.
    pub protocol_version: u32,
    /// Approved upgrades by target version.
    pub upgrades: BTreeMap<u32, ApprovedUpgrade>,
}

impl GovernanceState {
    pub fn new(version: u32) -> GovernanceState {
        GovernanceState {
            roles: BTreeMap::new(),
            participation: ParticipationRegistry::default(),
            proposals: BTreeMap::new(),
            next_proposal_id: 0,
            protocol_version: version,
            upgrades: BTreeMap::new(),
        }
    }

    pub fn grant_role(&mut self, address: Address, role: Role) {
        self.roles.entry(address).or_default().insert(role);
    }

    pub fn proposal(&self, id: ProposalId) -> Option<&Proposal> {
        self.proposals.get(&id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum GovAction {
    Join {
        #[serde(default)]
        invite: Option<String>,
        #[serde(default)]
        identity: Option<String>,
    },
    IssueInvite {
        code_hash: Digest,
    },
    GrantRole {
        to: Address,
        role: Role,
    },
    SubmitProposal {
        description: String,
        payload: ProposalPayload,
        scheme: VotingScheme,
        threshold: ThresholdPolicy,
        deadline: Height,
    },
    Vote {
        proposal: ProposalId,
        choice: Choice,
        #[serde(default)]
        votes: u64,
    },
    Delegate {
        proposal: ProposalId,
        to: Address,
    },
    RevokeDelegation {
        proposal: ProposalId,
    },
    Cancel {
        proposal: ProposalId,
        #[serde(default)]
        slash_deposit: bool,
    },
    FastTrack {
        proposal: ProposalId,
    },
    /// Opens, on an auxiliary chain, a vote mirroring a home proposal.
    OpenMirroredVote {
        home_chain: String,
        home_proposal: ProposalId,
        payload: ProposalPayload,
        threshold: ThresholdPolicy,
        deadline: Height,
        weights: BTreeMap<Address, u128>,
        weight_scale: u128,
    },
}

impl GovAction {
    /// Whether the action reads or writes proposal state, which a frozen
    /// governance registry forbids.
    pub fn touches_proposals(&self) -> bool {
        !matches!(
            self,
            GovAction::Join { .. } | GovAction::IssueInvite { .. } | GovAction::GrantRole { .. }
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GovernanceError {
    #[error("{0} is not a member")]
    NotMember(Address),
    #[error("{0} is already a member")]
    AlreadyMember(Address),
    #[error("an invite is required to join a permissioned chain")]
    MissingInvite,
    #[error("unknown invite")]
    UnknownInvite,
    #[error("invite already used")]
    InviteConsumed,
    #[error("invite already issued")]
    InviteExists,
    #[error("an identity label is required to join a permissioned chain")]
    MissingIdentity,
    #[error("{actor} lacks the {needed} role")]
    Unauthorized { actor: Address, needed: String },
    #[error("unknown proposal {0}")]
    UnknownProposal(ProposalId),
    #[error("proposal {id} is {status}, not open", status = status.name())]
    NotOpen { id: ProposalId, status: ProposalStatus },
    #[error("voting on proposal {id} closed at height {deadline}")]
    VotingClosed { id: ProposalId, deadline: Height },
    #[error("proposal {id} cannot be tallied before height {deadline}")]
    TallyBeforeDeadline { id: ProposalId, deadline: Height },
    #[error("{0} is not eligible to vote on this proposal")]
    NotEligible(Address),
    #[error("a quadratic ballot needs at least one vote")]
    ZeroVotes,
    #[error("ballot costs {cost} but only {available} is spendable")]
    UnpayableCost { cost: Amount, available: Amount },
    #[error("cost account cannot refund {0}")]
    RefundUnavailable(Amount),
    #[error("cannot delegate to oneself")]
    SelfDelegation,
    #[error("no delegation to revoke")]
    NoDelegation,
    #[error("delegation needs a liquid-democracy proposal")]
    NotLiquid,
    #[error("ballots for this proposal are cast on chain {0}")]
    VotesOnAuxChain(String),
    #[error("voting scheme needs the {0} pattern")]
    SchemeInactive(Pattern),
    #[error("deadline {deadline} is not after the current height {height}")]
    DeadlineInPast { deadline: Height, height: Height },
    #[error("upgrade to version {proposed} does not exceed version {current}")]
    StaleVersion { proposed: u32, current: u32 },
    #[error("activation height {activation} must be after the deadline {deadline}")]
    ActivationTooEarly { activation: Height, deadline: Height },
    #[error("deposit of {needed} exceeds the {available} spendable")]
    InsufficientDeposit { needed: Amount, available: Amount },
    #[error("invalid proposal: {0}")]
    InvalidPayload(String),
    #[error("cross-chain result rejected: {0}")]
    BadResult(String),
    #[error("proposal {0} is not a cross-chain vote")]
    NotCrossChain(ProposalId),
    #[error("cross-chain vote on proposal {0} was aborted")]
    Aborted(ProposalId),
    #[error("upgrade to version {0} has not been approved")]
    UpgradeNotApproved(u32),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    State(#[from] StateError),
}

impl GovernanceError {
    pub fn code(&self) -> &'static str {
        use GovernanceError::*;
        match self {
            NotMember(_) => "not-member",
            AlreadyMember(_) => "already-member",
            MissingInvite => "missing-invite",
            UnknownInvite => "unknown-invite",
            InviteConsumed => "invite-consumed",
            InviteExists => "invite-exists",
            MissingIdentity => "missing-identity",
            Unauthorized { .. } => "unauthorized",
            UnknownProposal(_) => "unknown-proposal",
            NotOpen { .. } => "not-open",
            VotingClosed { .. } => "voting-closed",
            TallyBeforeDeadline { .. } => "tally-before-deadline",
            NotEligible(_) => "not-eligible",
            ZeroVotes => "zero-votes",
            UnpayableCost { .. } => "unpayable-cost",
            RefundUnavailable(_) => "refund-unavailable",
            SelfDelegation => "self-delegation",
            NoDelegation => "no-delegation",
            NotLiquid => "not-liquid",
            VotesOnAuxChain(_) => "votes-on-aux-chain",
            SchemeInactive(_) => "scheme-inactive",
            DeadlineInPast { .. } => "deadline-in-past",
            StaleVersion { .. } => "stale-version",
            ActivationTooEarly { .. } => "activation-too-early",
            InsufficientDeposit { .. } => "insufficient-deposit",
            InvalidPayload(_) => "invalid-payload",
            BadResult(_) => "bad-result",
            NotCrossChain(_) => "not-cross-chain",
            Aborted(_) => "aborted",
            UpgradeNotApproved(_) => "upgrade-not-approved",
            Contract(_) => "contract",
            State(_) => "state",
        }
    }
}

type GovResult<T> = Result<T, GovernanceError>;

/// Dispatches a governance transaction from `sender`.
pub fn execute(
    state: &mut ChainState,
    sender: Address,
    _public_key: &PublicKey,
    action: &GovAction,
) -> GovResult<()> {
    match action {
        GovAction::Join { invite, identity } => {
            join(state, sender, invite.as_deref(), identity.as_deref())
        }
        GovAction::IssueInvite { code_hash } => issue_invite(state, sender, *code_hash),
        GovAction::GrantRole { to, role } => grant_role(state, sender, *to, *role),
        GovAction::SubmitProposal {
            description,
            payload,
            scheme,
            threshold,
            deadline,
        } => submit_proposal(
            state,
            sender,
            description,
            payload.clone(),
            scheme.clone(),
            *threshold,
            *deadline,
        )
        .map(|_| ()),
        GovAction::Vote {
            proposal,
            choice,
            votes,
        } => cast_vote(state, sender, *proposal, *choice, *votes),
        GovAction::Delegate { proposal, to } => delegate(state, sender, *proposal, *to),
        GovAction::RevokeDelegation { proposal } => revoke_delegation(state, sender, *proposal),
        GovAction::Cancel {
            proposal,
            slash_deposit,
        } => cancel_proposal(state, sender, *proposal, *slash_deposit),
        GovAction::FastTrack { proposal } => fast_track(state, sender, *proposal),
        GovAction::OpenMirroredVote {
            home_chain,
            home_proposal,
            payload,
            threshold,
            deadline,
            weights,
            weight_scale,
        } => open_mirrored_vote(
            state,
            sender,
            MirrorRef {
                home_chain: home_chain.clone(),
                proposal: *home_proposal,
            },
            payload.clone(),
            *threshold,
            *deadline,
            weights.clone(),
            *weight_scale,
        )
        .map(|_| ()),
    }
}

fn require_any_role(state: &ChainState, actor: Address, roles: &[Role]) -> GovResult<Role> {
    let held = state.roles_of(&actor);
    roles
        .iter()
        .copied()
        .find(|r| held.contains(r))
        .ok_or_else(|| GovernanceError::Unauthorized {
            actor,
            needed: roles
                .iter()
                .map(|r| r.name())
                .collect::<Vec<_>>()
                .join(" or "),
        })
}

pub fn join(
    state: &mut ChainState,
    who: Address,
    invite: Option<&str>,
    identity: Option<&str>,
) -> GovResult<()> {
    if state.is_member(&who) {
        return Err(GovernanceError::AlreadyMember(who));
    }
    let height = state.height;
    if state.policy.is_permissioned() {
        state.require_pattern(Pattern::ParticipationPermission)?;
        let code = invite.ok_or(GovernanceError::MissingInvite)?;
        let identity = identity
            .filter(|s| !s.trim().is_empty())
            .ok_or(GovernanceError::MissingIdentity)?;
        let key = invite_hash(code);
        let record = state
            .governance
            .participation
            .invites
            .get_mut(&key)
            .ok_or(GovernanceError::UnknownInvite)?;
        if record.consumed_by.is_some() {
            return Err(GovernanceError::InviteConsumed);
        }
        record.consumed_by = Some(who);
        state.governance.participation.members.insert(
            who,
            MemberRecord {
                identity: Some(identity.to_string()),
                via: JoinVia::Invite,
                height,
            },
        );
        state.account_mut(who).identity = Some(identity.to_string());
        state.emit(
            "member.joined",
            fields([
                ("address", who.to_string()),
                ("via", JoinVia::Invite.name().to_string()),
                ("identity", identity.to_string()),
                ("invite_hash", key.to_string()),
            ]),
        );
    } else {
        state.governance.participation.members.insert(
            who,
            MemberRecord {
                identity: None,
                via: JoinVia::Open,
                height,
            },
        );
        state.emit(
            "member.joined",
            fields([
                ("address", who.to_string()),
                ("via", JoinVia::Open.name().to_string()),
            ]),
        );
    }
    Ok(())
}

pub fn issue_invite(state: &mut ChainState, actor: Address, code_hash: Digest) -> GovResult<()> {
    state.require_pattern(Pattern::ParticipationPermission)?;
    let role = require_any_role(state, actor, &[Role::Deployer, Role::Administrator])?;
    let height = state.height;
    let invites = &mut state.governance.participation.invites;
    if invites.contains_key(&code_hash) {
        return Err(GovernanceError::InviteExists);
    }
    invites.insert(
        code_hash,
        InviteRecord {
            issued_by: actor,
            height,
            consumed_by: None,
        },
    );
    state.emit(
        "invite.issued",
        fields([
            ("invite_hash", code_hash.to_string()),
            ("by", actor.to_string()),
            ("by_role", role.name().to_string()),
        ]),
    );
    Ok(())
}

pub fn grant_role(state: &mut ChainState, actor: Address, to: Address, role: Role) -> GovResult<()> {
    let by_role = require_any_role(
        state,
        actor,
        &[Role::Deployer, Role::Administrator, Role::BenevolentDictator],
    )?;
    if role == Role::Deployer {
        return Err(GovernanceError::Unauthorized {
            actor,
            needed: "genesis (deployer cannot be granted)".into(),
        });
    }
    if state.policy.is_permissioned() && !state.is_member(&to) {
        return Err(GovernanceError::NotMember(to));
    }
    state.governance.grant_role(to, role);
    state.emit(
        "role.granted",
        fields([
            ("address", to.to_string()),
            ("role", role.name().to_string()),
            ("by", actor.to_string()),
            ("by_role", by_role.name().to_string()),
        ]),
    );
    Ok(())
}

fn validate_payload(state: &ChainState, payload: &ProposalPayload, deadline: Height) -> GovResult<()> {
    match payload {
        ProposalPayload::Upgrade { upgrade } => {
            state.require_pattern(Pattern::ProtocolUpgrade)?;
            let current = state
                .governance
                .upgrades
                .keys()
                .next_back()
                .copied()
                .unwrap_or(0)
                .max(state.governance.protocol_version);
            if upgrade.new_version <= current {
                return Err(GovernanceError::StaleVersion {
                    proposed: upgrade.new_version,
                    current,
                });
            }
            if upgrade.activation_height <= deadline {
                return Err(GovernanceError::ActivationTooEarly {
                    activation: upgrade.activation_height,
                    deadline,
                });
            }
        }
        ProposalPayload::ParameterChange { change } => {
            if matches!(change, ParameterChange::AddFilter { .. } | ParameterChange::RemoveFilter { .. }) {
                state.require_pattern(Pattern::TransactionFilter)?;
            }
            if matches!(change, ParameterChange::BlockReward { .. }) {
                state.require_pattern(Pattern::IncentiveDistributor)?;
            }
        }
        ProposalPayload::Freeze { target, .. } => {
            state.require_pattern(Pattern::ContractFreezer)?;
            if !contracts::TARGETS.contains(&target.as_str()) {
                return Err(GovernanceError::InvalidPayload(format!("unknown target {target}")));
            }
        }
    }
    Ok(())
}

/// Opens a proposal, locking the policy's deposit when one is configured.
pub fn submit_proposal(
    state: &mut ChainState,
    proposer: Address,
    description: &str,
    payload: ProposalPayload,
    scheme: VotingScheme,
    threshold: ThresholdPolicy,
    deadline: Height,
) -> GovResult<ProposalId> {
    contracts::ensure_not_frozen(state, contracts::GOVERNANCE)?;
    if !state.is_member(&proposer) {
        return Err(GovernanceError::NotMember(proposer));
    }
    if let Some(p) = scheme.pattern() {
        if !state.policy.is_active(p) {
            return Err(GovernanceError::SchemeInactive(p));
        }
    }
    scheme.validate()?;
    if matches!(scheme, VotingScheme::Mirror { .. }) {
        return Err(GovernanceError::InvalidPayload(
            "mirrored votes are opened with open-mirrored-vote".into(),
        ));
    }
    let height = state.height;
    if deadline <= height {
        return Err(GovernanceError::DeadlineInPast { deadline, height });
    }
    validate_payload(state, &payload, deadline)?;
    let deposit = state.policy.proposal_deposit;
    let deposit_lock = if deposit > 0 {
        state.require_pattern(Pattern::TokenLocker)?;
        contracts::ensure_not_frozen(state, contracts::TOKEN_LOCKER)?;
        let available = state.spendable(&proposer);
        if available < deposit {
            return Err(GovernanceError::InsufficientDeposit {
                needed: deposit,
                available,
            });
        }
        Some(state.lock_tokens(proposer, deposit, deadline - height, LockPurpose::ProposalDeposit)?)
    } else {
        None
    };
    let (eligible, weight_scale) = voting::snapshot_weights(state, &scheme);
    let id = state.governance.next_proposal_id;
    state.governance.next_proposal_id += 1;
    state.emit(
        "proposal.open",
        fields([
            ("proposal", id.to_string()),
            ("proposer", proposer.to_string()),
            ("payload", payload.name().to_string()),
            ("scheme", scheme.name().to_string()),
            (
                "weighting",
                match &scheme {
                    VotingScheme::Carbonvote {
                        lock_weighting: Some(w),
                    } => format!("balance+lock-period:{}/{}", w.factor, w.horizon),
                    VotingScheme::Carbonvote { .. } | VotingScheme::CrossChainToken { .. } => {
                        "balance".to_string()
                    }
                    VotingScheme::LiquidDemocracy => "delegated-balance".to_string(),
                    _ => "one-per-member".to_string(),
                },
            ),
            ("threshold", threshold.to_string()),
            ("deadline", deadline.to_string()),
            ("deposit", deposit.to_string()),
            ("eligible", eligible.len().to_string()),
        ]),
    );
    state.governance.proposals.insert(
        id,
        Proposal {
            id,
            proposer,
            description: description.to_string(),
            payload,
            scheme,
            threshold,
            deadline,
            opened_at: height,
            deposit_lock,
            status: ProposalStatus::Open,
            eligible,
            weight_scale,
            ballots: BTreeMap::new(),
            delegations: BTreeMap::new(),
            tally: None,
            resolved_at: None,
            aborted: false,
            mirror_of: None,
        },
    );
    Ok(id)
}

fn open_proposal(state: &ChainState, id: ProposalId) -> GovResult<&Proposal> {
    let p = state
        .governance
        .proposals
        .get(&id)
        .ok_or(GovernanceError::UnknownProposal(id))?;
    if p.status != ProposalStatus::Open {
        return Err(GovernanceError::NotOpen {
            id,
            status: p.status,
        });
    }
    Ok(p)
}

fn votable(state: &ChainState, id: ProposalId, voter: Address) -> GovResult<&Proposal> {
    contracts::ensure_not_frozen(state, contracts::GOVERNANCE)?;
    let p = open_proposal(state, id)?;
    if state.height >= p.deadline {
        return Err(GovernanceError::VotingClosed {
            id,
            deadline: p.deadline,
        });
    }
    if let VotingScheme::CrossChainToken { aux_chain, .. } = &p.scheme {
        return Err(GovernanceError::VotesOnAuxChain(aux_chain.clone()));
    }
    if !p.eligible.contains_key(&voter) {
        return Err(GovernanceError::NotEligible(voter));
    }
    Ok(p)
}

/// Records `voter`'s ballot, replacing any earlier one. Quadratic ballots
/// pay `votes²` to the cost account and refund a replaced ballot in full.
pub fn cast_vote(
    state: &mut ChainState,
    voter: Address,
    id: ProposalId,
    choice: Choice,
    votes: u64,
) -> GovResult<()> {
    let p = votable(state, id, voter)?;
    let scheme = p.scheme.clone();
    let previous = p.ballots.get(&voter).cloned();
    let mut paid = 0;
    if let VotingScheme::Quadratic { cost_account } = &scheme {
        if votes == 0 {
            return Err(GovernanceError::ZeroVotes);
        }
        let cost = votes.checked_mul(votes).ok_or(StateError::Overflow)?;
        let refund = previous.as_ref().map_or(0, |b| b.paid);
        if state.spendable(cost_account) < refund {
            return Err(GovernanceError::RefundUnavailable(refund));
        }
        let available = state.spendable(&voter) + refund;
        if available < cost {
            return Err(GovernanceError::UnpayableCost { cost, available });
        }
        state.transfer(*cost_account, voter, refund)?;
        state.transfer(voter, *cost_account, cost)?;
        paid = cost;
    }
    let height = state.height;
    let p = state.governance.proposals.get_mut(&id).expect("checked");
    p.delegations.remove(&voter);
    p.ballots.insert(
        voter,
        Ballot {
            choice,
            votes,
            paid,
            height,
        },
    );
    state.emit(
        "vote.cast",
        fields([
            ("proposal", id.to_string()),
            ("voter", voter.to_string()),
            ("choice", choice.name().to_string()),
            ("scheme", scheme.name().to_string()),
            ("votes", votes.to_string()),
            ("cost", paid.to_string()),
            ("replaced", previous.is_some().to_string()),
        ]),
    );
    Ok(())
}

pub fn delegate(state: &mut ChainState, voter: Address, id: ProposalId, to: Address) -> GovResult<()> {
    let p = votable(state, id, voter)?;
    if p.scheme != VotingScheme::LiquidDemocracy {
        return Err(GovernanceError::NotLiquid);
    }
    if to == voter {
        return Err(GovernanceError::SelfDelegation);
    }
    if !p.eligible.contains_key(&to) {
        return Err(GovernanceError::NotEligible(to));
    }
    let p = state.governance.proposals.get_mut(&id).expect("checked");
    p.ballots.remove(&voter);
    p.delegations.insert(voter, to);
    state.emit(
        "vote.delegated",
        fields([
            ("proposal", id.to_string()),
            ("voter", voter.to_string()),
            ("to", to.to_string()),
        ]),
    );
    Ok(())
}

pub fn revoke_delegation(state: &mut ChainState, voter: Address, id: ProposalId) -> GovResult<()> {
    votable(state, id, voter)?;
    let p = state.governance.proposals.get_mut(&id).expect("checked");
    if p.delegations.remove(&voter).is_none() {
        return Err(GovernanceError::NoDelegation);
    }
    state.emit(
        "vote.delegation-revoked",
        fields([("proposal", id.to_string()), ("voter", voter.to_string())]),
    );
    Ok(())
}

fn require_dictator(state: &ChainState, actor: Address) -> GovResult<Role> {
    state.require_pattern(Pattern::BenevolentDictator)?;
    contracts::ensure_not_frozen(state, contracts::GOVERNANCE)?;
    let roles: Vec<Role> = state.policy.dictator_roles.iter().copied().collect();
    require_any_role(state, actor, &roles)
}

/// Cancels an open proposal; the deposit is destroyed when `slash` is set
/// and released otherwise.
pub fn cancel_proposal(
    state: &mut ChainState,
    actor: Address,
    id: ProposalId,
    slash: bool,
) -> GovResult<()> {
    let role = require_dictator(state, actor)?;
    let p = open_proposal(state, id)?;
    let (proposer, lock) = (p.proposer, p.deposit_lock);
    let mut slashed = 0;
    if let Some(lock_id) = lock {
        let active = state
            .account(&proposer)
            .and_then(|a| a.locks.iter().find(|l| l.id == lock_id))
            .is_some_and(|l| l.is_active(state.height));
        if active {
            if slash {
                slashed = state.slash_lock(proposer, lock_id)?;
            } else {
                state.release_lock(proposer, lock_id)?;
            }
        }
    }
    let height = state.height;
    let p = state.governance.proposals.get_mut(&id).expect("checked");
    p.status = ProposalStatus::Cancelled;
    p.resolved_at = Some(height);
    state.emit(
        "proposal.cancelled",
        fields([
            ("proposal", id.to_string()),
            ("by", actor.to_string()),
            ("by_role", role.name().to_string()),
            ("slashed", slashed.to_string()),
        ]),
    );
    Ok(())
}

/// Pulls the deadline in to at most `height + fast_track_window`.
pub fn fast_track(state: &mut ChainState, actor: Address, id: ProposalId) -> GovResult<()> {
    let role = require_dictator(state, actor)?;
    let p = open_proposal(state, id)?;
    let target = state.height + state.policy.fast_track_window.max(1);
    let deadline = p.deadline.min(target);
    let p = state.governance.proposals.get_mut(&id).expect("checked");
    let old = p.deadline;
    p.deadline = deadline;
    state.emit(
        "proposal.fast-tracked",
        fields([
            ("proposal", id.to_string()),
            ("by", actor.to_string()),
            ("by_role", role.name().to_string()),
            ("old_deadline", old.to_string()),
            ("deadline", deadline.to_string()),
        ]),
    );
    Ok(())
}

fn set_status(state: &mut ChainState, id: ProposalId, status: ProposalStatus) {
    let p = state.governance.proposals.get_mut(&id).expect("known proposal");
    debug_assert!(p.status.may_become(status), "{:?} -> {:?}", p.status, status);
    p.status = status;
}

/// Records a tally outcome and carries out what follows from it.
pub(crate) fn resolve(state: &mut ChainState, id: ProposalId, result: TallyResult) {
    let height = state.height;
    let status = if result.approved {
        ProposalStatus::Approved
    } else {
        ProposalStatus::Rejected
    };
    set_status(state, id, status);
    let p = state.governance.proposals.get_mut(&id).expect("known proposal");
    p.tally = Some(result);
    p.resolved_at = Some(height);
    let p = p.clone();
    state.emit(
        if result.approved {
            "proposal.approved"
        } else {
            "proposal.rejected"
        },
        fields([
            ("proposal", id.to_string()),
            ("scheme", p.scheme.name().to_string()),
            ("threshold", p.threshold.to_string()),
            ("yes", result.yes.to_string()),
            ("no", result.no.to_string()),
            ("weight_scale", p.weight_scale.to_string()),
            ("turnout", format!("{}/{}", result.turnout_num, result.turnout_den)),
        ]),
    );
    if !result.approved || p.mirror_of.is_some() {
        return;
    }
    match &p.payload {
        ProposalPayload::Upgrade { upgrade } => {
            state.governance.upgrades.insert(
                upgrade.new_version,
                ApprovedUpgrade {
                    upgrade: *upgrade,
                    proposal: id,
                    approved_at: height,
                    enacted: false,
                },
            );
            state.emit(
                "upgrade.approved",
                fields([
                    ("proposal", id.to_string()),
                    ("version", upgrade.new_version.to_string()),
                    ("compatibility", upgrade.compatibility.name().to_string()),
                    ("activation_height", upgrade.activation_height.to_string()),
                ]),
            );
        }
        ProposalPayload::ParameterChange { change } => {
            apply_parameter(state, change);
            set_status(state, id, ProposalStatus::Enacted);
            state.emit(
                "proposal.enacted",
                fields([("proposal", id.to_string()), ("payload", p.payload.name().to_string())]),
            );
        }
        ProposalPayload::Freeze { target, freeze } => {
            contracts::set_freeze(state, target, *freeze, "governance");
            set_status(state, id, ProposalStatus::Enacted);
            state.emit(
                "proposal.enacted",
                fields([("proposal", id.to_string()), ("payload", p.payload.name().to_string())]),
            );
        }
    }
}

fn apply_parameter(state: &mut ChainState, change: &ParameterChange) {
    let (name, value) = match change {
        ParameterChange::ProposalDeposit { value } => {
            state.policy.proposal_deposit = *value;
            ("proposal-deposit", value.to_string())
        }
        ParameterChange::FastTrackWindow { value } => {
            state.policy.fast_track_window = *value;
            ("fast-track-window", value.to_string())
        }
        ParameterChange::BlockReward { value } => {
            state.policy.consensus.incentive.block_reward = *value;
            ("block-reward", value.to_string())
        }
        ParameterChange::AddFilter { rule } => {
            state.policy.filters.retain(|r| r.rule_id != rule.rule_id);
            state.policy.filters.push(rule.clone());
            ("filter.added", rule.rule_id.clone())
        }
        ParameterChange::RemoveFilter { rule_id } => {
            state.policy.filters.retain(|r| &r.rule_id != rule_id);
            ("filter.removed", rule_id.clone())
        }
    };
    state.emit(
        "parameter.changed",
        fields([("parameter", name.to_string()), ("value", value)]),
    );
}

/// Begin-block hook: tallies proposals whose deadline has arrived and
/// enacts approved upgrades whose activation height is reached.
/// Nothing happens while the governance registry is frozen.
pub fn on_begin_block(state: &mut ChainState) {
    if state.contracts.is_frozen(contracts::GOVERNANCE) {
        return;
    }
    let height = state.height;
    let due: Vec<ProposalId> = state
        .governance
        .proposals
        .values()
        .filter(|p| {
            p.status == ProposalStatus::Open
                && height >= p.deadline
                && !matches!(p.scheme, VotingScheme::CrossChainToken { .. })
        })
        .map(|p| p.id)
        .collect();
    for id in due {
        let result = tally_proposal(&state.governance.proposals[&id]);
        resolve(state, id, result);
    }
    let activating: Vec<ApprovedUpgrade> = state
        .governance
        .upgrades
        .values()
        .filter(|u| !u.enacted && u.upgrade.activation_height <= height)
        .copied()
        .collect();
    for u in activating {
        let v = u.upgrade.new_version;
        state.governance.upgrades.get_mut(&v).expect("present").enacted = true;
        state.governance.protocol_version = state.governance.protocol_version.max(v);
        set_status(state, u.proposal, ProposalStatus::Enacted);
        state.emit(
            "upgrade.enacted",
            fields([
                ("proposal", u.proposal.to_string()),
                ("version", v.to_string()),
                ("compatibility", u.upgrade.compatibility.name().to_string()),
                ("activation_height", u.upgrade.activation_height.to_string()),
            ]),
        );
    }
}
