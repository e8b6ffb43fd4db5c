use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    require_any_role, resolve, GovernanceError, MirrorRef, Proposal, ProposalId, ProposalPayload,
    ProposalStatus, TallyResult, ThresholdPolicy, VotingScheme,
};
use crate::policy::Role;
use crate::primitives::{hash, Address, Digest, KeyPair, PublicKey, Signature};
use crate::state::{fields, ChainState, Height};

/// Counted outcome of a mirrored vote, as reported back to the home chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultBody {
    pub home_chain: String,
    pub proposal: ProposalId,
    pub aux_chain: String,
    pub aux_proposal: ProposalId,
    pub yes: u128,
    pub no: u128,
    pub eligible: u128,
    pub turnout_num: u128,
    pub turnout_den: u128,
    pub aux_height: Height,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossChainResult {
    pub body: ResultBody,
    pub signer: PublicKey,
    pub signature: Signature,
}

impl ResultBody {
    pub fn digest(&self) -> Digest {
        hash(&serde_json::to_vec(self).expect("result serializes"))
    }

    /// Reads the finished mirror proposal `aux_proposal` from `aux`.
    pub fn from_mirror(aux: &ChainState, aux_proposal: ProposalId) -> Result<ResultBody, GovernanceError> {
        let p = aux
            .governance
            .proposal(aux_proposal)
            .ok_or(GovernanceError::UnknownProposal(aux_proposal))?;
        let mirror = p
            .mirror_of
            .as_ref()
            .ok_or(GovernanceError::NotCrossChain(aux_proposal))?;
        let t = p.tally.ok_or(GovernanceError::TallyBeforeDeadline {
            id: aux_proposal,
            deadline: p.deadline,
        })?;
        Ok(ResultBody {
            home_chain: mirror.home_chain.clone(),
            proposal: mirror.proposal,
            aux_chain: aux.chain_id.clone(),
            aux_proposal,
            yes: t.yes,
            no: t.no,
            eligible: t.eligible,
            turnout_num: t.turnout_num,
            turnout_den: t.turnout_den,
            aux_height: aux.height,
        })
    }

    pub fn sign(self, key: &KeyPair) -> CrossChainResult {
        let signature = key.sign(&self.digest().0);
        CrossChainResult {
            body: self,
            signer: key.public_key(),
            signature,
        }
    }
}

impl CrossChainResult {
    pub fn verify(&self) -> bool {
        self.signer.verify(&self.body.digest().0, &self.signature).is_ok()
    }
}

/// Opens on the auxiliary chain a vote mirroring `home`, with voting weights
/// issued from the home chain's snapshot.
#[allow(clippy::too_many_arguments)]
pub fn open_mirrored_vote(
    state: &mut ChainState,
    actor: Address,
    home: MirrorRef,
    payload: ProposalPayload,
    threshold: ThresholdPolicy,
    deadline: Height,
    weights: BTreeMap<Address, u128>,
    weight_scale: u128,
) -> Result<ProposalId, GovernanceError> {
    require_any_role(state, actor, &[Role::Deployer, Role::Administrator])?;
    let height = state.height;
    if deadline <= height {
        return Err(GovernanceError::DeadlineInPast { deadline, height });
    }
    let id = state.governance.next_proposal_id;
    state.governance.next_proposal_id += 1;
    state.emit(
        "cross-chain.mirror-opened",
        fields([
            ("proposal", id.to_string()),
            ("home_chain", home.home_chain.clone()),
            ("home_proposal", home.proposal.to_string()),
            ("deadline", deadline.to_string()),
            ("eligible", weights.len().to_string()),
            ("by", actor.to_string()),
        ]),
    );
    state.governance.proposals.insert(
        id,
        Proposal {
            id,
            proposer: actor,
            description: format!("mirror of {}#{}", home.home_chain, home.proposal),
            payload,
            scheme: VotingScheme::Mirror {
                home_chain: home.home_chain.clone(),
                home_proposal: home.proposal,
            },
            threshold,
            deadline,
            opened_at: height,
            deposit_lock: None,
            status: ProposalStatus::Open,
            eligible: weights,
            weight_scale: weight_scale.max(1),
            ballots: BTreeMap::new(),
            delegations: BTreeMap::new(),
            tally: None,
            resolved_at: None,
            aborted: false,
            mirror_of: Some(home),
        },
    );
    Ok(id)
}

fn cross_chain_proposal(state: &ChainState, id: ProposalId) -> Result<&Proposal, GovernanceError> {
    let p = state
        .governance
        .proposal(id)
        .ok_or(GovernanceError::UnknownProposal(id))?;
    if !matches!(p.scheme, VotingScheme::CrossChainToken { .. }) {
        return Err(GovernanceError::NotCrossChain(id));
    }
    if p.status != ProposalStatus::Open {
        return Err(GovernanceError::NotOpen { id, status: p.status });
    }
    if p.aborted {
        return Err(GovernanceError::Aborted(id));
    }
    if state.height < p.deadline {
        return Err(GovernanceError::TallyBeforeDeadline {
            id,
            deadline: p.deadline,
        });
    }
    Ok(p)
}

/// Resolves a home proposal from a signed auxiliary-chain result. The
/// outcome is recomputed here under the home proposal's threshold.
pub fn import_cross_chain_result(
    state: &mut ChainState,
    result: &CrossChainResult,
) -> Result<(), GovernanceError> {
    let b = &result.body;
    let p = cross_chain_proposal(state, b.proposal)?;
    let VotingScheme::CrossChainToken {
        aux_chain,
        tally_key,
    } = &p.scheme
    else {
        unreachable!("checked above");
    };
    let bad = |why: &str| Err(GovernanceError::BadResult(why.to_string()));
    if b.home_chain != state.chain_id {
        return bad("addressed to another chain");
    }
    if &b.aux_chain != aux_chain {
        return bad("from the wrong auxiliary chain");
    }
    if result.signer != *tally_key {
        return bad("signer is not the designated tally key");
    }
    if !result.verify() {
        return bad("signature does not verify");
    }
    if b.turnout_num > b.turnout_den || b.yes + b.no > b.eligible {
        return bad("inconsistent counts");
    }
    let approved = p.threshold.approves(b.yes, b.no, b.turnout_num, b.turnout_den);
    let tally = TallyResult {
        yes: b.yes,
        no: b.no,
        eligible: b.eligible,
        turnout_num: b.turnout_num,
        turnout_den: b.turnout_den,
        approved,
    };
    state.emit(
        "cross-chain.imported",
        fields([
            ("proposal", b.proposal.to_string()),
            ("aux_chain", b.aux_chain.clone()),
            ("aux_proposal", b.aux_proposal.to_string()),
            ("aux_height", b.aux_height.to_string()),
            ("result", b.digest().to_string()),
        ]),
    );
    resolve(state, b.proposal, tally);
    Ok(())
}

/// Marks a cross-chain vote as aborted; the proposal stays open.
pub fn abort_cross_chain_vote(
    state: &mut ChainState,
    id: ProposalId,
    reason: &str,
) -> Result<(), GovernanceError> {
    cross_chain_proposal(state, id)?;
    state.governance.proposals.get_mut(&id).expect("checked").aborted = true;
    state.emit(
        "cross-chain.aborted",
        fields([("proposal", id.to_string()), ("reason", reason.to_string())]),
    );
    Ok(())
}
