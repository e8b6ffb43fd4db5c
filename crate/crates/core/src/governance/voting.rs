use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use super::{GovernanceError, Proposal, ProposalId};
use crate::policy::Pattern;
use crate::primitives::{Address, PublicKey};
use crate::ratio::Fraction;
use crate::state::{Amount, ChainState, Height, LockPurpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Choice {
    Yes,
    No,
}

impl Choice {
    pub fn name(self) -> &'static str {
        match self {
            Choice::Yes => "yes",
            Choice::No => "no",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub choice: Choice,
    /// Votes cast; only quadratic ballots use it.
    pub votes: u64,
    /// Tokens paid to the cost account for this ballot.
    pub paid: Amount,
    pub height: Height,
}

/// Staked-period weighting: a locked token counts
/// `1 + factor * min(remaining, horizon) / horizon` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockWeighting {
    pub factor: Fraction,
    pub horizon: Height,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum VotingScheme {
    OneAddressOneVote,
    /// Token-weighted; balances are read when the proposal opens.
    Carbonvote {
        #[serde(default)]
        lock_weighting: Option<LockWeighting>,
    },
    Quadratic {
        cost_account: Address,
    },
    LiquidDemocracy,
    /// Ballots are cast on `aux_chain`; the result comes back signed by
    /// `tally_key`.
    CrossChainToken {
        aux_chain: String,
        tally_key: PublicKey,
    },
    /// The auxiliary-chain side of a cross-chain vote.
    Mirror {
        home_chain: String,
        home_proposal: ProposalId,
    },
}

impl VotingScheme {
    pub fn name(&self) -> &'static str {
        match self {
            VotingScheme::OneAddressOneVote => "one-address-one-vote",
            VotingScheme::Carbonvote { .. } => "carbonvote",
            VotingScheme::Quadratic { .. } => "quadratic",
            VotingScheme::LiquidDemocracy => "liquid-democracy",
            VotingScheme::CrossChainToken { .. } => "cross-chain-token",
            VotingScheme::Mirror { .. } => "mirror",
        }
    }

    /// Pattern the scheme depends on, if any.
    pub fn pattern(&self) -> Option<Pattern> {
        match self {
            VotingScheme::OneAddressOneVote | VotingScheme::Mirror { .. } => None,
            VotingScheme::Carbonvote { .. } => Some(Pattern::Carbonvote),
            VotingScheme::Quadratic { .. } => Some(Pattern::QuadraticVoting),
            VotingScheme::LiquidDemocracy => Some(Pattern::LiquidDemocracy),
            VotingScheme::CrossChainToken { .. } => Some(Pattern::CrossChainTokenVoting),
        }
    }

    pub(crate) fn validate(&self) -> Result<(), GovernanceError> {
        if let VotingScheme::Carbonvote {
            lock_weighting: Some(w),
        } = self
        {
            if w.horizon == 0 {
                return Err(GovernanceError::InvalidPayload(
                    "lock weighting horizon must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// Approved iff the yes share strictly exceeds `fraction`.
    Fixed { fraction: Fraction },
    /// Required yes share is `1 - slope * turnout`.
    AdaptiveTurnout {
        #[serde(default = "default_slope")]
        slope: Fraction,
    },
    /// Every eligible voter votes yes.
    Unanimous,
}

fn default_slope() -> Fraction {
    Fraction::HALF
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdPolicy::Fixed { fraction } => write!(f, "fixed:{fraction}"),
            ThresholdPolicy::AdaptiveTurnout { slope } => write!(f, "adaptive-turnout:{slope}"),
            ThresholdPolicy::Unanimous => write!(f, "unanimous"),
        }
    }
}

impl ThresholdPolicy {
    pub fn simple_majority() -> ThresholdPolicy {
        ThresholdPolicy::Fixed {
            fraction: Fraction::HALF,
        }
    }

    /// Decides an outcome from the yes and no weight and the turnout
    /// `turnout_num / turnout_den`.
    pub fn approves(&self, yes: u128, no: u128, turnout_num: u128, turnout_den: u128) -> bool {
        let counted = yes + no;
        if counted == 0 || yes == 0 {
            return false;
        }
        match *self {
            ThresholdPolicy::Fixed { fraction } => fraction.exceeded_by(yes, counted),
            ThresholdPolicy::AdaptiveTurnout { slope } => {
                if turnout_den == 0 {
                    return false;
                }
                // yes/counted > 1 - (sn/sd)(tn/td)
                let td_sd = BigInt::from(turnout_den) * BigInt::from(slope.den);
                let rhs = &td_sd - BigInt::from(slope.num) * BigInt::from(turnout_num);
                BigInt::from(yes) * td_sd > BigInt::from(counted) * rhs
            }
            ThresholdPolicy::Unanimous => no == 0 && turnout_num == turnout_den,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyResult {
    pub yes: u128,
    pub no: u128,
    /// Total eligible weight (voter count for quadratic ballots).
    pub eligible: u128,
    pub turnout_num: u128,
    pub turnout_den: u128,
    pub approved: bool,
}

impl TallyResult {
    pub fn turnout(&self) -> f64 {
        if self.turnout_den == 0 {
            0.0
        } else {
            self.turnout_num as f64 / self.turnout_den as f64
        }
    }
}

fn vote_weight(state: &ChainState, address: &Address, weighting: Option<LockWeighting>) -> u128 {
    let Some(account) = state.account(address) else {
        return 0;
    };
    let Some(w) = weighting else {
        return account.balance as u128;
    };
    let height = state.height;
    let horizon = w.horizon as u128;
    let mut boosted: u128 = 0;
    for lock in account.locks.iter().filter(|l| l.is_active(height)) {
        if lock.purpose == LockPurpose::ProposalDeposit {
            continue;
        }
        let remaining = (lock.unlock_height - height) as u128;
        boosted += lock.amount as u128 * remaining.min(horizon);
    }
    account.balance as u128 * horizon * w.factor.den as u128 + w.factor.num as u128 * boosted
}

/// Eligible voters and their weights at the current height, plus the scale
/// the weights are expressed in.
pub(crate) fn snapshot_weights(
    state: &ChainState,
    scheme: &VotingScheme,
) -> (BTreeMap<Address, u128>, u128) {
    let members = || state.governance.participation.members.keys().copied();
    match scheme {
        VotingScheme::OneAddressOneVote | VotingScheme::Quadratic { .. } => {
            (members().map(|a| (a, 1)).collect(), 1)
        }
        VotingScheme::LiquidDemocracy => (
            members()
                .map(|a| (a, state.balance(&a) as u128))
                .filter(|(_, w)| *w > 0)
                .collect(),
            1,
        ),
        VotingScheme::Carbonvote { .. } | VotingScheme::CrossChainToken { .. } => {
            let weighting = match scheme {
                VotingScheme::Carbonvote { lock_weighting } => *lock_weighting,
                _ => None,
            };
            let scale = weighting.map_or(1, |w| w.horizon as u128 * w.factor.den as u128);
            let weights = state
                .accounts
                .keys()
                .map(|a| (*a, vote_weight(state, a, weighting)))
                .filter(|(_, w)| *w > 0)
                .collect();
            (weights, scale)
        }
        VotingScheme::Mirror { .. } => (BTreeMap::new(), 1),
    }
}

/// Where each voter's weight ends up under liquid delegation: the address
/// whose direct ballot receives it, or `None` when the chain of delegations
/// runs into a cycle or a voter who neither votes nor delegates.
pub fn resolve_liquid(
    voters: impl IntoIterator<Item = Address>,
    ballots: &BTreeMap<Address, Ballot>,
    delegations: &BTreeMap<Address, Address>,
) -> BTreeMap<Address, Option<Address>> {
    let mut memo: BTreeMap<Address, Option<Address>> = BTreeMap::new();
    for start in voters {
        if memo.contains_key(&start) {
            continue;
        }
        let mut path = Vec::new();
        let mut on_path = std::collections::BTreeSet::new();
        let mut cur = start;
        let outcome = loop {
            if let Some(known) = memo.get(&cur) {
                break *known;
            }
            if ballots.contains_key(&cur) {
                break Some(cur);
            }
            if !on_path.insert(cur) {
                break None;
            }
            path.push(cur);
            match delegations.get(&cur) {
                Some(next) => cur = *next,
                None => break None,
            }
        };
        if ballots.contains_key(&cur) {
            memo.insert(cur, Some(cur));
        }
        for a in path {
            memo.insert(a, outcome);
        }
    }
    memo
}

/// Tally of a proposal from its recorded ballots, ignoring its deadline.
pub fn tally_proposal(p: &Proposal) -> TallyResult {
    let (mut yes, mut no) = (0u128, 0u128);
    let mut add = |choice: Choice, w: u128| match choice {
        Choice::Yes => yes += w,
        Choice::No => no += w,
    };
    let (turnout_num, turnout_den, eligible);
    match &p.scheme {
        VotingScheme::Quadratic { .. } => {
            for b in p.ballots.values() {
                add(b.choice, b.votes as u128);
            }
            turnout_num = p.ballots.len() as u128;
            turnout_den = p.eligible.len() as u128;
            eligible = turnout_den;
        }
        VotingScheme::LiquidDemocracy => {
            let resolved = resolve_liquid(p.eligible.keys().copied(), &p.ballots, &p.delegations);
            let mut counted = 0;
            for (voter, weight) in &p.eligible {
                if let Some(Some(terminal)) = resolved.get(voter) {
                    add(p.ballots[terminal].choice, *weight);
                    counted += weight;
                }
            }
            turnout_num = counted;
            turnout_den = p.eligible.values().sum();
            eligible = turnout_den;
        }
        _ => {
            let mut counted = 0;
            for (voter, b) in &p.ballots {
                let w = p.eligible.get(voter).copied().unwrap_or(0);
                add(b.choice, w);
                counted += w;
            }
            turnout_num = counted;
            turnout_den = p.eligible.values().sum();
            eligible = turnout_den;
        }
    }
    TallyResult {
        yes,
        no,
        eligible,
        turnout_num,
        turnout_den,
        approved: p.threshold.approves(yes, no, turnout_num, turnout_den),
    }
}

/// Tally of proposal `id`; refused before its deadline.
pub fn tally(state: &ChainState, id: ProposalId) -> Result<TallyResult, GovernanceError> {
    let p = state
        .governance
        .proposal(id)
        .ok_or(GovernanceError::UnknownProposal(id))?;
    if state.height < p.deadline {
        return Err(GovernanceError::TallyBeforeDeadline {
            id,
            deadline: p.deadline,
        });
    }
    Ok(p.tally.unwrap_or_else(|| tally_proposal(p)))
}
