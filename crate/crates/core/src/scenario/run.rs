use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::config::{
    Action, ActorConfig, ConfigError, ScenarioConfig, ScriptedAction, SchemeSpec, SelectionKind,
};
use super::matrix::conformance_matrix;
use super::report::{
    ActionOutcome, ChainReport, LogEntry, NodeReport, ProposalReport, RunReport, SupplyReport,
};
use crate::consensus::{ConsensusPolicy, FinalityPolicy, IncentivePolicy, ValidatorSelectionPolicy};
use crate::contracts::ContractAction;
use crate::governance::{invite_hash, tally_proposal, GovAction, VotingScheme};
use crate::network::{NetworkError, SimNetwork};
use crate::policy::{Decentralisation, GovernancePolicy, Pattern, Role, ShardAssignment};
use crate::primitives::{hash, Address, KeyPair};
use crate::state::{Block, ChainState, GenesisAccount, GenesisConfig, LockPurpose, ShardHead};
use crate::tx::{route_shard, trace_sender, Transaction, TxPayload};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("chain {chain}: {reason}")]
    Build { chain: String, reason: String },
}

fn build_err(chain: &str, reason: impl ToString) -> ScenarioError {
    ScenarioError::Build {
        chain: chain.to_string(),
        reason: reason.to_string(),
    }
}

/// A scenario being executed: the network plus the script cursor.
pub struct ScenarioRun {
    config: ScenarioConfig,
    net: SimNetwork,
    keys: BTreeMap<String, KeyPair>,
    next_action: usize,
    outcomes: Vec<ActionOutcome>,
}

/// Roles, balance and identity of one account in a derived chain's genesis.
#[derive(Default)]
struct Seat {
    balance: u64,
    roles: BTreeSet<Role>,
    identity: Option<String>,
    member: bool,
}

impl ScenarioRun {
    /// Validates `config` and builds every chain at genesis.
    pub fn new(config: &ScenarioConfig) -> Result<ScenarioRun, ScenarioError> {
        config.validate()?;
        let keys: BTreeMap<String, KeyPair> = config
            .actors
            .iter()
            .map(|a| (a.name.clone(), KeyPair::from_name(&a.name)))
            .collect();
        let addr = |name: &str| keys[name].address();
        let mut net_cfg = config.network.clone();
        net_cfg.seed = config.seed;
        let mut net = SimNetwork::new(net_cfg);

        let authorities: Vec<Address> = config.validators.iter().map(|v| addr(v)).collect();
        let selection = match config.consensus.selection {
            SelectionKind::ProofOfStake => ValidatorSelectionPolicy::ProofOfStake,
            SelectionKind::ProofOfAuthority => ValidatorSelectionPolicy::ProofOfAuthority { authorities },
            SelectionKind::RoundRobin => ValidatorSelectionPolicy::RoundRobin { authorities },
        };
        let inc = &config.consensus.incentive;
        let consensus = ConsensusPolicy {
            selection,
            finality: config.consensus.finality.clone(),
            incentive: IncentivePolicy {
                enabled: inc.enabled,
                block_reward: inc.block_reward,
                validator_fee_share: inc.validator_fee_share,
                treasury: inc.treasury.as_deref().map(addr),
            },
            seed: config.seed,
        };
        let mut policy = GovernancePolicy::new(config.mode, consensus).with_patterns(config.patterns.iter().copied());
        let params = &config.params;
        policy.filters = params.filters.clone();
        policy.proposal_deposit = params.proposal_deposit;
        policy.fast_track_window = params.fast_track_window;
        if let Some(r) = &params.dictator_roles {
            policy.dictator_roles = r.iter().copied().collect();
        }
        if let Some(r) = &params.scam_list_writers {
            policy.scam_list_writers = r.iter().copied().collect();
        }
        policy.genesis_version = params.genesis_version;

        let mut genesis = GenesisConfig::new(&config.chain_id, policy);
        for a in &config.actors {
            genesis = genesis.account(main_account(a, &keys[&a.name]));
        }
        genesis.freezer_eligible = params.freezer_eligible.iter().map(|a| addr(a)).collect();

        // Shards are built first so the relay genesis can record their heads.
        let mut shard_chains = Vec::new();
        if let Some(shards) = &config.shards {
            for s in 0..shards.count {
                let chain = config.shard_chain_id(s);
                let vals = &shards.validators[s as usize];
                let mut seats: BTreeMap<&str, Seat> = BTreeMap::new();
                for v in vals {
                    seats.entry(v.as_str()).or_default().member = true;
                }
                for a in &config.actors {
                    let admin = a.roles.contains(&Role::Administrator);
                    let funded = a.shard_balance > 0 && route_shard(&addr(&a.name), shards.count) == s;
                    if !admin && !funded && !vals.contains(&a.name) {
                        continue;
                    }
                    let seat = seats.entry(a.name.as_str()).or_default();
                    seat.member = a.member || vals.contains(&a.name);
                    seat.identity = a.identity.clone();
                    if admin {
                        seat.roles.insert(Role::Administrator);
                    }
                    if funded {
                        seat.balance = a.shard_balance;
                    }
                }
                let mut patterns = vec![Pattern::ShardedChain];
                if config.has_pattern(Pattern::NetworkFreezer) {
                    patterns.push(Pattern::NetworkFreezer);
                }
                let mut sp = support_policy(
                    config.mode,
                    vals.iter().map(|v| addr(v)).collect(),
                    FinalityPolicy::RelayInclusion,
                    config.seed,
                    patterns,
                );
                sp.shard = Some(ShardAssignment {
                    shard_id: s,
                    shard_count: shards.count,
                });
                let (state, block) = build_chain(&chain, sp, seats, &keys)?;
                genesis.shard_heads.insert(
                    s,
                    ShardHead {
                        hash: block.hash(),
                        height: 0,
                    },
                );
                let nodes = vals.iter().map(|v| (node_name(v, &chain), keys[v].clone())).collect();
                shard_chains.push((chain, state, block, nodes));
            }
        }
        let (state, block) = genesis.build().map_err(|e| build_err(&config.chain_id, e))?;
        let nodes = config
            .validators
            .iter()
            .map(|v| (v.clone(), keys[v].clone()))
            .collect();
        net.add_chain(state, &block, nodes).map_err(|e| build_err(&config.chain_id, e))?;
        for (chain, state, block, nodes) in shard_chains {
            net.add_chain(state, &block, nodes).map_err(|e| build_err(&chain, e))?;
            net.link_shard(&chain, &config.chain_id).map_err(|e| build_err(&chain, e))?;
        }
        if let Some(aux) = &config.aux_chain {
            let mut seats: BTreeMap<&str, Seat> = BTreeMap::new();
            for v in &aux.validators {
                let seat = seats.entry(v.as_str()).or_default();
                seat.member = true;
                seat.identity = config.actor(v).and_then(|a| a.identity.clone());
            }
            let admin = seats.entry(aux.admin.as_str()).or_default();
            admin.roles.extend([Role::Administrator, Role::Deployer]);
            let ap = support_policy(
                aux.mode,
                aux.validators.iter().map(|v| addr(v)).collect(),
                FinalityPolicy::Immediate,
                config.seed,
                aux.patterns.clone(),
            );
            let (state, block) = build_chain(&aux.chain_id, ap, seats, &keys)?;
            let nodes = aux
                .validators
                .iter()
                .map(|v| (node_name(v, &aux.chain_id), keys[v].clone()))
                .collect();
            net.add_chain(state, &block, nodes).map_err(|e| build_err(&aux.chain_id, e))?;
            net.link_cross_chain(
                &aux.bridge,
                &node_name(&aux.admin, &aux.chain_id),
                &node_name(&aux.tally, &aux.chain_id),
            )
            .map_err(|e| build_err(&aux.chain_id, e))?;
        }
        Ok(ScenarioRun {
            config: config.clone(),
            net,
            keys,
            next_action: 0,
            outcomes: Vec::new(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn network(&self) -> &SimNetwork {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut SimNetwork {
        &mut self.net
    }

    pub fn outcomes(&self) -> &[ActionOutcome] {
        &self.outcomes
    }

    pub fn key(&self, actor: &str) -> Option<&KeyPair> {
        self.keys.get(actor)
    }

    pub fn is_done(&self) -> bool {
        self.net.tick() >= self.config.ticks
    }

    /// Applies the actions due at the current tick, then advances one tick.
    pub fn step(&mut self) {
        self.apply_due();
        self.net.step();
    }

    /// Runs to the horizon, lets in-flight messages settle and reports.
    pub fn run(mut self) -> RunReport {
        while !self.is_done() {
            self.step();
        }
        self.finish()
    }

    /// Applies any actions left at the current tick, settles and reports.
    /// Lets callers that step by hand end the run as `run` would.
    pub fn finish(mut self) -> RunReport {
        self.apply_due();
        self.settle();
        self.report()
    }

    /// Ticks without production needed for every queued message to land.
    pub fn settle_ticks(&self) -> u64 {
        let cfg = self.net.config();
        let slowest = cfg.links.iter().map(|l| l.delay).max().unwrap_or(0).max(cfg.delay);
        slowest + cfg.jitter + cfg.slot_ticks
    }

    fn settle(&mut self) {
        let t = self.settle_ticks();
        self.net.quiesce(t);
        let chains: Vec<String> = self.net.chains().map(str::to_string).collect();
        for chain in chains {
            let nodes = self.net.chain_nodes(&chain).expect("listed");
            let policy = nodes[0].tip_state().policy.consensus.finality.name();
            let lowest = nodes.iter().map(|n| n.finalized_height()).min().unwrap_or(0);
            let highest = nodes.iter().map(|n| n.finalized_height()).max().unwrap_or(0);
            let first = nodes
                .iter()
                .filter_map(|n| n.finality_log.iter().find(|r| r.height > 0).map(|r| r.tick))
                .min();
            let fields = [
                ("chain", chain.clone()),
                ("policy", policy.to_string()),
                ("finalized_height", lowest.to_string()),
                ("max_finalized_height", highest.to_string()),
                ("first_final_tick", first.map_or("never".to_string(), |t| t.to_string())),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            self.net.record("finality.summary", fields);
        }
    }

    fn apply_due(&mut self) {
        while let Some(sa) = self.config.actions.get(self.next_action) {
            if sa.tick > self.net.tick() {
                break;
            }
            let sa = sa.clone();
            self.next_action += 1;
            let result = self.apply(&sa);
            let (ok, detail) = match result {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            self.outcomes.push(ActionOutcome {
                tick: self.net.tick(),
                actor: sa.actor.clone(),
                action: sa.action.name().to_string(),
                ok,
                detail,
            });
        }
    }

    fn main_chain(&self) -> String {
        self.config.chain_id.clone()
    }

    /// Where `actor` submits on `chain`: their own node, else the chain's
    /// first node.
    fn node_for(&self, actor: &str, chain: &str) -> Result<String, String> {
        let own = if chain == self.config.chain_id {
            actor.to_string()
        } else {
            node_name(actor, chain)
        };
        if self.net.node(&own).is_ok_and(|n| n.chain_id == chain) {
            return Ok(own);
        }
        let nodes = self.net.chain_nodes(chain).map_err(|e| e.to_string())?;
        Ok(nodes[0].name.clone())
    }

    fn own_node(&self, actor: &str) -> Result<String, String> {
        if self.config.validators.iter().any(|v| v == actor) {
            Ok(actor.to_string())
        } else {
            Err(format!("{actor} runs no {} node", self.config.chain_id))
        }
    }

    fn submit(&mut self, actor: &str, chain: &str, payload: TxPayload, fee: u64) -> Result<String, String> {
        let node = self.node_for(actor, chain)?;
        let key = self.keys[actor].clone();
        let nonce = self.net.node(&node).map_err(|e| e.to_string())?.next_nonce(&key.address());
        let tx = Transaction::signed(&key, payload, nonce, fee);
        self.net
            .submit(&node, tx)
            .map(|h| format!("tx {h} at {node}"))
            .map_err(|e| format!("{node}: {e}"))
    }

    fn gov(&mut self, actor: &str, chain: &str, action: GovAction) -> Result<String, String> {
        self.submit(actor, chain, TxPayload::Governance { action }, 0)
    }

    fn contract(&mut self, actor: &str, action: ContractAction) -> Result<String, String> {
        let chain = self.main_chain();
        self.submit(actor, &chain, TxPayload::Contract { action }, 0)
    }

    fn addr(&self, actor: &str) -> Address {
        self.keys[actor].address()
    }

    fn apply(&mut self, sa: &ScriptedAction) -> Result<String, String> {
        let actor = sa.actor.as_str();
        let main = self.main_chain();
        let pick = |c: &Option<String>| c.clone().unwrap_or_else(|| main.clone());
        let net_err = |e: NetworkError| e.to_string();
        match &sa.action {
            Action::Transfer {
                to,
                amount,
                memo,
                fee,
                route,
                chain,
            } => {
                let payload = TxPayload::Transfer {
                    to: self.addr(to),
                    amount: *amount,
                    memo: memo.clone(),
                };
                let chain = if *route {
                    let count = self.config.shards.as_ref().expect("validated").count;
                    self.config.shard_chain_id(route_shard(&self.addr(actor), count))
                } else {
                    pick(chain)
                };
                self.submit(actor, &chain, payload, *fee)
            }
            Action::Lock {
                amount,
                duration,
                purpose,
                chain,
            } => {
                let payload = TxPayload::Lock {
                    amount: *amount,
                    duration: *duration,
                    purpose: *purpose,
                };
                self.submit(actor, &pick(chain), payload, 0)
            }
            Action::SubmitProposal {
                description,
                payload,
                scheme,
                threshold,
                duration,
            } => {
                let scheme = match scheme {
                    SchemeSpec::OneAddressOneVote => VotingScheme::OneAddressOneVote,
                    SchemeSpec::Carbonvote { lock_weighting } => VotingScheme::Carbonvote {
                        lock_weighting: *lock_weighting,
                    },
                    SchemeSpec::Quadratic { cost_account } => VotingScheme::Quadratic {
                        cost_account: self.addr(cost_account),
                    },
                    SchemeSpec::LiquidDemocracy => VotingScheme::LiquidDemocracy,
                    SchemeSpec::CrossChainToken => {
                        let aux = self.config.aux_chain.as_ref().expect("validated");
                        VotingScheme::CrossChainToken {
                            aux_chain: aux.chain_id.clone(),
                            tally_key: self.keys[&aux.tally].public_key(),
                        }
                    }
                };
                let node = self.node_for(actor, &main)?;
                let height = self.net.node(&node).map_err(net_err)?.tip_height();
                let action = GovAction::SubmitProposal {
                    description: description.clone(),
                    payload: payload.clone(),
                    scheme,
                    threshold: *threshold,
                    deadline: height + duration,
                };
                self.gov(actor, &main, action)
            }
            Action::Vote {
                proposal,
                choice,
                votes,
                chain,
            } => {
                let action = GovAction::Vote {
                    proposal: *proposal,
                    choice: *choice,
                    votes: *votes,
                };
                self.gov(actor, &pick(chain), action)
            }
            Action::Delegate { proposal, to } => {
                let to = self.addr(to);
                self.gov(actor, &main, GovAction::Delegate { proposal: *proposal, to })
            }
            Action::RevokeDelegation { proposal } => {
                self.gov(actor, &main, GovAction::RevokeDelegation { proposal: *proposal })
            }
            Action::Cancel {
                proposal,
                slash_deposit,
            } => self.gov(
                actor,
                &main,
                GovAction::Cancel {
                    proposal: *proposal,
                    slash_deposit: *slash_deposit,
                },
            ),
            Action::FastTrack { proposal } => {
                self.gov(actor, &main, GovAction::FastTrack { proposal: *proposal })
            }
            Action::Join { invite, identity } => self.gov(
                actor,
                &main,
                GovAction::Join {
                    invite: invite.clone(),
                    identity: identity.clone(),
                },
            ),
            Action::IssueInvite { code } => self.gov(
                actor,
                &main,
                GovAction::IssueInvite {
                    code_hash: invite_hash(code),
                },
            ),
            Action::GrantRole { to, role } => {
                let to = self.addr(to);
                self.gov(actor, &main, GovAction::GrantRole { to, role: *role })
            }
            Action::ScamListAdd { target, note } => {
                let address = self.addr(target);
                self.contract(
                    actor,
                    ContractAction::ScamListAdd {
                        address,
                        note: note.clone(),
                    },
                )
            }
            Action::SocialContractSet { maintainer_spec } => self.contract(
                actor,
                ContractAction::SocialContractSet {
                    maintainer_spec: maintainer_spec.clone(),
                },
            ),
            Action::FreezeContract { target } => {
                self.contract(actor, ContractAction::Freeze { target: target.clone() })
            }
            Action::UnfreezeContract { target } => {
                self.contract(actor, ContractAction::Unfreeze { target: target.clone() })
            }
            Action::FreezeNetwork { chain } => {
                let chain = pick(chain);
                self.net.freeze(&chain, self.addr(actor)).map_err(net_err)?;
                Ok(format!("{chain} frozen"))
            }
            Action::VoteFreeze { chain } => {
                let chain = pick(chain);
                let was = self.net.is_frozen(&chain);
                let changed = self.net.vote_freeze(&chain, self.addr(actor)).map_err(net_err)?;
                Ok(match (changed, was) {
                    (true, false) => format!("{chain} frozen"),
                    (true, true) => format!("{chain} unfrozen"),
                    (false, _) => "vote recorded".to_string(),
                })
            }
            Action::UnfreezeNetwork { chain } => {
                let chain = pick(chain);
                self.net.unfreeze(&chain, self.addr(actor)).map_err(net_err)?;
                Ok(format!("{chain} unfrozen"))
            }
            Action::OperatorUnfreeze { chain } => {
                let chain = pick(chain);
                self.net.operator_unfreeze(&chain, actor).map_err(net_err)?;
                Ok(format!("{chain} unfrozen by operator"))
            }
            Action::InstallUpgrade { version, nodes } => {
                let targets: Vec<String> = if nodes.is_empty() {
                    vec![actor.to_string()]
                } else {
                    nodes.clone()
                };
                let mut done = Vec::new();
                let mut failed = Vec::new();
                for t in targets {
                    let r = self
                        .own_node(&t)
                        .and_then(|n| self.net.install_upgrade(&n, *version).map_err(net_err));
                    match r {
                        Ok(()) => done.push(t),
                        Err(e) => failed.push(format!("{t}: {e}")),
                    }
                }
                if failed.is_empty() {
                    Ok(format!("v{version} installed on {}", done.join(",")))
                } else {
                    Err(failed.join("; "))
                }
            }
            Action::Migrate { target_chain } => {
                let source = self.node_for(actor, &main)?;
                let nodes = self
                    .config
                    .validators
                    .iter()
                    .map(|v| (node_name(v, target_chain), self.keys[v].clone()))
                    .collect();
                let rec = self.net.migrate(&source, target_chain, nodes).map_err(net_err)?;
                Ok(format!(
                    "{} -> {} at height {}, state {}",
                    rec.source_chain, rec.target_chain, rec.taken_at_height, rec.state_hash
                ))
            }
            Action::ExtractLogs { topic, from, to } => {
                let node = self.node_for(actor, &main)?;
                let range = match (from, to) {
                    (None, None) => None,
                    (a, b) => Some((a.unwrap_or(0), b.unwrap_or(u64::MAX))),
                };
                let logs = self.net.extract_logs(&node, topic.as_deref(), range).map_err(net_err)?;
                Ok(format!("{} events", logs.len()))
            }
            Action::Trace { subject } => self.trace(actor, subject),
        }
    }

    /// Traces the latest finalized transaction sent by `subject`.
    fn trace(&mut self, actor: &str, subject: &str) -> Result<String, String> {
        let main = self.main_chain();
        let node = self.net.node(&self.node_for(actor, &main)?).map_err(|e| e.to_string())?;
        let who = self.addr(subject);
        let blocks = node.chain_to(&node.finalized());
        let tx = blocks
            .iter()
            .flat_map(|b| b.transactions.iter())
            .rfind(|t| t.sender == who && !t.is_system())
            .map(|t| t.hash())
            .ok_or_else(|| format!("no finalized transaction from {subject}"))?;
        let trace = trace_sender(node.finalized_state(), &blocks, &tx).map_err(|e| e.to_string())?;
        let identity = trace.identity.clone();
        let fields = [
            ("chain", main),
            ("by", actor.to_string()),
            ("subject", subject.to_string()),
            ("tx", tx.to_string()),
            ("address", trace.address.to_string()),
            ("height", trace.height.to_string()),
            ("identity", identity.clone().unwrap_or_else(|| "withheld".to_string())),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        self.net.record("accountability.traced", fields);
        Ok(trace.to_string())
    }

    /// Builds the report from the current network state.
    pub fn report(&self) -> RunReport {
        let mut chains = BTreeMap::new();
        let mut log: Vec<LogEntry> = self
            .net
            .events()
            .iter()
            .map(|e| LogEntry {
                source: "network".to_string(),
                tick: Some(e.tick),
                height: None,
                tx: None,
                topic: e.topic.clone(),
                fields: e.fields.clone(),
            })
            .collect();
        for chain in self.net.chains() {
            let nodes = self.net.chain_nodes(chain).expect("listed");
            let reference = nodes[0].tip_state();
            let mut node_reports = BTreeMap::new();
            let mut supply = BTreeMap::new();
            let mut tips = BTreeSet::new();
            for n in &nodes {
                tips.insert(n.tip());
                node_reports.insert(
                    n.name.clone(),
                    NodeReport {
                        tip: n.tip().to_string(),
                        tip_height: n.tip_height(),
                        finalized: n.finalized().to_string(),
                        finalized_height: n.finalized_height(),
                        state_hash: n.tip_state().state_hash().to_string(),
                        rule_version: n.rule_version_at(n.tip_height() + 1),
                    },
                );
                supply.insert(n.name.clone(), supply_report(n.tip_state()));
            }
            let proposals = reference
                .governance
                .proposals
                .values()
                .map(|p| {
                    let t = p.tally.or_else(|| (!p.ballots.is_empty()).then(|| tally_proposal(p)));
                    ProposalReport {
                        id: p.id,
                        description: p.description.clone(),
                        payload: p.payload.name().to_string(),
                        scheme: p.scheme.name().to_string(),
                        threshold: p.threshold.to_string(),
                        status: p.status.name().to_string(),
                        deadline: p.deadline,
                        aborted: p.aborted,
                        yes: t.map(|t| t.yes.to_string()),
                        no: t.map(|t| t.no.to_string()),
                        turnout: t.map(|t| format!("{}/{}", t.turnout_num, t.turnout_den)),
                    }
                })
                .collect();
            chains.insert(
                chain.to_string(),
                ChainReport {
                    mode: reference.policy.mode.to_string(),
                    protocol_version: reference.governance.protocol_version,
                    frozen: self.net.is_frozen(chain),
                    nodes: node_reports,
                    distinct_tips: tips.len(),
                    finalized_height: nodes.iter().map(|n| n.finalized_height()).min().unwrap_or(0),
                    proposals,
                    supply,
                },
            );
            log.extend(reference.events.iter().map(|e| LogEntry {
                source: format!("chain:{chain}"),
                tick: None,
                height: Some(e.height),
                tx: e.tx_hash.map(|h| h.to_string()),
                topic: e.topic.clone(),
                fields: e.payload.clone(),
            }));
        }
        let mut report = RunReport {
            spec_version: self.config.spec_version,
            name: self.config.name.clone(),
            chain_id: self.config.chain_id.clone(),
            seed: self.config.seed,
            config_hash: hash(self.config.to_json().as_bytes()).to_string(),
            final_tick: self.net.tick(),
            actions: self.outcomes.clone(),
            chains,
            matrix: Default::default(),
            log,
        };
        report.matrix = conformance_matrix(&report);
        report
    }
}

pub fn node_name(actor: &str, chain: &str) -> String {
    format!("{actor}@{chain}")
}

fn main_account(a: &ActorConfig, key: &KeyPair) -> GenesisAccount {
    let mut g = GenesisAccount::new(key.public_key(), a.balance).with_roles(a.roles.iter().copied());
    g.member = a.member;
    if let Some(id) = &a.identity {
        g = g.with_identity(id.clone());
    }
    if a.stake > 0 {
        g = g.with_lock(a.stake, a.stake_duration, LockPurpose::ValidatorCandidacy);
    }
    g
}

/// Policy of a chain the harness derives: shards and auxiliary chains run
/// proof of authority over their validators without incentives.
fn support_policy(
    mode: Decentralisation,
    authorities: Vec<Address>,
    finality: FinalityPolicy,
    seed: u64,
    patterns: Vec<Pattern>,
) -> GovernancePolicy {
    GovernancePolicy::new(
        mode,
        ConsensusPolicy {
            selection: ValidatorSelectionPolicy::ProofOfAuthority { authorities },
            finality,
            incentive: IncentivePolicy::disabled(),
            seed,
        },
    )
    .with_patterns(patterns)
}

fn build_chain(
    chain: &str,
    policy: GovernancePolicy,
    mut seats: BTreeMap<&str, Seat>,
    keys: &BTreeMap<String, KeyPair>,
) -> Result<(ChainState, Block), ScenarioError> {
    if policy.is_permissioned() && !seats.values().any(|s| s.roles.contains(&Role::Administrator)) {
        if let Some(first) = seats.values_mut().next() {
            first.roles.insert(Role::Administrator);
        }
    }
    let mut g = GenesisConfig::new(chain, policy);
    for (name, seat) in seats {
        let mut acc = GenesisAccount::new(keys[name].public_key(), seat.balance).with_roles(seat.roles);
        acc.member = seat.member;
        if let Some(id) = seat.identity {
            acc = acc.with_identity(id);
        }
        g = g.account(acc);
    }
    g.build().map_err(|e| build_err(chain, e))
}

fn supply_report(state: &ChainState) -> SupplyReport {
    let s = state.supply;
    let expected = s.expected_total();
    let balances = state.total_balances();
    SupplyReport {
        genesis: s.genesis,
        minted: s.minted,
        slashed: s.slashed,
        burned: s.burned,
        expected_total: expected,
        balances,
        active_locks: state.total_active_locks(),
        reconciles: balances == expected,
    }
}

/// Validates and executes `config` to its horizon.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport, ScenarioError> {
    Ok(ScenarioRun::new(config)?.run())
}
