use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{Message, MirrorRequest, Outbound};
use crate::consensus::{
    choose_canonical_chain_from, finalized_height, select_validator, validator_weights, BlockTree,
    ConsensusError, FinalityInput, FinalityPolicy,
};
use crate::governance::{
    accepts_block_version, enact_upgrade, rule_version, GovernanceError, ProtocolUpgrade, CrossChainResult, GovAction, ProposalId, ProposalStatus,
    ResultBody, VotingScheme,
};
use crate::primitives::{Address, Digest, KeyPair};
use crate::state::{Block, BlockTemplate, ChainState, Height};
use crate::tx::{build_candidate_block, Eviction, Rejection, SignedHeader, SystemAction, Transaction, TxPayload, TxPool};

/// What a node knows about the network around it during one tick.
pub(crate) struct TickContext<'a> {
    pub tick: u64,
    pub empty_blocks: bool,
    pub max_block_txs: usize,
    /// Chains currently unreachable because they are frozen.
    pub frozen: &'a BTreeSet<String>,
    /// The relay chain coordinating this node's chain, if it is a shard.
    pub relay: Option<&'a str>,
    /// Shard chain ids by shard number, for relay nodes.
    pub shards: &'a BTreeMap<u32, String>,
    /// Bridge roles this node plays for cross-chain votes.
    pub bridge: BridgeRoles,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct BridgeRoles {
    /// Forwards new cross-chain proposals to the auxiliary chain.
    pub home_bridge: bool,
    /// Opens mirrored votes on the auxiliary chain.
    pub aux_admin: bool,
    /// Signs and returns finished mirrored tallies.
    pub tally: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FinalityRecord {
    pub tick: u64,
    pub hash: Digest,
    pub height: Height,
}

/// Something the node wants recorded on the network log.
#[derive(Debug, Clone)]
pub(crate) struct NodeNote {
    pub topic: &'static str,
    pub fields: Vec<(&'static str, String)>,
}

/// One participant: a key pair and a local replica of its chain.
#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub key: KeyPair,
    pub chain_id: String,
    tree: BlockTree,
    blocks: BTreeMap<Digest, Arc<Block>>,
    states: BTreeMap<Digest, Arc<ChainState>>,
    orphans: BTreeMap<Digest, Vec<Arc<Block>>>,
    invalid: BTreeSet<Digest>,
    requested: BTreeSet<Digest>,
    pub pool: TxPool,
    tip: Digest,
    finalized: Digest,
    /// Protocol versions this node's software supports.
    pub installed: BTreeSet<u32>,
    votes: BTreeMap<Address, Digest>,
    relay_final: Option<(Digest, Height)>,
    shard_headers: BTreeMap<(u32, Height, Digest), SignedHeader>,
    relay_sent: BTreeMap<u32, Height>,
    results: BTreeMap<ProposalId, CrossChainResult>,
    forwarded: BTreeSet<ProposalId>,
    mirrored: BTreeSet<(String, ProposalId)>,
    reported: BTreeSet<ProposalId>,
    pub finality_log: Vec<FinalityRecord>,
    pub(crate) notes: Vec<NodeNote>,
}

impl Node {
    pub fn new(name: impl Into<String>, key: KeyPair, state: ChainState, genesis: &Block) -> Node {
        let hash = genesis.hash();
        let version = state.policy.genesis_version;
        let chain_id = state.chain_id.clone();
        let mut blocks = BTreeMap::new();
        blocks.insert(hash, Arc::new(genesis.clone()));
        let mut states = BTreeMap::new();
        states.insert(hash, Arc::new(state));
        Node {
            name: name.into(),
            key,
            chain_id,
            tree: BlockTree::with_root(hash, genesis.header.height),
            blocks,
            states,
            orphans: BTreeMap::new(),
            invalid: BTreeSet::new(),
            requested: BTreeSet::new(),
            pool: TxPool::new(),
            tip: hash,
            finalized: hash,
            installed: [version].into_iter().collect(),
            votes: BTreeMap::new(),
            relay_final: None,
            shard_headers: BTreeMap::new(),
            relay_sent: BTreeMap::new(),
            results: BTreeMap::new(),
            forwarded: BTreeSet::new(),
            mirrored: BTreeSet::new(),
            reported: BTreeSet::new(),
            finality_log: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn address(&self) -> Address {
        self.key.address()
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn tip(&self) -> Digest {
        self.tip
    }

    pub fn tip_height(&self) -> Height {
        self.tree.height_of(&self.tip).expect("tip in tree")
    }

    pub fn tip_state(&self) -> &ChainState {
        &self.states[&self.tip]
    }

    pub fn finalized(&self) -> Digest {
        self.finalized
    }

    pub fn finalized_height(&self) -> Height {
        self.tree.height_of(&self.finalized).expect("finalized in tree")
    }

    pub fn finalized_state(&self) -> &ChainState {
        &self.states[&self.finalized]
    }

    pub fn state_at(&self, hash: &Digest) -> Option<&ChainState> {
        self.states.get(hash).map(|s| &**s)
    }

    pub fn block(&self, hash: &Digest) -> Option<&Block> {
        self.blocks.get(hash).map(|b| &**b)
    }

    /// Blocks from genesis to `tip`.
    pub fn chain_to(&self, tip: &Digest) -> Vec<Block> {
        self.tree
            .path_to(tip)
            .iter()
            .map(|h| (*self.blocks[h]).clone())
            .collect()
    }

    pub fn canonical_chain(&self) -> Vec<Block> {
        self.chain_to(&self.tip)
    }

    pub(crate) fn install_upgrade(&mut self, version: u32) -> Result<ProtocolUpgrade, GovernanceError> {
        let state = Arc::clone(&self.states[&self.tip]);
        let upgrade = state
            .governance
            .upgrades
            .get(&version)
            .map(|a| a.upgrade)
            .ok_or(GovernanceError::UpgradeNotApproved(version))?;
        enact_upgrade(&state, &mut self.installed, &upgrade)?;
        Ok(upgrade)
    }

    /// The version this node would produce under at `height` on its tip.
    pub fn rule_version_at(&self, height: Height) -> u32 {
        rule_version(self.tip_state(), &self.installed, height)
    }

    fn note(&mut self, topic: &'static str, fields: Vec<(&'static str, String)>) {
        self.notes.push(NodeNote { topic, fields });
    }

    pub(crate) fn submit_tx(&mut self, tx: Transaction) -> Result<Digest, Rejection> {
        let state = Arc::clone(&self.states[&self.tip]);
        self.pool.submit(&state, tx)
    }

    /// Next nonce for `address`, counting transactions already pooled here.
    pub fn next_nonce(&self, address: &Address) -> u64 {
        let base = self.tip_state().nonce(address);
        self.pool
            .iter()
            .filter(|t| t.sender == *address)
            .map(|t| t.nonce + 1)
            .max()
            .unwrap_or(base)
            .max(base)
    }

    /// Signs a transaction from this node's key with its next nonce.
    pub(crate) fn own_tx(&self, payload: TxPayload) -> Transaction {
        Transaction::signed(&self.key, payload, self.next_nonce(&self.address()), 0)
    }

    pub(crate) fn handle(&mut self, from: &str, msg: Message) -> Vec<Outbound> {
        match msg {
            Message::Block(block) => self.receive_block(block, Some(from)),
            Message::BlockRequest(hash) => match self.blocks.get(&hash) {
                Some(b) => vec![Outbound::To(from.to_string(), Message::Block(Arc::clone(b)))],
                None => Vec::new(),
            },
            Message::Tx(tx) => {
                let hash = tx.hash();
                if let Err(r) = self.submit_tx(tx) {
                    if r != Rejection::Duplicate {
                        self.note(
                            "tx.rejected",
                            vec![("tx", hash.to_string()), ("reason", r.reason())],
                        );
                    }
                }
                Vec::new()
            }
            Message::Vote { voter, tip } => {
                self.votes.insert(voter, tip);
                Vec::new()
            }
            Message::ShardBlock(block) => {
                self.receive_shard_block(&block);
                Vec::new()
            }
            Message::RelayFinality { shard_id, hash, height } => {
                let mine = self.tip_state().policy.shard.map(|s| s.shard_id);
                if mine == Some(shard_id) && self.relay_final.is_none_or(|(_, h)| height > h) {
                    self.relay_final = Some((hash, height));
                }
                Vec::new()
            }
            Message::CrossChainResult(result) => {
                self.results.insert(result.body.proposal, result);
                Vec::new()
            }
            Message::MirrorRequest(req) => self.open_mirror(req),
        }
    }

    fn open_mirror(&mut self, req: MirrorRequest) -> Vec<Outbound> {
        if !self.mirrored.insert((req.home_chain.clone(), req.proposal)) {
            return Vec::new();
        }
        let deadline = self.tip_height() + req.duration.max(1);
        let tx = self.own_tx(TxPayload::Governance {
            action: GovAction::OpenMirroredVote {
                home_chain: req.home_chain,
                home_proposal: req.proposal,
                payload: req.payload,
                threshold: req.threshold,
                deadline,
                weights: req.weights,
                weight_scale: req.weight_scale,
            },
        });
        match self.submit_tx(tx.clone()) {
            Ok(_) => vec![Outbound::Broadcast(Message::Tx(tx))],
            Err(r) => {
                self.note("tx.rejected", vec![("tx", tx.hash().to_string()), ("reason", r.reason())]);
                Vec::new()
            }
        }
    }

    fn receive_shard_block(&mut self, block: &Block) {
        let state = self.tip_state();
        let h = &block.header;
        let known = state.shard_heads.contains_key(&h.shard_id);
        let problem = if !known {
            Some(format!("unknown shard {}", h.shard_id))
        } else {
            block.verify_structure().err().map(|e| e.to_string())
        };
        if let Some(reason) = problem {
            self.note(
                "shard.block-excluded",
                vec![
                    ("shard", h.shard_id.to_string()),
                    ("height", h.height.to_string()),
                    ("block", block.hash().to_string()),
                    ("reason", reason),
                ],
            );
            return;
        }
        self.shard_headers.insert(
            (h.shard_id, h.height, block.hash()),
            SignedHeader {
                header: h.clone(),
                validator_key: block.validator_key,
                signature: block.signature,
            },
        );
    }

    /// Accepts a block from `from` (none for self-produced blocks), fetching
    /// missing ancestors from the sender.
    pub(crate) fn receive_block(&mut self, block: Arc<Block>, from: Option<&str>) -> Vec<Outbound> {
        let hash = block.hash();
        if self.tree.contains(&hash) || self.invalid.contains(&hash) {
            return Vec::new();
        }
        let Some(parent) = block.header.parent else {
            self.reject(hash, "foreign genesis".into());
            return Vec::new();
        };
        if !self.tree.contains(&parent) {
            let waiting = self.orphans.entry(parent).or_default();
            if !waiting.iter().any(|b| b.hash() == hash) {
                waiting.push(block);
            }
            if let Some(peer) = from {
                if self.requested.insert(parent) {
                    return vec![Outbound::To(peer.to_string(), Message::BlockRequest(parent))];
                }
            }
            return Vec::new();
        }
        let mut queue = vec![block];
        while let Some(b) = queue.pop() {
            let h = b.hash();
            if self.validate_and_insert(Arc::clone(&b)) {
                if let Some(children) = self.orphans.remove(&h) {
                    queue.extend(children);
                }
            } else if let Some(children) = self.orphans.remove(&h) {
                for c in children {
                    self.reject(c.hash(), "invalid ancestor".into());
                }
            }
        }
        Vec::new()
    }

    fn reject(&mut self, hash: Digest, reason: String) {
        self.invalid.insert(hash);
        self.note("block.rejected", vec![("block", hash.to_string()), ("reason", reason)]);
    }

    fn validate_and_insert(&mut self, block: Arc<Block>) -> bool {
        let hash = block.hash();
        let parent = block.header.parent.expect("non-genesis");
        let parent_state = Arc::clone(&self.states[&parent]);
        let height = block.header.height;
        let local = rule_version(&parent_state, &self.installed, height);
        if !accepts_block_version(&parent_state, local, block.header.protocol_version, height) {
            self.reject(
                hash,
                format!(
                    "protocol version {} under local rules {}",
                    block.header.protocol_version, local
                ),
            );
            return false;
        }
        match parent_state.apply_block(&block) {
            Ok(next) => {
                self.tree.insert(hash, parent, height);
                self.states.insert(hash, Arc::new(next));
                self.blocks.insert(hash, block);
                true
            }
            Err(e) => {
                self.reject(hash, e.to_string());
                false
            }
        }
    }

    fn system_txs(&mut self, parent: &ChainState, height: Height, ctx: &TickContext<'_>) -> Vec<Transaction> {
        let mut out = Vec::new();
        let me = &self.key;
        // Shard headers, oldest first; stale ones are forgotten.
        self.shard_headers
            .retain(|(shard, h, _), _| parent.shard_heads.get(shard).is_none_or(|head| *h > head.height));
        let mut expected: BTreeMap<u32, Digest> =
            parent.shard_heads.iter().map(|(s, h)| (*s, h.hash)).collect();
        for header in self.shard_headers.values() {
            let shard = header.header.shard_id;
            if header.header.parent != expected.get(&shard).copied() {
                continue;
            }
            expected.insert(shard, header.header.hash());
            out.push(Transaction::system(
                me,
                SystemAction::IncludeShardHeader {
                    header: header.clone(),
                },
            ));
        }
        self.results.retain(|id, _| {
            parent
                .governance
                .proposal(*id)
                .is_some_and(|p| p.status == ProposalStatus::Open)
        });
        for (id, result) in &self.results {
            let p = &parent.governance.proposals[id];
            if height >= p.deadline && !p.aborted {
                out.push(Transaction::system(
                    me,
                    SystemAction::ImportCrossChainResult {
                        result: result.clone(),
                    },
                ));
            }
        }
        for p in parent.governance.proposals.values() {
            let VotingScheme::CrossChainToken { aux_chain, .. } = &p.scheme else {
                continue;
            };
            if p.status == ProposalStatus::Open
                && !p.aborted
                && height >= p.deadline
                && !self.results.contains_key(&p.id)
                && ctx.frozen.contains(aux_chain)
            {
                out.push(Transaction::system(
                    me,
                    SystemAction::AbortCrossChainVote {
                        proposal: p.id,
                        reason: format!("auxiliary chain {aux_chain} is frozen"),
                    },
                ));
            }
        }
        out
    }

    /// Produces a block on the current tip if this node is the round's
    /// validator.
    pub(crate) fn produce(
        &mut self,
        round: u64,
        ctx: &TickContext<'_>,
    ) -> Result<Option<Arc<Block>>, ConsensusError> {
        let parent = Arc::clone(&self.states[&self.tip]);
        if round <= parent.last_round {
            return Ok(None);
        }
        let selected = select_validator(&parent, round)?;
        if selected != self.address() {
            return Ok(None);
        }
        let height = parent.height + 1;
        let system = self.system_txs(&parent, height, ctx);
        if !ctx.empty_blocks && system.is_empty() && self.pool.is_empty() {
            return Ok(None);
        }
        let template = BlockTemplate {
            chain_id: parent.chain_id.clone(),
            parent: self.tip,
            height,
            round,
            protocol_version: rule_version(&parent, &self.installed, height),
            shard_id: parent.policy.shard.map_or(0, |s| s.shard_id),
        };
        let outcome = build_candidate_block(&parent, &self.pool, &self.key, template, system, ctx.max_block_txs);
        for e in &outcome.evicted {
            self.pool.remove(&e.sender, e.nonce);
            self.note_eviction("tx.evicted", e);
        }
        for e in &outcome.dropped_system {
            self.note_eviction("system.dropped", e);
        }
        let block = Arc::new(outcome.block);
        self.receive_block(Arc::clone(&block), None);
        Ok(Some(block))
    }

    fn note_eviction(&mut self, topic: &'static str, e: &Eviction) {
        self.note(
            topic,
            vec![
                ("tx", e.tx_hash.to_string()),
                ("sender", e.sender.to_string()),
                ("reason", e.reason.clone()),
            ],
        );
    }

    /// Recomputes the canonical tip and finality and returns the messages
    /// that follow from any change.
    pub(crate) fn refresh(&mut self, ctx: &TickContext<'_>) -> Vec<Outbound> {
        let mut out = Vec::new();
        let policy = self.tip_state().policy.consensus.finality.clone();
        if let (FinalityPolicy::RelayInclusion, Some((hash, _))) = (&policy, self.relay_final) {
            if hash != self.finalized && self.tree.is_ancestor(&self.finalized, &hash) {
                self.set_finalized(hash, ctx.tick);
            }
        }
        let tip = choose_canonical_chain_from(&self.tree, &self.finalized);
        if tip != self.tip {
            self.tip = tip;
            let state = Arc::clone(&self.states[&tip]);
            for e in self.pool.revalidate(&state) {
                self.note_eviction("tx.evicted", &e);
            }
            let me = self.address();
            if matches!(policy, FinalityPolicy::SupermajorityVote { .. })
                && validator_weights(self.finalized_state()).contains_key(&me)
            {
                self.votes.insert(me, tip);
                out.push(Outbound::Broadcast(Message::Vote { voter: me, tip }));
            }
        }
        if !matches!(policy, FinalityPolicy::RelayInclusion) {
            let weights = validator_weights(self.finalized_state());
            let input = FinalityInput {
                tree: &self.tree,
                tip: self.tip,
                votes: &self.votes,
                weights: &weights,
                relay_finalized: 0,
            };
            let h = finalized_height(&input, &policy);
            if h > self.finalized_height() {
                let hash = self.tree.ancestor_at(&self.tip, h).expect("on canonical chain");
                self.set_finalized(hash, ctx.tick);
            }
        }
        out.extend(self.relay_notices(ctx));
        out.extend(self.bridge_messages(ctx));
        out
    }

    fn set_finalized(&mut self, hash: Digest, tick: u64) {
        self.finalized = hash;
        let height = self.finalized_height();
        self.finality_log.push(FinalityRecord { tick, hash, height });
        // Forget side branches below the new anchor's height.
        self.orphans.retain(|_, v| v.iter().any(|b| b.header.height > height));
    }

    fn relay_notices(&mut self, ctx: &TickContext<'_>) -> Vec<Outbound> {
        let mut out = Vec::new();
        let heads: Vec<(u32, Digest, Height)> = self
            .finalized_state()
            .shard_heads
            .iter()
            .map(|(s, h)| (*s, h.hash, h.height))
            .collect();
        for (shard_id, hash, height) in heads {
            let Some(chain) = ctx.shards.get(&shard_id) else {
                continue;
            };
            if self.relay_sent.get(&shard_id).is_some_and(|h| *h >= height) {
                continue;
            }
            self.relay_sent.insert(shard_id, height);
            out.push(Outbound::Chain(
                chain.clone(),
                Message::RelayFinality {
                    shard_id,
                    hash,
                    height,
                },
            ));
        }
        out
    }

    fn bridge_messages(&mut self, ctx: &TickContext<'_>) -> Vec<Outbound> {
        let mut out = Vec::new();
        let state = Arc::clone(&self.states[&self.finalized]);
        if ctx.bridge.home_bridge {
            for p in state.governance.proposals.values() {
                let VotingScheme::CrossChainToken { aux_chain, .. } = &p.scheme else {
                    continue;
                };
                if p.status != ProposalStatus::Open || !self.forwarded.insert(p.id) {
                    continue;
                }
                out.push(Outbound::Chain(
                    aux_chain.clone(),
                    Message::MirrorRequest(MirrorRequest {
                        home_chain: state.chain_id.clone(),
                        proposal: p.id,
                        payload: p.payload.clone(),
                        threshold: p.threshold,
                        duration: p.deadline.saturating_sub(state.height),
                        weights: p.eligible.clone(),
                        weight_scale: p.weight_scale,
                    }),
                ));
            }
        }
        if ctx.bridge.tally {
            for p in state.governance.proposals.values() {
                let Some(home) = &p.mirror_of else {
                    continue;
                };
                if p.tally.is_none() || self.reported.contains(&p.id) {
                    continue;
                }
                let Ok(body) = ResultBody::from_mirror(&state, p.id) else {
                    continue;
                };
                self.reported.insert(p.id);
                let result = body.sign(&self.key);
                self.note(
                    "cross-chain.result-sent",
                    vec![
                        ("home_chain", home.home_chain.clone()),
                        ("proposal", home.proposal.to_string()),
                        ("result", result.body.digest().to_string()),
                    ],
                );
                out.push(Outbound::Chain(
                    home.home_chain.clone(),
                    Message::CrossChainResult(result),
                ));
            }
        }
        out
    }

    /// Sends this node's own shard block to the relay chain, together with
    /// the canonical ancestors the relay has not finalized yet, so blocks
    /// lost while either side was frozen are offered again.
    pub(crate) fn shard_relay(&self, block: &Arc<Block>, ctx: &TickContext<'_>) -> Vec<Outbound> {
        const RESEND_LIMIT: usize = 64;
        let Some(relay) = ctx.relay else {
            return Vec::new();
        };
        let settled = self.relay_final.map_or(0, |(_, h)| h);
        let mut pending: Vec<Arc<Block>> = Vec::new();
        let mut cur = block.header.parent;
        while pending.len() < RESEND_LIMIT {
            let Some(b) = cur.and_then(|h| self.blocks.get(&h)) else {
                break;
            };
            if b.header.height <= settled || b.is_genesis() {
                break;
            }
            pending.push(Arc::clone(b));
            cur = b.header.parent;
        }
        pending.reverse();
        pending.push(Arc::clone(block));
        pending
            .into_iter()
            .map(|b| Outbound::Chain(relay.to_string(), Message::ShardBlock(b)))
            .collect()
    }
}
