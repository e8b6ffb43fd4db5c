//! The simulated message fabric: full-mesh broadcast with per-link delays,
//! partitions, the network freezer, shard relaying, migration and the
//! cross-chain voting bridge.

mod node;


pub use node::{FinalityRecord, Node};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::validator_weights;
use crate::governance::{
    CrossChainResult, GovernanceError, ProposalId, ProposalPayload, ThresholdPolicy,
};
use crate::policy::{Pattern, Role};
use crate::primitives::{Address, Digest, KeyPair};
use crate::ratio::Fraction;
use crate::state::{
    export_snapshot, import_snapshot_bytes, Block, ChainState, EventRecord, Height, LogError, SnapshotError,
};
use crate::tx::{route_shard, Rejection, Transaction};
use node::{BridgeRoles, TickContext};

/// Asks the auxiliary chain to open a vote mirroring a home proposal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MirrorRequest {
    pub home_chain: String,
    pub proposal: ProposalId,
    pub payload: ProposalPayload,
    pub threshold: ThresholdPolicy,
    /// Blocks the home vote still had to run when the request was sent.
    pub duration: Height,
    pub weights: BTreeMap<Address, u128>,
    pub weight_scale: u128,
}

#[derive(Debug, Clone)]
pub enum Message {
    Block(Arc<Block>),
    BlockRequest(Digest),
    Tx(Transaction),
    /// A validator's current tip, counted by supermajority finality.
    Vote { voter: Address, tip: Digest },
    ShardBlock(Arc<Block>),
    RelayFinality { shard_id: u32, hash: Digest, height: Height },
    CrossChainResult(CrossChainResult),
    MirrorRequest(MirrorRequest),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Block(_) => "block",
            Message::BlockRequest(_) => "block-request",
            Message::Tx(_) => "tx",
            Message::Vote { .. } => "vote",
            Message::ShardBlock(_) => "shard-block",
            Message::RelayFinality { .. } => "relay-finality",
            Message::CrossChainResult(_) => "cross-chain-result",
            Message::MirrorRequest(_) => "mirror-request",
        }
    }
}

pub(crate) enum Outbound {
    /// Every other node of the sender's chain.
    Broadcast(Message),
    To(String, Message),
    /// Every node of the named chain.
    Chain(String, Message),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkDelay {
    pub a: String,
    pub b: String,
    pub delay: u64,
}

/// During `[from, until)` nodes in different groups cannot reach each other.
/// Nodes not listed in any group form one more group together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionWindow {
    pub from: u64,
    pub until: u64,
    pub groups: Vec<Vec<String>>,
}

impl PartitionWindow {
    fn group_of(&self, node: &str) -> usize {
        self.groups
            .iter()
            .position(|g| g.iter().any(|n| n == node))
            .unwrap_or(usize::MAX)
    }

    fn separates(&self, tick: u64, a: &str, b: &str) -> bool {
        (self.from..self.until).contains(&tick) && self.group_of(a) != self.group_of(b)
    }
}

fn default_delay() -> u64 {
    1
}
fn default_slot_ticks() -> u64 {
    2
}
fn default_true() -> bool {
    true
}
fn default_max_block_txs() -> usize {
    256
}
fn default_freeze_quorum() -> Fraction {
    Fraction::new(2, 3).expect("valid")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default)]
    pub seed: u64,
    /// Ticks a message spends in flight; at least one.
    #[serde(default = "default_delay")]
    pub delay: u64,
    /// Extra uniformly drawn delay in `0..=jitter`.
    #[serde(default)]
    pub jitter: u64,
    #[serde(default)]
    pub links: Vec<LinkDelay>,
    #[serde(default)]
    pub partitions: Vec<PartitionWindow>,
    /// A production round starts every `slot_ticks` ticks.
    #[serde(default = "default_slot_ticks")]
    pub slot_ticks: u64,
    #[serde(default = "default_true")]
    pub empty_blocks: bool,
    #[serde(default = "default_max_block_txs")]
    pub max_block_txs: usize,
    /// Validator-weight share a freeze vote must exceed on permissionless
    /// chains.
    #[serde(default = "default_freeze_quorum")]
    pub freeze_quorum: Fraction,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            seed: 0,
            delay: default_delay(),
            jitter: 0,
            links: Vec::new(),
            partitions: Vec::new(),
            slot_ticks: default_slot_ticks(),
            empty_blocks: true,
            max_block_txs: default_max_block_txs(),
            freeze_quorum: default_freeze_quorum(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.delay == 0 {
            return Err("network.delay must be at least 1".into());
        }
        if self.links.iter().any(|l| l.delay == 0) {
            return Err("network.links: every delay must be at least 1".into());
        }
        if self.slot_ticks == 0 {
            return Err("network.slot_ticks must be at least 1".into());
        }
        if self.max_block_txs == 0 {
            return Err("network.max_block_txs must be at least 1".into());
        }
        if let Some(w) = self.partitions.iter().find(|w| w.until < w.from) {
            return Err(format!(
                "network.partitions: window ends at {} before it starts at {}",
                w.until, w.from
            ));
        }
        if !self.freeze_quorum.is_at_most_one() {
            return Err("network.freeze_quorum must not exceed 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetEvent {
    pub tick: u64,
    pub topic: String,
    pub fields: BTreeMap<String, String>,
}

impl NetEvent {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }
}

/// One delivered message, as scheduled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub tick: u64,
    pub seq: u64,
    pub from: String,
    pub to: String,
    pub kind: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationRecord {
    pub source_chain: String,
    pub target_chain: String,
    pub taken_at_height: Height,
    pub state_hash: Digest,
    pub snapshot_bytes: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown chain {0}")]
    UnknownChain(String),
    #[error("node name {0} is already taken")]
    DuplicateNode(String),
    #[error("chain {0} already exists")]
    DuplicateChain(String),
    #[error("chain {0} is frozen")]
    Frozen(String),
    #[error("chain {0} is not frozen")]
    NotFrozen(String),
    #[error("{actor} may not {action} chain {chain}")]
    Unauthorized {
        actor: Address,
        action: &'static str,
        chain: String,
    },
    #[error("chain {chain} has no active {pattern} pattern")]
    PatternInactive { chain: String, pattern: &'static str },
    #[error("chain {0} is not sharded")]
    NotSharded(String),
    #[error("transaction refused: {0}")]
    Rejected(Rejection),
    #[error(transparent)]
    Governance(#[from] GovernanceError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// How a chain's freezer is triggered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreezerMode {
    Admin,
    ValidatorVote { quorum: Fraction },
}

#[derive(Debug, Clone, Default)]
struct ChainEntry {
    nodes: Vec<usize>,
    relay: Option<String>,
    shards: BTreeMap<u32, String>,
}

struct Envelope {
    from: usize,
    to: usize,
    msg: Message,
}

/// The tick-driven simulator.
pub struct SimNetwork {
    config: NetworkConfig,
    tick: u64,
    seq: u64,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    chains: BTreeMap<String, ChainEntry>,
    queue: BTreeMap<(u64, u64), Envelope>,
    frozen: BTreeSet<String>,
    freeze_votes: BTreeMap<String, BTreeSet<Address>>,
    unfreeze_votes: BTreeMap<String, BTreeSet<Address>>,
    bridges: BTreeMap<usize, BridgeRoles>,
    events: Vec<NetEvent>,
    deliveries: Vec<Delivery>,
    producing: bool,
}

fn fields<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

impl SimNetwork {
    pub fn new(config: NetworkConfig) -> SimNetwork {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        SimNetwork {
            config,
            tick: 0,
            seq: 0,
            rng,
            nodes: Vec::new(),
            index: BTreeMap::new(),
            chains: BTreeMap::new(),
            queue: BTreeMap::new(),
            frozen: BTreeSet::new(),
            freeze_votes: BTreeMap::new(),
            unfreeze_votes: BTreeMap::new(),
            bridges: BTreeMap::new(),
            events: Vec::new(),
            deliveries: Vec::new(),
            producing: true,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn events(&self) -> &[NetEvent] {
        &self.events
    }

    pub fn deliveries(&self) -> &[Delivery] {
        &self.deliveries
    }

    pub fn pending_messages(&self) -> usize {
        self.queue.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Result<&Node, NetworkError> {
        self.index
            .get(name)
            .map(|i| &self.nodes[*i])
            .ok_or_else(|| NetworkError::UnknownNode(name.to_string()))
    }

    pub fn node_mut(&mut self, name: &str) -> Result<&mut Node, NetworkError> {
        let i = self.node_index(name)?;
        Ok(&mut self.nodes[i])
    }

    fn node_index(&self, name: &str) -> Result<usize, NetworkError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| NetworkError::UnknownNode(name.to_string()))
    }

    pub fn chains(&self) -> impl Iterator<Item = &str> {
        self.chains.keys().map(String::as_str)
    }

    pub fn chain_nodes(&self, chain: &str) -> Result<Vec<&Node>, NetworkError> {
        let entry = self
            .chains
            .get(chain)
            .ok_or_else(|| NetworkError::UnknownChain(chain.to_string()))?;
        Ok(entry.nodes.iter().map(|i| &self.nodes[*i]).collect())
    }

    pub fn is_frozen(&self, chain: &str) -> bool {
        self.frozen.contains(chain)
    }

    /// Appends an externally observed event to the network log.
    pub fn record(&mut self, topic: &str, fields: BTreeMap<String, String>) {
        self.events.push(NetEvent {
            tick: self.tick,
            topic: topic.to_string(),
            fields,
        });
    }

    fn log(&mut self, topic: &str, pairs: Vec<(&str, String)>) {
        self.events.push(NetEvent {
            tick: self.tick,
            topic: topic.to_string(),
            fields: fields(pairs),
        });
    }

    /// Adds a chain from its genesis with one node per `(name, key)`.
    pub fn add_chain(
        &mut self,
        state: ChainState,
        genesis: &Block,
        nodes: Vec<(String, KeyPair)>,
    ) -> Result<(), NetworkError> {
        let chain = state.chain_id.clone();
        if self.chains.contains_key(&chain) {
            return Err(NetworkError::DuplicateChain(chain));
        }
        if let Some((name, _)) = nodes.iter().find(|(n, _)| self.index.contains_key(n)) {
            return Err(NetworkError::DuplicateNode(name.clone()));
        }
        let mut entry = ChainEntry::default();
        for (name, key) in nodes {
            let i = self.nodes.len();
            self.index.insert(name.clone(), i);
            self.nodes.push(Node::new(name, key, state.clone(), genesis));
            entry.nodes.push(i);
        }
        self.log(
            "chain.added",
            vec![
                ("chain", chain.clone()),
                ("height", state.height.to_string()),
                ("state_hash", state.state_hash().to_string()),
                ("nodes", entry.nodes.len().to_string()),
            ],
        );
        self.chains.insert(chain, entry);
        Ok(())
    }

    /// Registers `shard_chain` as a shard coordinated by `relay_chain`.
    pub fn link_shard(&mut self, shard_chain: &str, relay_chain: &str) -> Result<(), NetworkError> {
        if !self.chains.contains_key(relay_chain) {
            return Err(NetworkError::UnknownChain(relay_chain.to_string()));
        }
        let entry = self
            .chains
            .get(shard_chain)
            .ok_or_else(|| NetworkError::UnknownChain(shard_chain.to_string()))?;
        let shard = self.nodes[entry.nodes[0]]
            .tip_state()
            .policy
            .shard
            .ok_or_else(|| NetworkError::NotSharded(shard_chain.to_string()))?;
        self.chains.get_mut(shard_chain).expect("checked").relay = Some(relay_chain.to_string());
        self.chains
            .get_mut(relay_chain)
            .expect("checked")
            .shards
            .insert(shard.shard_id, shard_chain.to_string());
        Ok(())
    }

    /// Wires the cross-chain voting bridge: `home_bridge` forwards new
    /// cross-chain proposals, `aux_admin` opens the mirrored votes and
    /// `tally` signs their results.
    pub fn link_cross_chain(&mut self, home_bridge: &str, aux_admin: &str, tally: &str) -> Result<(), NetworkError> {
        let h = self.node_index(home_bridge)?;
        let a = self.node_index(aux_admin)?;
        let t = self.node_index(tally)?;
        self.bridges.entry(h).or_default().home_bridge = true;
        self.bridges.entry(a).or_default().aux_admin = true;
        self.bridges.entry(t).or_default().tally = true;
        Ok(())
    }

    fn link_delay(&self, a: &str, b: &str) -> u64 {
        self.config
            .links
            .iter()
            .find(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
            .map_or(self.config.delay, |l| l.delay)
    }

    fn partitioned(&self, tick: u64, a: &str, b: &str) -> bool {
        self.config.partitions.iter().any(|w| w.separates(tick, a, b))
    }

    fn send(&mut self, from: usize, to: usize, msg: Message) {
        let from_chain = &self.nodes[from].chain_id;
        let to_chain = &self.nodes[to].chain_id;
        let reason = if self.frozen.contains(from_chain) || self.frozen.contains(to_chain) {
            Some("frozen")
        } else if self.partitioned(self.tick, &self.nodes[from].name, &self.nodes[to].name) {
            Some("partition")
        } else {
            None
        };
        if let Some(reason) = reason {
            let pairs = vec![
                ("from", self.nodes[from].name.clone()),
                ("to", self.nodes[to].name.clone()),
                ("kind", msg.kind().to_string()),
                ("reason", reason.to_string()),
            ];
            self.log("message.dropped", pairs);
            return;
        }
        let mut delay = self.link_delay(&self.nodes[from].name, &self.nodes[to].name);
        if self.config.jitter > 0 {
            delay += self.rng.gen_range(0..=self.config.jitter);
        }
        self.seq += 1;
        self.queue
            .insert((self.tick + delay.max(1), self.seq), Envelope { from, to, msg });
    }

    fn dispatch(&mut self, from: usize, outs: Vec<Outbound>) {
        for out in outs {
            match out {
                Outbound::Broadcast(msg) => {
                    let chain = &self.nodes[from].chain_id;
                    let peers: Vec<usize> = self.chains[chain]
                        .nodes
                        .iter()
                        .copied()
                        .filter(|i| *i != from)
                        .collect();
                    for p in peers {
                        self.send(from, p, msg.clone());
                    }
                }
                Outbound::To(name, msg) => {
                    if let Some(&to) = self.index.get(&name) {
                        self.send(from, to, msg);
                    }
                }
                Outbound::Chain(chain, msg) => {
                    let Some(entry) = self.chains.get(&chain) else {
                        let pairs = vec![
                            ("from", self.nodes[from].name.clone()),
                            ("chain", chain),
                            ("kind", msg.kind().to_string()),
                            ("reason", "unknown chain".to_string()),
                        ];
                        self.log("message.dropped", pairs);
                        continue;
                    };
                    let mut targets = entry.nodes.clone();
                    // Only the linked administrator opens mirrored votes.
                    if matches!(msg, Message::MirrorRequest(_)) {
                        let admins: Vec<usize> = targets
                            .iter()
                            .copied()
                            .filter(|i| self.bridges.get(i).is_some_and(|b| b.aux_admin))
                            .collect();
                        if !admins.is_empty() {
                            targets = admins;
                        }
                    }
                    for to in targets {
                        self.send(from, to, msg.clone());
                    }
                }
            }
        }
        self.drain_notes(from);
    }

    fn drain_notes(&mut self, i: usize) {
        let notes = std::mem::take(&mut self.nodes[i].notes);
        for n in notes {
            let mut pairs = vec![
                ("chain", self.nodes[i].chain_id.clone()),
                ("node", self.nodes[i].name.clone()),
            ];
            pairs.extend(n.fields);
            self.log(n.topic, pairs);
        }
    }

    fn run_node<T>(&mut self, i: usize, f: impl FnOnce(&mut Node, &TickContext<'_>) -> T) -> T {
        let chain = &self.chains[&self.nodes[i].chain_id];
        let ctx = TickContext {
            tick: self.tick,
            empty_blocks: self.config.empty_blocks,
            max_block_txs: self.config.max_block_txs,
            frozen: &self.frozen,
            relay: chain.relay.as_deref(),
            shards: &chain.shards,
            bridge: self.bridges.get(&i).copied().unwrap_or_default(),
        };
        f(&mut self.nodes[i], &ctx)
    }

    /// Submits a user transaction at `node` and gossips it to its chain.
    pub fn submit(&mut self, node: &str, tx: Transaction) -> Result<Digest, NetworkError> {
        let i = self.node_index(node)?;
        let hash = tx.hash();
        let chain = self.nodes[i].chain_id.clone();
        if self.frozen.contains(&chain) {
            self.log(
                "tx.rejected",
                vec![
                    ("chain", chain),
                    ("node", node.to_string()),
                    ("tx", hash.to_string()),
                    ("reason", Rejection::NetworkFrozen.reason()),
                ],
            );
            return Err(NetworkError::Rejected(Rejection::NetworkFrozen));
        }
        match self.nodes[i].submit_tx(tx.clone()) {
            Ok(h) => {
                self.dispatch(i, vec![Outbound::Broadcast(Message::Tx(tx))]);
                Ok(h)
            }
            Err(r) => {
                self.log(
                    "tx.rejected",
                    vec![
                        ("chain", chain),
                        ("node", node.to_string()),
                        ("tx", hash.to_string()),
                        ("sender", tx.sender.to_string()),
                        ("reason", r.reason()),
                    ],
                );
                Err(NetworkError::Rejected(r))
            }
        }
    }

    /// Routes `tx` to its sender's shard under `relay_chain` and submits it
    /// at that shard's first node.
    pub fn submit_routed(&mut self, relay_chain: &str, tx: Transaction) -> Result<(u32, Digest), NetworkError> {
        let entry = self
            .chains
            .get(relay_chain)
            .ok_or_else(|| NetworkError::UnknownChain(relay_chain.to_string()))?;
        if entry.shards.is_empty() {
            return Err(NetworkError::NotSharded(relay_chain.to_string()));
        }
        let count = self.nodes[self.chains[&entry.shards[entry.shards.keys().next().expect("non-empty")]].nodes[0]]
            .tip_state()
            .policy
            .shard
            .expect("linked shards carry an assignment")
            .shard_count;
        let shard = route_shard(&tx.sender, count);
        let chain = entry
            .shards
            .get(&shard)
            .ok_or_else(|| NetworkError::UnknownChain(format!("{relay_chain}/shard-{shard}")))?;
        let first = self.nodes[self.chains[chain].nodes[0]].name.clone();
        let hash = self.submit(&first, tx)?;
        Ok((shard, hash))
    }

    /// Advances one tick: due deliveries, then a production round if the
    /// tick starts one, then every node refreshes its view.
    pub fn step(&mut self) {
        self.tick += 1;
        let due: Vec<(u64, u64)> = self.queue.range(..(self.tick + 1, 0)).map(|(k, _)| *k).collect();
        for key in due {
            let env = &self.queue[&key];
            let (from, to) = (env.from, env.to);
            if self.frozen.contains(&self.nodes[from].chain_id) || self.frozen.contains(&self.nodes[to].chain_id) {
                continue;
            }
            let env = self.queue.remove(&key).expect("present");
            if self.partitioned(self.tick, &self.nodes[from].name, &self.nodes[to].name) {
                let pairs = vec![
                    ("from", self.nodes[from].name.clone()),
                    ("to", self.nodes[to].name.clone()),
                    ("kind", env.msg.kind().to_string()),
                    ("reason", "partition".to_string()),
                ];
                self.log("message.dropped", pairs);
                continue;
            }
            self.deliveries.push(Delivery {
                tick: self.tick,
                seq: key.1,
                from: self.nodes[from].name.clone(),
                to: self.nodes[to].name.clone(),
                kind: env.msg.kind(),
            });
            let sender = self.nodes[from].name.clone();
            let outs = self.nodes[to].handle(&sender, env.msg);
            self.dispatch(to, outs);
        }
        if self.producing && self.tick.is_multiple_of(self.config.slot_ticks) {
            let round = self.tick / self.config.slot_ticks;
            let chains: Vec<String> = self.chains.keys().cloned().collect();
            for chain in chains {
                if self.frozen.contains(&chain) {
                    continue;
                }
                // Blocks delivered this tick must count before anyone builds on a tip.
                for i in self.chains[&chain].nodes.clone() {
                    let outs = self.run_node(i, |n, ctx| n.refresh(ctx));
                    self.dispatch(i, outs);
                }
                let mut halted = false;
                for i in self.chains[&chain].nodes.clone() {
                    let produced = self.run_node(i, |n, ctx| {
                        let r = n.produce(round, ctx);
                        let relay = match &r {
                            Ok(Some(b)) => n.shard_relay(b, ctx),
                            _ => Vec::new(),
                        };
                        (r, relay)
                    });
                    match produced {
                        (Ok(Some(block)), relay) => {
                            let pairs = vec![
                                ("chain", chain.clone()),
                                ("node", self.nodes[i].name.clone()),
                                ("height", block.header.height.to_string()),
                                ("round", round.to_string()),
                                ("block", block.hash().to_string()),
                                ("txs", block.transactions.len().to_string()),
                                ("version", block.header.protocol_version.to_string()),
                            ];
                            self.log("block.produced", pairs);
                            let mut outs = vec![Outbound::Broadcast(Message::Block(block))];
                            outs.extend(relay);
                            self.dispatch(i, outs);
                        }
                        (Ok(None), _) => self.drain_notes(i),
                        (Err(e), _) => {
                            if !halted {
                                halted = true;
                                self.log(
                                    "round.halted",
                                    vec![
                                        ("chain", chain.clone()),
                                        ("round", round.to_string()),
                                        ("reason", e.to_string()),
                                    ],
                                );
                            }
                            self.drain_notes(i);
                        }
                    }
                }
            }
        }
        for i in 0..self.nodes.len() {
            if self.frozen.contains(&self.nodes[i].chain_id) {
                continue;
            }
            let outs = self.run_node(i, |n, ctx| n.refresh(ctx));
            self.dispatch(i, outs);
        }
    }

    pub fn run_until(&mut self, tick: u64) {
        while self.tick < tick {
            self.step();
        }
    }

    pub fn run_for(&mut self, ticks: u64) {
        let end = self.tick + ticks;
        self.run_until(end);
    }

    /// Runs `ticks` ticks with block production paused, letting in-flight
    /// messages land.
    pub fn quiesce(&mut self, ticks: u64) {
        let was = self.producing;
        self.producing = false;
        self.run_for(ticks);
        self.producing = was;
    }

    /// Queues `msg` from `from` to `to` as if `from` had sent it, subject to
    /// the usual freeze, partition and delay rules.
    pub fn inject(&mut self, from: &str, to: &str, msg: Message) -> Result<(), NetworkError> {
        let f = self.node_index(from)?;
        let t = self.node_index(to)?;
        self.send(f, t, msg);
        Ok(())
    }

    /// The freezer mode of `chain`, read from its first node's tip.
    pub fn freezer_mode(&self, chain: &str) -> Result<FreezerMode, NetworkError> {
        let state = self.reference_state(chain)?;
        if !state.policy.is_active(Pattern::NetworkFreezer) {
            return Err(NetworkError::PatternInactive {
                chain: chain.to_string(),
                pattern: Pattern::NetworkFreezer.name(),
            });
        }
        Ok(if state.policy.is_permissioned() {
            FreezerMode::Admin
        } else {
            FreezerMode::ValidatorVote {
                quorum: self.config.freeze_quorum,
            }
        })
    }

    fn reference_state(&self, chain: &str) -> Result<&ChainState, NetworkError> {
        let entry = self
            .chains
            .get(chain)
            .ok_or_else(|| NetworkError::UnknownChain(chain.to_string()))?;
        Ok(self.nodes[entry.nodes[0]].tip_state())
    }

    fn set_frozen(&mut self, chain: &str, frozen: bool, by: String) {
        if frozen {
            self.frozen.insert(chain.to_string());
        } else {
            self.frozen.remove(chain);
        }
        self.freeze_votes.remove(chain);
        self.unfreeze_votes.remove(chain);
        let tips: Vec<String> = self.chains[chain]
            .nodes
            .iter()
            .map(|i| format!("{}@{}", self.nodes[*i].name, self.nodes[*i].tip_height()))
            .collect();
        self.log(
            if frozen { "network.frozen" } else { "network.unfrozen" },
            vec![
                ("chain", chain.to_string()),
                ("by", by),
                ("tips", tips.join(",")),
                ("queued", self.queue.len().to_string()),
            ],
        );
    }

    fn refuse(&mut self, chain: &str, actor: Address, action: &'static str) -> NetworkError {
        self.log(
            "network.freeze-refused",
            vec![
                ("chain", chain.to_string()),
                ("actor", actor.to_string()),
                ("action", action.to_string()),
            ],
        );
        NetworkError::Unauthorized {
            actor,
            action,
            chain: chain.to_string(),
        }
    }

    /// Administrator freeze of a permissioned chain.
    pub fn freeze(&mut self, chain: &str, actor: Address) -> Result<(), NetworkError> {
        self.admin_action(chain, actor, true)
    }

    /// Administrator unfreeze of a permissioned chain.
    pub fn unfreeze(&mut self, chain: &str, actor: Address) -> Result<(), NetworkError> {
        self.admin_action(chain, actor, false)
    }

    fn admin_action(&mut self, chain: &str, actor: Address, freeze: bool) -> Result<(), NetworkError> {
        let action = if freeze { "freeze" } else { "unfreeze" };
        let mode = self.freezer_mode(chain)?;
        let is_admin = self.reference_state(chain)?.has_role(&actor, Role::Administrator);
        if mode != FreezerMode::Admin || !is_admin {
            return Err(self.refuse(chain, actor, action));
        }
        if !freeze && !self.frozen.contains(chain) {
            return Err(NetworkError::NotFrozen(chain.to_string()));
        }
        self.set_frozen(chain, freeze, actor.to_string());
        Ok(())
    }

    /// Records a validator's vote to freeze (or, when frozen, to recover)
    /// a permissionless chain. Returns whether the vote changed the state.
    pub fn vote_freeze(&mut self, chain: &str, validator: Address) -> Result<bool, NetworkError> {
        let mode = self.freezer_mode(chain)?;
        let FreezerMode::ValidatorVote { quorum } = mode else {
            return Err(self.refuse(chain, validator, "vote on"));
        };
        let weights = validator_weights(self.reference_state(chain)?);
        if !weights.contains_key(&validator) {
            return Err(self.refuse(chain, validator, "vote on"));
        }
        let freezing = !self.frozen.contains(chain);
        let book = if freezing {
            &mut self.freeze_votes
        } else {
            &mut self.unfreeze_votes
        };
        let voters = book.entry(chain.to_string()).or_default();
        voters.insert(validator);
        let voted: u128 = voters.iter().map(|v| weights[v] as u128).sum();
        let total: u128 = weights.values().map(|w| *w as u128).sum();
        let count = voters.len();
        self.log(
            "network.freeze-vote",
            vec![
                ("chain", chain.to_string()),
                ("validator", validator.to_string()),
                ("direction", if freezing { "freeze" } else { "unfreeze" }.to_string()),
                ("voters", count.to_string()),
                ("weight", format!("{voted}/{total}")),
                ("quorum", quorum.to_string()),
            ],
        );
        if quorum.exceeded_by(voted, total) {
            self.set_frozen(chain, freezing, format!("validator-vote:{voted}/{total}"));
            return Ok(true);
        }
        Ok(false)
    }

    /// Explicit human recovery of a frozen chain.
    pub fn operator_unfreeze(&mut self, chain: &str, operator: &str) -> Result<(), NetworkError> {
        if !self.chains.contains_key(chain) {
            return Err(NetworkError::UnknownChain(chain.to_string()));
        }
        if !self.frozen.contains(chain) {
            return Err(NetworkError::NotFrozen(chain.to_string()));
        }
        self.set_frozen(chain, false, format!("operator:{operator}"));
        Ok(())
    }

    /// Installs support for an approved upgrade on one node.
    pub fn install_upgrade(&mut self, node: &str, version: u32) -> Result<(), NetworkError> {
        let i = self.node_index(node)?;
        let upgrade = self.nodes[i].install_upgrade(version)?;
        let n = &self.nodes[i];
        let pairs = vec![
            ("chain", n.chain_id.clone()),
            ("node", node.to_string()),
            ("version", version.to_string()),
            ("compatibility", upgrade.compatibility.name().to_string()),
            ("activation_height", upgrade.activation_height.to_string()),
        ];
        self.log("upgrade.installed", pairs);
        Ok(())
    }

    /// Exports `source_node`'s finalized state and starts `target_chain`
    /// from it with the given nodes.
    pub fn migrate(
        &mut self,
        source_node: &str,
        target_chain: &str,
        nodes: Vec<(String, KeyPair)>,
    ) -> Result<MigrationRecord, NetworkError> {
        let i = self.node_index(source_node)?;
        let source_chain = self.nodes[i].chain_id.clone();
        if self.frozen.contains(&source_chain) {
            self.log(
                "migration.refused",
                vec![
                    ("source_chain", source_chain.clone()),
                    ("target_chain", target_chain.to_string()),
                    ("reason", "source frozen".to_string()),
                ],
            );
            return Err(NetworkError::Frozen(source_chain));
        }
        if self.chains.contains_key(target_chain) {
            return Err(NetworkError::DuplicateChain(target_chain.to_string()));
        }
        let n = &self.nodes[i];
        let blocks = n.chain_to(&n.finalized());
        let snapshot = export_snapshot(n.finalized_state(), &blocks);
        let bytes = snapshot.to_bytes();
        let (state, genesis) = import_snapshot_bytes(&bytes, target_chain)?;
        let record = MigrationRecord {
            source_chain: source_chain.clone(),
            target_chain: target_chain.to_string(),
            taken_at_height: snapshot.taken_at_height,
            state_hash: snapshot.state_hash,
            snapshot_bytes: bytes.len(),
        };
        self.add_chain(state, &genesis, nodes)?;
        self.log(
            "migration.completed",
            vec![
                ("source_chain", source_chain),
                ("target_chain", target_chain.to_string()),
                ("taken_at_height", record.taken_at_height.to_string()),
                ("state_hash", record.state_hash.to_string()),
                ("snapshot_bytes", record.snapshot_bytes.to_string()),
            ],
        );
        Ok(record)
    }

    /// Records a log extraction on the network log and returns the matches.
    pub fn extract_logs(
        &mut self,
        node: &str,
        topic: Option<&str>,
        range: Option<(Height, Height)>,
    ) -> Result<Vec<EventRecord>, NetworkError> {
        let n = self.node(node)?;
        let logs = n.tip_state().extract_logs(topic, range)?;
        let chain = n.chain_id.clone();
        self.log(
            "logs.extracted",
            vec![
                ("chain", chain),
                ("node", node.to_string()),
                ("topic", topic.unwrap_or("*").to_string()),
                (
                    "range",
                    range.map_or("all".to_string(), |(a, b)| format!("{a}..={b}")),
                ),
                ("matches", logs.len().to_string()),
            ],
        );
        Ok(logs)
    }
}
