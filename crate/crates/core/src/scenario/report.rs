use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::matrix::ConformanceMatrix;
use crate::state::{Amount, Height};

/// What became of one scripted action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub tick: u64,
    pub actor: String,
    pub action: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeReport {
    pub tip: String,
    pub tip_height: Height,
    pub finalized: String,
    pub finalized_height: Height,
    /// Hash of the node's canonical tip state.
    pub state_hash: String,
    pub rule_version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalReport {
    pub id: u64,
    pub description: String,
    pub payload: String,
    pub scheme: String,
    pub threshold: String,
    pub status: String,
    pub deadline: Height,
    pub aborted: bool,
    pub yes: Option<String>,
    pub no: Option<String>,
    pub turnout: Option<String>,
}

/// Token accounting of one replica. Balances already include locked
/// tokens, so `reconciles` compares them with the ledger directly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplyReport {
    pub genesis: Amount,
    pub minted: Amount,
    pub slashed: Amount,
    pub burned: Amount,
    pub expected_total: Amount,
    pub balances: Amount,
    pub active_locks: Amount,
    pub reconciles: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub mode: String,
    pub protocol_version: u32,
    pub frozen: bool,
    pub nodes: BTreeMap<String, NodeReport>,
    pub distinct_tips: usize,
    /// Lowest finalized height over the chain's nodes.
    pub finalized_height: Height,
    pub proposals: Vec<ProposalReport>,
    /// Accounting of every node, keyed by node name.
    pub supply: BTreeMap<String, SupplyReport>,
}

/// One entry of the combined log: chain events carry a height, network
/// events a tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    /// `network`, or `chain:<id>`.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<Height>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx: Option<String>,
    pub topic: String,
    pub fields: BTreeMap<String, String>,
}

impl LogEntry {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    /// The chain the entry concerns, if any.
    pub fn chain(&self) -> Option<&str> {
        self.source.strip_prefix("chain:").or_else(|| self.get("chain"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub spec_version: u32,
    pub name: String,
    pub chain_id: String,
    pub seed: u64,
    /// Hash of the canonical config document the report was produced from.
    pub config_hash: String,
    /// Last simulated tick, settling included.
    pub final_tick: u64,
    pub actions: Vec<ActionOutcome>,
    pub chains: BTreeMap<String, ChainReport>,
    pub matrix: ConformanceMatrix,
    pub log: Vec<LogEntry>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<RunReport, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn main_chain(&self) -> &ChainReport {
        &self.chains[&self.chain_id]
    }

    /// Log entries matching a topic and an inclusive height range. Network
    /// entries carry no height and only pass when no range is given.
    pub fn logs(&self, topic: Option<&str>, range: Option<(Height, Height)>) -> Vec<&LogEntry> {
        self.log
            .iter()
            .filter(|e| topic.is_none_or(|t| e.topic == t))
            .filter(|e| match range {
                None => true,
                Some((a, b)) => e.height.is_some_and(|h| (a..=b).contains(&h)),
            })
            .collect()
    }

    /// Every node must end with its accounting reconciled.
    pub fn supply_reconciles(&self) -> bool {
        self.chains
            .values()
            .all(|c| c.supply.values().all(|s| s.reconciles))
    }
}
