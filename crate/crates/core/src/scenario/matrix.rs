use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::report::{LogEntry, RunReport};
use crate::policy::Pattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    #[serde(rename = "active")]
    Active,
    /// Configured on a chain but switched off.
    #[serde(rename = "present-but-disabled")]
    Disabled,
    #[serde(rename = "N/A")]
    Inactive,
}

impl CellState {
    pub fn label(self) -> &'static str {
        match self {
            CellState::Active => "active",
            CellState::Disabled => "present-but-disabled",
            CellState::Inactive => "N/A",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub state: CellState,
    /// How the run realized the pattern, read off the evidence.
    pub mechanism: String,
    /// Log entries supporting the state.
    pub evidence: usize,
}

impl Cell {
    fn inactive() -> Cell {
        Cell {
            state: CellState::Inactive,
            mechanism: String::new(),
            evidence: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub pattern: Pattern,
    /// Cells by profile name.
    pub cells: BTreeMap<String, Cell>,
}

/// Pattern usage per profile. `rows` are the fourteen comparison rows,
/// `extended` the remaining six patterns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformanceMatrix {
    pub profiles: Vec<String>,
    pub rows: Vec<MatrixRow>,
    pub extended: Vec<MatrixRow>,
}

impl ConformanceMatrix {
    pub fn cell(&self, pattern: Pattern, profile: &str) -> Option<&Cell> {
        self.rows
            .iter()
            .chain(&self.extended)
            .find(|r| r.pattern == pattern)
            .and_then(|r| r.cells.get(profile))
    }

    /// Joins single-profile matrices column by column. A later column with
    /// an already used profile name replaces the earlier one.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a ConformanceMatrix>) -> ConformanceMatrix {
        let mut out = empty();
        for m in parts {
            for p in &m.profiles {
                if !out.profiles.contains(p) {
                    out.profiles.push(p.clone());
                }
            }
            for (dst, src) in out
                .rows
                .iter_mut()
                .chain(out.extended.iter_mut())
                .zip(m.rows.iter().chain(&m.extended))
            {
                debug_assert_eq!(dst.pattern, src.pattern);
                dst.cells.extend(src.cells.clone());
            }
        }
        out
    }

    /// Aligned plain-text table: one line per pattern, one column per
    /// profile, then the mechanism of every active cell.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let section = |out: &mut String, title: &str, rows: &[MatrixRow]| {
            let name_w = rows.iter().map(|r| r.pattern.name().len()).max().unwrap_or(0).max(title.len());
            let widths: Vec<usize> = self
                .profiles
                .iter()
                .map(|p| {
                    rows.iter()
                        .filter_map(|r| r.cells.get(p))
                        .map(|c| c.state.label().len())
                        .max()
                        .unwrap_or(0)
                        .max(p.len())
                })
                .collect();
            let mut line = format!("{title:<name_w$}");
            for (p, w) in self.profiles.iter().zip(&widths) {
                let _ = write!(line, "  {p:<w$}");
            }
            out.push_str(line.trim_end());
            out.push('\n');
            let mut rule = "-".repeat(name_w);
            for w in &widths {
                rule.push_str("  ");
                rule.push_str(&"-".repeat(*w));
            }
            out.push_str(&rule);
            out.push('\n');
            for r in rows {
                let mut line = format!("{:<name_w$}", r.pattern.name());
                for (p, w) in self.profiles.iter().zip(&widths) {
                    let label = r.cells.get(p).map_or("-", |c| c.state.label());
                    let _ = write!(line, "  {label:<w$}");
                }
                out.push_str(line.trim_end());
                out.push('\n');
            }
        };
        section(&mut out, "pattern", &self.rows);
        out.push('\n');
        section(&mut out, "extended", &self.extended);
        out.push('\n');
        out.push_str("mechanisms\n");
        for r in self.rows.iter().chain(&self.extended) {
            for p in &self.profiles {
                if let Some(c) = r.cells.get(p).filter(|c| c.state != CellState::Inactive) {
                    let _ = writeln!(out, "  {} [{p}]: {} ({} events)", r.pattern.name(), c.mechanism, c.evidence);
                }
            }
        }
        out
    }
}

fn extended_patterns() -> Vec<Pattern> {
    Pattern::ALL
        .into_iter()
        .filter(|p| !Pattern::COMPARISON_ROWS.contains(p))
        .collect()
}

fn empty() -> ConformanceMatrix {
    let row = |pattern| MatrixRow {
        pattern,
        cells: BTreeMap::new(),
    };
    ConformanceMatrix {
        profiles: Vec::new(),
        rows: Pattern::COMPARISON_ROWS.into_iter().map(row).collect(),
        extended: extended_patterns().into_iter().map(row).collect(),
    }
}

fn topic<'a>(log: &'a [LogEntry], t: &'a str) -> impl Iterator<Item = &'a LogEntry> + 'a {
    log.iter().filter(move |e| e.topic == t)
}

fn distinct<'a>(entries: impl Iterator<Item = &'a LogEntry>, key: &str) -> Vec<String> {
    let set: BTreeSet<String> = entries.filter_map(|e| e.get(key).map(str::to_string)).collect();
    set.into_iter().collect()
}

fn active(evidence: usize, mechanism: String) -> Cell {
    if evidence == 0 {
        Cell::inactive()
    } else {
        Cell {
            state: CellState::Active,
            mechanism,
            evidence,
        }
    }
}

/// Events of chains whose genesis lists `pattern`.
fn genesis_with(log: &[LogEntry], pattern: Pattern) -> Vec<&LogEntry> {
    topic(log, "chain.genesis")
        .filter(|e| e.get("patterns").is_some_and(|ps| ps.split(',').any(|p| p == pattern.name())))
        .collect()
}

fn evidence(report: &RunReport, pattern: Pattern) -> Cell {
    let log = &report.log;
    let main = report.chain_id.as_str();
    let on_main = |e: &&LogEntry| e.chain() == Some(main);
    match pattern {
        Pattern::NetworkFreezer => {
            let frozen: Vec<&LogEntry> = topic(log, "network.frozen").collect();
            let trigger = distinct(frozen.iter().copied(), "by")
                .iter()
                .map(|by| if by.starts_with("validator-vote") { "validator-vote freeze" } else { "administrator freeze" })
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect::<Vec<_>>()
                .join(", ");
            let recovery = distinct(topic(log, "network.unfrozen"), "by")
                .iter()
                .map(|by| match by.split(':').next() {
                    Some("operator") => "operator recovery",
                    Some("validator-vote") => "validator-vote recovery",
                    _ => "administrator recovery",
                })
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect::<Vec<_>>()
                .join(", ");
            let mech = if recovery.is_empty() { trigger } else { format!("{trigger}; {recovery}") };
            active(frozen.len(), mech)
        }
        Pattern::ShardedChain => {
            let inc: Vec<&LogEntry> = topic(log, "shard.header-included").collect();
            let shards = distinct(inc.iter().copied(), "shard").len();
            let relays = inc.iter().filter_map(|e| e.chain()).collect::<BTreeSet<_>>().len();
            active(inc.len(), format!("{relays} relay chain, {shards} shards, headers included in relay blocks"))
        }
        Pattern::IncentiveDistributor => {
            let rewards = topic(log, "reward.minted").count();
            let fees = topic(log, "fee.distributed").count();
            if rewards + fees > 0 {
                let amounts = distinct(topic(log, "reward.minted"), "amount").join("/");
                let mut mech = Vec::new();
                if rewards > 0 {
                    mech.push(format!("block reward {amounts}"));
                }
                if fees > 0 {
                    mech.push("fee split".to_string());
                }
                return active(rewards + fees, mech.join(" + "));
            }
            let carrying: BTreeSet<&str> = genesis_with(log, pattern).iter().filter_map(|e| e.chain()).collect();
            let off = topic(log, "incentive.configured")
                .filter(|e| e.get("enabled") == Some("false"))
                .filter(|e| e.chain().is_some_and(|c| carrying.contains(c)))
                .count();
            if off > 0 {
                Cell {
                    state: CellState::Disabled,
                    mechanism: "distributor configured, incentives off by default".to_string(),
                    evidence: off,
                }
            } else {
                Cell::inactive()
            }
        }
        Pattern::ProtocolUpgrade => {
            let enacted: Vec<&LogEntry> = topic(log, "upgrade.enacted").filter(on_main).collect();
            let compat = distinct(enacted.iter().copied(), "compatibility").join("/");
            let installs = topic(log, "upgrade.installed").filter(on_main).count();
            let nodes = report.main_chain().nodes.len();
            let coordination = if installs >= nodes { "coordinated " } else { "" };
            active(enacted.len(), format!("{coordination}{compat} at activation height ({installs}/{nodes} nodes installed)"))
        }
        Pattern::DataMigrator => {
            let m: Vec<&LogEntry> = topic(log, "migration.completed").collect();
            let targets = distinct(m.iter().copied(), "target_chain").join(",");
            active(m.len(), format!("snapshot export/import to {targets}"))
        }
        Pattern::ParticipationPermission => {
            let invites = topic(log, "invite.issued").count();
            let joins = topic(log, "member.joined").filter(|e| e.get("via") == Some("invite")).count();
            active(invites + joins, "invite code + identity registration".to_string())
        }
        Pattern::AccountabilityTracer => {
            let t: Vec<&LogEntry> = topic(log, "accountability.traced").collect();
            let kinds = t
                .iter()
                .map(|e| if e.get("identity").is_some_and(|i| i != "withheld") { "real-world identity" } else { "address only" })
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect::<Vec<_>>()
                .join(", ");
            active(t.len(), format!("signature trace to {kinds}"))
        }
        Pattern::BenevolentDictator => {
            let acts: Vec<&LogEntry> = log
                .iter()
                .filter(|e| e.topic == "proposal.fast-tracked" || e.topic == "proposal.cancelled")
                .collect();
            let roles = distinct(acts.iter().copied(), "by_role").join(",");
            let kinds = acts
                .iter()
                .map(|e| e.topic.trim_start_matches("proposal."))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect::<Vec<_>>()
                .join("/");
            active(acts.len(), format!("{roles} {kinds}"))
        }
        Pattern::TransactionFilter => {
            let hits: Vec<&LogEntry> = log
                .iter()
                .filter(|e| e.topic == "tx.rejected" || e.topic == "tx.evicted")
                .filter(|e| e.get("reason").is_some_and(|r| r.starts_with("filter.")))
                .collect();
            let rules = distinct(hits.iter().copied(), "reason")
                .iter()
                .map(|r| r.trim_start_matches("filter.").to_string())
                .collect::<Vec<_>>()
                .join(",");
            active(hits.len(), format!("rules {rules}"))
        }
        Pattern::ValidatorSelection => {
            let produced = topic(log, "block.produced").filter(on_main).count();
            let sel = distinct(topic(log, "chain.genesis").filter(on_main), "selection").join(",");
            active(produced, sel)
        }
        Pattern::BlockFinalityDecider => {
            let fin: Vec<&LogEntry> = topic(log, "finality.summary")
                .filter(on_main)
                .filter(|e| e.get("finalized_height").is_some_and(|h| h != "0"))
                .collect();
            let policy = distinct(fin.iter().copied(), "policy").join(",");
            active(fin.len(), policy)
        }
        Pattern::LogExtractor => {
            let n = topic(log, "logs.extracted").count();
            active(n, "topic and height-range extraction".to_string())
        }
        Pattern::ContractFreezer => {
            let f: Vec<&LogEntry> = topic(log, "contract.frozen").collect();
            let targets = distinct(f.iter().copied(), "target").join(",");
            active(f.len(), format!("freeze flag on {targets}"))
        }
        Pattern::SocialContract => {
            let n = topic(log, "social-contract.set").count();
            active(n, "maintainer registry".to_string())
        }
        Pattern::ScamList => {
            let n = topic(log, "scam-list.added").count();
            active(n, "scam-list registry".to_string())
        }
        Pattern::TokenLocker => {
            let locks: Vec<&LogEntry> = topic(log, "lock.created").collect();
            let purposes = distinct(locks.iter().copied(), "purpose").join(",");
            active(locks.len(), format!("time locks for {purposes}"))
        }
        Pattern::Carbonvote => {
            let n = topic(log, "vote.cast").filter(|e| e.get("scheme") == Some("carbonvote")).count();
            let weighting = distinct(
                topic(log, "proposal.open").filter(|e| e.get("scheme") == Some("carbonvote")),
                "weighting",
            )
            .join(",");
            active(n, format!("token-weighted tally, weighting {weighting}"))
        }
        Pattern::QuadraticVoting => {
            let n = topic(log, "vote.cast").filter(|e| e.get("scheme") == Some("quadratic")).count();
            active(n, "n votes cost n^2 tokens".to_string())
        }
        Pattern::CrossChainTokenVoting => {
            let imports: Vec<&LogEntry> = topic(log, "cross-chain.imported").collect();
            let aux = distinct(imports.iter().copied(), "aux_chain").join(",");
            active(imports.len(), format!("signed tally imported from {aux}"))
        }
        Pattern::LiquidDemocracy => {
            let n = topic(log, "vote.delegated").count();
            active(n, "revocable transitive delegation".to_string())
        }
    }
}

/// The single-profile matrix of a run, named after the scenario. Cells are
/// computed from the log alone.
pub fn conformance_matrix(report: &RunReport) -> ConformanceMatrix {
    let mut m = empty();
    m.profiles.push(report.name.clone());
    for row in m.rows.iter_mut().chain(m.extended.iter_mut()) {
        row.cells.insert(report.name.clone(), evidence(report, row.pattern));
    }
    m
}
