//! Acceptance run: one PASS/FAIL line per criterion. Tolerances and time
//! budgets are fixed below; the process exits nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use govsim_core::consensus::{
    select_validator, ConsensusPolicy, FinalityPolicy, IncentivePolicy, ValidatorSelectionPolicy,
};
use govsim_core::governance::{
    cast_vote, delegate, on_begin_block, submit_proposal, Choice, Compatibility, ParameterChange,
    ProposalPayload, ProtocolUpgrade, ThresholdPolicy, VotingScheme,
};
use govsim_core::network::{NetworkConfig, PartitionWindow};
use govsim_core::primitives::{hash, merkle_root, merkle_verify, Address, KeyPair, MerkleTree};
use govsim_core::scenario::{
    preset, run_scenario, Action, ActorConfig, CellState, ConsensusSection, IncentiveSection,
    PatternParams, RunReport, ScenarioConfig, ScenarioRun, ScriptedAction, SchemeSpec, SelectionKind,
    SPEC_VERSION,
};
use govsim_core::state::{export_snapshot, import_snapshot, import_snapshot_bytes, LockPurpose};
use govsim_core::{ChainState, Decentralisation, Fraction, GenesisAccount, GenesisConfig, GovernancePolicy, Pattern, Role};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- chains

fn addr(name: &str) -> Address {
    KeyPair::from_name(name).address()
}

fn consensus(selection: ValidatorSelectionPolicy) -> ConsensusPolicy {
    ConsensusPolicy {
        selection,
        finality: FinalityPolicy::KDeep { k: 1 },
        incentive: IncentivePolicy::disabled(),
        seed: 5,
    }
}

fn open_chain(patterns: &[Pattern], accounts: &[(String, u64)]) -> ChainState {
    let policy = GovernancePolicy::new(
        Decentralisation::Permissionless,
        consensus(ValidatorSelectionPolicy::ProofOfStake),
    )
    .with_patterns(patterns.iter().copied());
    let mut cfg = GenesisConfig::new("acceptance", policy);
    for (name, balance) in accounts {
        cfg = cfg.account(GenesisAccount::new(KeyPair::from_name(name).public_key(), *balance));
    }
    cfg.build().expect("genesis").0
}

fn param_payload() -> ProposalPayload {
    ProposalPayload::ParameterChange {
        change: ParameterChange::FastTrackWindow { value: 3 },
    }
}

fn close(state: &mut ChainState, id: u64) -> (u128, u128) {
    state.height = state.governance.proposals[&id].deadline;
    on_begin_block(state);
    let t = state.governance.proposals[&id].tally.expect("tallied");
    (t.yes, t.no)
}

// ---------------------------------------------------------------- 1

fn quadratic_cost() -> Outcome {
    for n in 1..=100u64 {
        // Odd-number sum: an independent route to n^2.
        let expected: u64 = (1..=n).map(|k| 2 * k - 1).sum();
        let start = 20_000;
        let mut s = open_chain(
            &[Pattern::QuadraticVoting],
            &[("voter".into(), start), ("pool".into(), 0)],
        );
        let scheme = VotingScheme::Quadratic { cost_account: addr("pool") };
        let id = submit_proposal(&mut s, addr("voter"), "q", param_payload(), scheme, ThresholdPolicy::simple_majority(), 5)
            .map_err(|e| e.to_string())?;
        cast_vote(&mut s, addr("voter"), id, Choice::Yes, n).map_err(|e| e.to_string())?;
        let paid = start - s.balance(&addr("voter"));
        ensure(paid == expected && s.balance(&addr("pool")) == expected, || {
            format!("n={n}: paid {paid}, expected {expected}")
        })?;
        let (yes, _) = close(&mut s, id);
        ensure(yes == n as u128, || format!("n={n}: tally counted {yes} votes"))?;
        ensure(s.total_balances() == start, || format!("n={n}: supply changed"))?;
    }
    Ok("n in 1..=100 each cost n^2 exactly".into())
}

// ---------------------------------------------------------------- 2

fn carbonvote_sybil() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scheme = VotingScheme::Carbonvote { lock_weighting: None };
    let tally_with = |accounts: &[(String, u64)], votes: &[(String, Choice)]| -> Result<(u128, u128), String> {
        let mut s = open_chain(&[Pattern::Carbonvote], accounts);
        let id = submit_proposal(&mut s, addr("chair"), "c", param_payload(), scheme.clone(), ThresholdPolicy::simple_majority(), 5)
            .map_err(|e| e.to_string())?;
        for (who, choice) in votes {
            cast_vote(&mut s, addr(who), id, *choice, 0).map_err(|e| e.to_string())?;
        }
        Ok(close(&mut s, id))
    };
    for trial in 0..200 {
        let whale: u64 = rng.gen_range(100..10_000);
        let rival: u64 = rng.gen_range(100..10_000);
        let whale_choice = if rng.gen_bool(0.5) { Choice::Yes } else { Choice::No };
        let rival_choice = if whale_choice == Choice::Yes { Choice::No } else { Choice::Yes };
        let base_accounts = vec![
            ("chair".to_string(), 1),
            ("whale".to_string(), whale),
            ("rival".to_string(), rival),
        ];
        let base = tally_with(
            &base_accounts,
            &[("whale".into(), whale_choice), ("rival".into(), rival_choice)],
        )?;
        // Split the whale's balance across k fresh addresses.
        let k = rng.gen_range(2..=20usize).min(whale as usize);
        let mut cuts: Vec<u64> = (0..k - 1).map(|_| rng.gen_range(1..whale)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut parts = Vec::new();
        let mut prev = 0;
        for c in cuts.into_iter().chain([whale]) {
            parts.push(c - prev);
            prev = c;
        }
        let mut accounts = vec![("chair".to_string(), 1), ("rival".to_string(), rival)];
        let mut votes = vec![("rival".to_string(), rival_choice)];
        for (i, p) in parts.iter().enumerate() {
            let name = format!("sybil-{trial}-{i}");
            accounts.push((name.clone(), *p));
            votes.push((name, whale_choice));
        }
        let split = tally_with(&accounts, &votes)?;
        ensure(split == base, || {
            format!("trial {trial}: {} parts gave {split:?}, unsplit {base:?}", parts.len())
        })?;
    }
    Ok("200 random splits, tally pair unchanged".into())
}

// ---------------------------------------------------------------- 3

/// Follows delegations one hop at a time for at most `n` hops.
fn brute_force_liquid(
    voters: &[(String, u64)],
    ballots: &BTreeMap<String, Choice>,
    delegations: &BTreeMap<String, String>,
) -> (u128, u128) {
    let (mut yes, mut no) = (0u128, 0u128);
    for (v, weight) in voters {
        let mut cur = v.clone();
        for _ in 0..=voters.len() {
            if let Some(c) = ballots.get(&cur) {
                match c {
                    Choice::Yes => yes += *weight as u128,
                    Choice::No => no += *weight as u128,
                }
                break;
            }
            match delegations.get(&cur) {
                Some(next) => cur = next.clone(),
                None => break,
            }
        }
    }
    (yes, no)
}

fn liquid_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cyclic = 0;
    for graph in 0..500 {
        let n = rng.gen_range(1..=50usize);
        let voters: Vec<(String, u64)> = (0..n).map(|i| (format!("v{i}"), rng.gen_range(1..1_000))).collect();
        let mut accounts = voters.clone();
        accounts.push(("chair".into(), 1));
        let mut s = open_chain(&[Pattern::LiquidDemocracy], &accounts);
        let id = submit_proposal(&mut s, addr("chair"), "l", param_payload(), VotingScheme::LiquidDemocracy, ThresholdPolicy::simple_majority(), 5)
            .map_err(|e| e.to_string())?;
        let mut ballots = BTreeMap::new();
        let mut delegations = BTreeMap::new();
        for (i, (v, _)) in voters.iter().enumerate() {
            match rng.gen_range(0..10) {
                0..=2 => {
                    let c = if rng.gen_bool(0.5) { Choice::Yes } else { Choice::No };
                    cast_vote(&mut s, addr(v), id, c, 0).map_err(|e| e.to_string())?;
                    ballots.insert(v.clone(), c);
                }
                3..=8 if n > 1 => {
                    let mut j = rng.gen_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    let to = &voters[j].0;
                    delegate(&mut s, addr(v), id, addr(to)).map_err(|e| e.to_string())?;
                    delegations.insert(v.clone(), to.clone());
                }
                _ => {}
            }
        }
        if has_cycle(&delegations) {
            cyclic += 1;
        }
        let kernel = close(&mut s, id);
        let oracle = brute_force_liquid(&voters, &ballots, &delegations);
        ensure(kernel == oracle, || format!("graph {graph} ({n} voters): kernel {kernel:?}, oracle {oracle:?}"))?;
    }
    ensure(cyclic > 0, || "no generated graph had a cycle".into())?;
    Ok(format!("500 graphs agree with the oracle ({cyclic} with cycles)"))
}

fn has_cycle(delegations: &BTreeMap<String, String>) -> bool {
    delegations.keys().any(|start| {
        let mut seen = BTreeSet::new();
        let mut cur = start;
        while let Some(next) = delegations.get(cur) {
            if !seen.insert(cur) {
                return true;
            }
            cur = next;
        }
        false
    })
}

// ---------------------------------------------------------------- 4

fn pos_fairness() -> Outcome {
    const ROUNDS: u64 = 10_000;
    const TOLERANCE: f64 = 0.02;
    let policy = GovernancePolicy::new(
        Decentralisation::Permissionless,
        consensus(ValidatorSelectionPolicy::ProofOfStake),
    )
    .with_patterns([Pattern::TokenLocker]);
    let mut cfg = GenesisConfig::new("pos", policy);
    for (name, stake) in [("big", 75), ("small", 25)] {
        cfg = cfg.account(
            GenesisAccount::new(KeyPair::from_name(name).public_key(), stake)
                .with_lock(stake, 1_000_000, LockPurpose::ValidatorCandidacy),
        );
    }
    let state = cfg.build().map_err(|e| e.to_string())?.0;
    let mut big = 0u64;
    for round in 1..=ROUNDS {
        if select_validator(&state, round).map_err(|e| e.to_string())? == addr("big") {
            big += 1;
        }
    }
    let share = big as f64 / ROUNDS as f64;
    ensure((share - 0.75).abs() <= TOLERANCE, || format!("stake-75 share {share:.4}"))?;
    Ok(format!("stake-75 share {share:.4}, stake-25 share {:.4} (tolerance +-{TOLERANCE})", 1.0 - share))
}

// ---------------------------------------------------------------- scenario helpers

fn at(tick: u64, actor: &str, action: Action) -> ScriptedAction {
    ScriptedAction {
        tick,
        actor: actor.into(),
        action,
    }
}

fn transfer(to: &str, amount: u64, fee: u64) -> Action {
    Action::Transfer {
        to: to.into(),
        amount,
        memo: String::new(),
        fee,
        route: false,
        chain: None,
    }
}

fn base_config(name: &str, seed: u64, validators: usize, mode: Decentralisation, selection: SelectionKind, finality: FinalityPolicy) -> ScenarioConfig {
    let names: Vec<String> = (0..validators).map(|i| format!("val{i}")).collect();
    let mut actors: Vec<ActorConfig> = names
        .iter()
        .enumerate()
        .map(|(i, v)| ActorConfig {
            stake: if selection == SelectionKind::ProofOfStake { 100 } else { 0 },
            roles: if i == 0 && mode == Decentralisation::Permissioned {
                vec![Role::Administrator]
            } else {
                Vec::new()
            },
            ..ActorConfig::new(v, 1_000)
        })
        .collect();
    for u in ["ann", "ben", "cat"] {
        actors.push(ActorConfig::new(u, 500));
    }
    let mut patterns = Vec::new();
    if selection == SelectionKind::ProofOfStake {
        patterns.push(Pattern::TokenLocker);
    }
    ScenarioConfig {
        spec_version: SPEC_VERSION,
        name: name.into(),
        chain_id: "main".into(),
        seed,
        ticks: 60,
        mode,
        consensus: ConsensusSection {
            selection,
            finality,
            incentive: IncentiveSection::default(),
        },
        patterns,
        params: PatternParams::default(),
        actors,
        validators: names,
        network: NetworkConfig::default(),
        shards: None,
        aux_chain: None,
        actions: Vec::new(),
    }
}

/// Independent supply check: Σ balances (locks included) on every node
/// equals the declared genesis balances plus minted minus slashed and burned,
/// and no account locks more than it holds.
fn conservation(report: &RunReport, config: &ScenarioConfig) -> Result<(), String> {
    let genesis: u64 = config.actors.iter().map(|a| a.balance).sum();
    let main = report.main_chain();
    for (node, s) in &main.supply {
        ensure(s.genesis == genesis, || format!("{node}: ledger genesis {} vs declared {genesis}", s.genesis))?;
        let expected = genesis + s.minted - s.slashed - s.burned;
        ensure(s.balances == expected, || format!("{node}: balances {} vs expected {expected}", s.balances))?;
        ensure(s.active_locks <= s.balances, || format!("{node}: locks exceed balances"))?;
    }
    ensure(report.supply_reconciles(), || "report flags a non-reconciling node".into())
}

fn conservation_in_state(state: &ChainState, genesis: u64) -> Result<(), String> {
    let total: u64 = state.accounts.values().map(|a| a.balance).sum();
    let l = &state.supply;
    ensure(total == genesis + l.minted - l.slashed - l.burned, || {
        format!("state total {total} vs ledger {}", genesis + l.minted - l.slashed - l.burned)
    })?;
    for a in state.accounts.values() {
        let locked: u64 = a.locks.iter().filter(|k| k.is_active(state.height)).map(|k| k.amount).sum();
        ensure(locked <= a.balance, || format!("{} locks {locked} of {}", a.address, a.balance))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- 5

fn random_safety_config(rng: &mut ChaCha8Rng, i: u64) -> ScenarioConfig {
    let finality = match i % 4 {
        0 => FinalityPolicy::KDeep { k: 1 },
        1 => FinalityPolicy::KDeep { k: 6 },
        2 => FinalityPolicy::Immediate,
        _ => FinalityPolicy::SupermajorityVote { quorum: Fraction::TWO_THIRDS },
    };
    let (mode, selection) = match rng.gen_range(0..3) {
        0 => (Decentralisation::Permissionless, SelectionKind::ProofOfStake),
        1 => (Decentralisation::Permissioned, SelectionKind::ProofOfAuthority),
        _ => (Decentralisation::Permissionless, SelectionKind::RoundRobin),
    };
    let n = rng.gen_range(3..=6);
    let mut c = base_config(&format!("safety-{i}"), rng.gen(), n, mode, selection, finality.clone());
    c.ticks = rng.gen_range(40..=80);
    // Delivery within one slot keeps honest producers on one chain.
    c.network.delay = rng.gen_range(1..=2);
    c.network.jitter = rng.gen_range(0..=(c.network.slot_ticks - c.network.delay));
    if mode == Decentralisation::Permissionless && rng.gen_bool(0.5) {
        c.patterns.push(Pattern::IncentiveDistributor);
        c.consensus.incentive = IncentiveSection {
            enabled: true,
            block_reward: rng.gen_range(1..=5),
            validator_fee_share: Fraction::new(1, 2).expect("valid"),
            treasury: None,
        };
    }
    if matches!(finality, FinalityPolicy::SupermajorityVote { .. }) && n >= 4 {
        // One validator, under a third of the weight, is cut off for a while.
        let from = rng.gen_range(4..20);
        c.network.partitions.push(PartitionWindow {
            from,
            until: from + rng.gen_range(4..16),
            groups: vec![vec![c.validators[rng.gen_range(0..n)].clone()]],
        });
    }
    let users = ["ann", "ben", "cat"];
    let mut tick = 1;
    while tick < c.ticks {
        let from = *users.choose(rng).expect("nonempty");
        let to = *users.choose(rng).expect("nonempty");
        let fee = if c.consensus.incentive.enabled { rng.gen_range(0..3) } else { 0 };
        c.actions.push(at(tick, from, transfer(to, rng.gen_range(1..40), fee)));
        tick += rng.gen_range(1..6);
    }
    c
}

fn check_no_reversion(run: &ScenarioRun, seen: &mut BTreeMap<String, Vec<(u64, govsim_core::Digest)>>) -> Result<(), String> {
    for node in run.network().nodes() {
        let records = seen.entry(node.name.clone()).or_default();
        for r in &node.finality_log {
            if !records.iter().any(|(h, x)| *h == r.height && *x == r.hash) {
                records.push((r.height, r.hash));
            }
        }
        for (h, hash) in records.iter() {
            let on_chain = node.tree().ancestor_at(&node.tip(), *h);
            ensure(on_chain == Some(*hash), || {
                format!("{} replaced finalized block at height {h} (tick {})", node.name, run.network().tick())
            })?;
        }
    }
    Ok(())
}

fn finality_safety() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut finalized_total = 0;
    let mut by_policy: BTreeMap<&'static str, usize> = BTreeMap::new();
    for i in 0..100 {
        let config = random_safety_config(&mut rng, i);
        let mut run = ScenarioRun::new(&config).map_err(|e| format!("scenario {i}: {e}"))?;
        let mut seen = BTreeMap::new();
        while !run.is_done() {
            run.step();
            check_no_reversion(&run, &mut seen).map_err(|e| format!("scenario {i}: {e}"))?;
        }
        let report = run.finish();
        conservation(&report, &config).map_err(|e| format!("scenario {i}: {e}"))?;
        let main = report.main_chain();
        ensure(main.distinct_tips == 1, || format!("scenario {i}: {} tips after settling", main.distinct_tips))?;
        ensure(main.finalized_height > 0, || format!("scenario {i}: nothing finalized"))?;
        finalized_total += main.finalized_height;
        *by_policy.entry(config.consensus.finality.name()).or_default() += 1;
    }
    Ok(format!("100 scenarios {by_policy:?}, 0 reversions, {finalized_total} finalized heights checked"))
}

// ---------------------------------------------------------------- 6

fn fork_config(compatibility: Compatibility) -> ScenarioConfig {
    let mut c = base_config(
        "fork",
        6,
        5,
        Decentralisation::Permissioned,
        SelectionKind::ProofOfAuthority,
        FinalityPolicy::KDeep { k: 1 },
    );
    c.patterns.push(Pattern::ProtocolUpgrade);
    c.ticks = 70;
    c.actions.push(at(
        2,
        "val0",
        Action::SubmitProposal {
            description: "v2".into(),
            payload: ProposalPayload::Upgrade {
                upgrade: ProtocolUpgrade {
                    new_version: 2,
                    compatibility,
                    activation_height: 20,
                },
            },
            scheme: SchemeSpec::OneAddressOneVote,
            threshold: ThresholdPolicy::simple_majority(),
            duration: 8,
        },
    ));
    for v in ["val0", "val1", "val2", "val3", "val4", "ann", "ben", "cat"] {
        c.actions.push(at(
            6,
            v,
            Action::Vote {
                proposal: 0,
                choice: Choice::Yes,
                votes: 0,
                chain: None,
            },
        ));
    }
    c.actions.push(at(
        30,
        "val0",
        Action::InstallUpgrade {
            version: 2,
            nodes: vec!["val0".into(), "val1".into(), "val2".into()],
        },
    ));
    c
}

fn fork_semantics() -> Outcome {
    let hard = fork_config(Compatibility::HardFork);
    let soft = fork_config(Compatibility::SoftFork);
    let h1 = run_scenario(&hard).map_err(|e| e.to_string())?;
    let h2 = run_scenario(&hard).map_err(|e| e.to_string())?;
    let s1 = run_scenario(&soft).map_err(|e| e.to_string())?;
    let s2 = run_scenario(&soft).map_err(|e| e.to_string())?;
    let ht = h1.main_chain().distinct_tips;
    let st = s1.main_chain().distinct_tips;
    ensure(ht == 2, || format!("hard fork ended with {ht} tips"))?;
    ensure(st == 1, || format!("soft fork ended with {st} tips"))?;
    ensure(h1.to_json() == h2.to_json() && s1.to_json() == s2.to_json(), || "replays differ".into())?;
    ensure(!h1.logs(Some("upgrade.enacted"), None).is_empty(), || "upgrade never enacted".into())?;
    conservation(&h1, &hard)?;
    conservation(&s1, &soft)?;
    Ok(format!("hard fork 3/5 upgraded: {ht} tips; soft fork: {st} tip; replays identical"))
}

// ---------------------------------------------------------------- 7

fn freeze_config() -> ScenarioConfig {
    let mut c = base_config(
        "freeze",
        7,
        4,
        Decentralisation::Permissioned,
        SelectionKind::ProofOfAuthority,
        FinalityPolicy::KDeep { k: 2 },
    );
    c.patterns.push(Pattern::NetworkFreezer);
    c.network.jitter = 1;
    c.ticks = 60;
    c.actions = vec![
        at(9, "ann", transfer("ben", 5, 0)),
        at(12, "val0", Action::FreezeNetwork { chain: None }),
        at(14, "ben", transfer("cat", 5, 0)),
        at(24, "val0", Action::UnfreezeNetwork { chain: None }),
        at(30, "val0", Action::FreezeNetwork { chain: None }),
        at(31, "val0", Action::UnfreezeNetwork { chain: None }),
    ];
    c
}

/// Steps `config`, checking every freeze window of every chain.
fn freeze_windows(config: &ScenarioConfig) -> Result<(usize, RunReport), String> {
    let mut run = ScenarioRun::new(config).map_err(|e| e.to_string())?;
    let chains: Vec<String> = run.network().chains().map(str::to_string).collect();
    let snapshot = |run: &ScenarioRun, chain: &str| -> Vec<(String, u64, govsim_core::Digest)> {
        run.network()
            .chain_nodes(chain)
            .expect("chain")
            .iter()
            .map(|n| (n.name.clone(), n.tip_height(), n.tip()))
            .collect()
    };
    let mut before: BTreeMap<String, Vec<(String, u64, govsim_core::Digest)>> =
        chains.iter().map(|c| (c.clone(), snapshot(&run, c))).collect();
    let mut baseline: BTreeMap<String, Vec<(String, u64, govsim_core::Digest)>> = BTreeMap::new();
    let mut resumed: Vec<(String, govsim_core::Digest)> = Vec::new();
    let mut windows = 0;
    while !run.is_done() {
        let delivered = run.network().deliveries().len();
        run.step();
        let net = run.network();
        for chain in &chains {
            let members: BTreeSet<String> = net.chain_nodes(chain).expect("chain").iter().map(|n| n.name.clone()).collect();
            if net.is_frozen(chain) {
                let base = baseline.entry(chain.clone()).or_insert_with(|| {
                    windows += 1;
                    before[chain].clone()
                });
                for ((name, h0, _), (_, h, _)) in base.iter().zip(snapshot(&run, chain)) {
                    ensure(h == *h0, || format!("{name} grew from {h0} to {h} at tick {}", net.tick()))?;
                }
                let leaked = net.deliveries()[delivered..]
                    .iter()
                    .filter(|d| members.contains(&d.to) || members.contains(&d.from))
                    .count();
                ensure(leaked == 0, || format!("{leaked} deliveries on frozen {chain} at tick {}", net.tick()))?;
            } else if let Some(base) = baseline.remove(chain) {
                resumed.extend(base.into_iter().map(|(n, _, tip)| (n, tip)));
            }
            before.insert(chain.clone(), snapshot(&run, chain));
        }
    }
    for (name, tip) in resumed {
        let node = run.network().node(&name).map_err(|e| e.to_string())?;
        ensure(node.tree().is_ancestor(&tip, &node.tip()), || {
            format!("{name} abandoned its pre-freeze tip")
        })?;
    }
    let report = run.finish();
    Ok((windows, report))
}

fn freeze_soundness() -> Outcome {
    let mut total = 0;
    let config = freeze_config();
    let (w, report) = freeze_windows(&config)?;
    conservation(&report, &config)?;
    total += w;
    // The resumed chain must extend the pre-freeze tip on every node.
    let mut run = ScenarioRun::new(&config).map_err(|e| e.to_string())?;
    while run.network().tick() < 12 {
        run.step();
    }
    run.step();
    let pre: Vec<(String, govsim_core::Digest)> = run
        .network()
        .chain_nodes("main")
        .map_err(|e| e.to_string())?
        .iter()
        .map(|n| (n.name.clone(), n.tip()))
        .collect();
    while !run.is_done() {
        run.step();
    }
    for (name, tip) in &pre {
        let node = run.network().node(name).map_err(|e| e.to_string())?;
        ensure(node.tree().is_ancestor(tip, &node.tip()) && node.tip() != *tip, || {
            format!("{name} did not extend its pre-freeze tip")
        })?;
    }
    for name in ["polkadot-like", "quorum-like"] {
        let c = preset(name).map_err(|e| e.to_string())?;
        let (w, r) = freeze_windows(&c)?;
        ensure(w > 0, || format!("{name}: no freeze window"))?;
        ensure(r.supply_reconciles(), || format!("{name}: supply does not reconcile"))?;
        total += w;
    }
    Ok(format!("{total} freeze windows: no tip growth, no deliveries, resumed chains extend the pre-freeze tip"))
}

// ---------------------------------------------------------------- 8

fn snapshot_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut heights = Vec::new();
    for i in 0..100 {
        let selection = if rng.gen_bool(0.5) { SelectionKind::ProofOfStake } else { SelectionKind::RoundRobin };
        let mut c = base_config(&format!("history-{i}"), rng.gen(), 3, Decentralisation::Permissionless, selection, FinalityPolicy::KDeep { k: 1 });
        // At most 50 blocks: one per two-tick slot.
        c.ticks = rng.gen_range(1..=100);
        if !c.patterns.contains(&Pattern::TokenLocker) {
            c.patterns.push(Pattern::TokenLocker);
        }
        if rng.gen_bool(0.5) {
            c.patterns.push(Pattern::IncentiveDistributor);
            c.consensus.incentive = IncentiveSection {
                enabled: true,
                block_reward: rng.gen_range(1..4),
                validator_fee_share: Fraction::ONE,
                treasury: None,
            };
        }
        let users = ["ann", "ben", "cat"];
        for t in (1..c.ticks).step_by(3) {
            let from = *users.choose(&mut rng).expect("nonempty");
            let action = if rng.gen_bool(0.2) {
                Action::Lock {
                    amount: rng.gen_range(1..50),
                    duration: rng.gen_range(1..30),
                    purpose: LockPurpose::VoteWeight,
                    chain: None,
                }
            } else {
                transfer(users.choose(&mut rng).expect("nonempty"), rng.gen_range(1..60), 0)
            };
            c.actions.push(at(t, from, action));
        }
        let report_config = c.clone();
        let mut run = ScenarioRun::new(&c).map_err(|e| format!("history {i}: {e}"))?;
        while !run.is_done() {
            run.step();
        }
        let node = run.network().node("val0").map_err(|e| e.to_string())?;
        let blocks = node.canonical_chain();
        ensure(blocks.len() <= 51, || format!("history {i}: {} blocks", blocks.len()))?;
        let state = node.tip_state();
        let genesis: u64 = report_config.actors.iter().map(|a| a.balance).sum();
        conservation_in_state(state, genesis).map_err(|e| format!("history {i}: {e}"))?;
        let snap = export_snapshot(state, &blocks);
        let bytes = snap.to_bytes();
        let (imported, _) = import_snapshot_bytes(&bytes, "target").map_err(|e| format!("history {i}: {e}"))?;
        ensure(imported.state_hash() == state.state_hash(), || format!("history {i}: state hash changed"))?;
        let (again, _) = import_snapshot(&snap, "target").map_err(|e| e.to_string())?;
        ensure(export_snapshot(&again, &[]).accounts == snap.accounts, || format!("history {i}: accounts differ"))?;
        heights.push(state.height);
        let report = run.finish();
        conservation(&report, &report_config).map_err(|e| format!("history {i}: {e}"))?;
    }
    let max = heights.iter().max().copied().unwrap_or(0);
    Ok(format!("100 histories up to height {max}: imported state hash identical"))
}

// ---------------------------------------------------------------- 9

fn merkle_integrity() -> Outcome {
    let empty = hash(b"").to_string();
    ensure(
        empty == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
        || format!("sha256('') = {empty}"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut proofs = 0;
    for n in 1..=64usize {
        for _ in 0..4 {
            let leaves: Vec<Vec<u8>> = (0..n)
                .map(|_| (0..rng.gen_range(0..40)).map(|_| rng.gen()).collect())
                .collect();
            let tree = MerkleTree::new(&leaves).map_err(|e| e.to_string())?;
            let root = tree.root();
            for (i, leaf) in leaves.iter().enumerate() {
                let proof = tree.proof(i).map_err(|e| e.to_string())?;
                ensure(merkle_verify(&root, leaf, i, &proof), || format!("n={n}: proof {i} fails"))?;
                proofs += 1;
                let mut mutated = leaves.clone();
                if mutated[i].is_empty() || rng.gen_bool(0.3) {
                    mutated[i].push(rng.gen());
                } else {
                    let j = rng.gen_range(0..mutated[i].len());
                    mutated[i][j] ^= 1 << rng.gen_range(0..8);
                }
                let changed = merkle_root(&mutated).map_err(|e| e.to_string())?;
                ensure(changed != root, || format!("n={n}: mutating leaf {i} kept the root"))?;
                ensure(!merkle_verify(&root, &mutated[i], i, &proof), || format!("n={n}: mutated leaf {i} verifies"))?;
            }
        }
    }
    Ok(format!("{proofs} proofs verified, every mutation moved the root, empty-input vector matches"))
}

// ---------------------------------------------------------------- 10

/// Both columns of the published comparison table: true where the cell
/// describes a mechanism, false where it reads N/A.
const TABLE: [(Pattern, bool, bool); 14] = [
    (Pattern::NetworkFreezer, true, true),
    (Pattern::ShardedChain, true, false),
    (Pattern::IncentiveDistributor, true, true),
    (Pattern::ProtocolUpgrade, true, true),
    (Pattern::DataMigrator, true, false),
    (Pattern::ParticipationPermission, false, true),
    (Pattern::AccountabilityTracer, true, true),
    (Pattern::BenevolentDictator, true, true),
    (Pattern::TransactionFilter, true, true),
    (Pattern::ValidatorSelection, true, true),
    (Pattern::BlockFinalityDecider, true, true),
    (Pattern::LogExtractor, false, true),
    (Pattern::TokenLocker, true, false),
    (Pattern::Carbonvote, true, false),
];

fn table_conformance() -> Outcome {
    let reports: Vec<RunReport> = ["polkadot-like", "quorum-like"]
        .iter()
        .map(|n| run_scenario(&preset(n).expect("preset")).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let merged = govsim_core::scenario::ConformanceMatrix::merge(reports.iter().map(|r| &r.matrix));
    ensure(merged.rows.len() == 14, || format!("{} rows", merged.rows.len()))?;
    for (pattern, polkadot, quorum) in TABLE {
        for (profile, want) in [("polkadot-like", polkadot), ("quorum-like", quorum)] {
            let got = merged.cell(pattern, profile).map(|c| c.state).unwrap_or(CellState::Inactive);
            let present = got != CellState::Inactive;
            ensure(present == want, || format!("{pattern} / {profile}: {}", got.label()))?;
        }
    }
    let incentive = merged.cell(Pattern::IncentiveDistributor, "quorum-like").map(|c| c.state);
    ensure(incentive == Some(CellState::Disabled), || "quorum incentives not present-but-disabled".into())?;
    for r in &reports {
        for (id, c) in &r.chains {
            ensure(c.distinct_tips == 1, || format!("{}: chain {id} has {} tips", r.name, c.distinct_tips))?;
        }
        ensure(r.supply_reconciles(), || format!("{}: supply does not reconcile", r.name))?;
    }
    Ok("14 rows x 2 profiles match; quorum incentives present-but-disabled".into())
}

// ---------------------------------------------------------------- 11

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn replay_determinism() -> Outcome {
    let dir = scenarios_dir();
    let mut configs: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    configs.sort();
    ensure(!configs.is_empty(), || "no shipped scenarios".into())?;
    for path in &configs {
        let stem = path.file_stem().expect("stem").to_string_lossy().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let config = ScenarioConfig::from_json(&text).map_err(|e| format!("{stem}: {e}"))?;
        let expected_path = dir.join("reports").join(format!("{stem}.json"));
        let expected = std::fs::read_to_string(&expected_path).map_err(|e| format!("{}: {e}", expected_path.display()))?;
        let actual = run_scenario(&config).map_err(|e| format!("{stem}: {e}"))?.to_json();
        ensure(actual == expected, || format!("{stem}: replay differs from stored report"))?;
    }
    Ok(format!("{} shipped scenarios replay bytewise", configs.len()))
}

// ---------------------------------------------------------------- 12

fn token_conservation() -> Outcome {
    // Criteria 5 to 8 assert conservation on every scenario they run; this
    // line covers the presets and the shipped examples as well.
    let mut checked = 0;
    for name in ["polkadot-like", "quorum-like"] {
        let r = run_scenario(&preset(name).expect("preset")).map_err(|e| e.to_string())?;
        ensure(r.supply_reconciles(), || format!("{name}: supply does not reconcile"))?;
        for c in r.chains.values() {
            for (node, s) in &c.supply {
                ensure(s.balances == s.genesis + s.minted - s.slashed - s.burned, || format!("{name}/{node}"))?;
                checked += 1;
            }
        }
    }
    let config = freeze_config();
    conservation(&run_scenario(&config).map_err(|e| e.to_string())?, &config)?;
    Ok(format!("{checked} preset replicas reconcile; also asserted within criteria 5-8"))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "quadratic cost exactness", budget: Duration::from_secs(1), run: quadratic_cost },
        Criterion { id: 2, name: "carbonvote sybil invariance", budget: Duration::from_secs(5), run: carbonvote_sybil },
        Criterion { id: 3, name: "liquid democracy oracle", budget: Duration::from_secs(10), run: liquid_oracle },
        Criterion { id: 4, name: "proof-of-stake fairness", budget: Duration::from_secs(5), run: pos_fairness },
        Criterion { id: 5, name: "finality safety", budget: Duration::from_secs(60), run: finality_safety },
        Criterion { id: 6, name: "fork semantics", budget: Duration::from_secs(10), run: fork_semantics },
        Criterion { id: 7, name: "freeze soundness", budget: Duration::from_secs(5), run: freeze_soundness },
        Criterion { id: 8, name: "snapshot fidelity", budget: Duration::from_secs(30), run: snapshot_fidelity },
        Criterion { id: 9, name: "merkle integrity", budget: Duration::from_secs(5), run: merkle_integrity },
        Criterion { id: 10, name: "comparison table conformance", budget: Duration::from_secs(30), run: table_conformance },
        Criterion { id: 11, name: "replay determinism", budget: Duration::from_secs(30), run: replay_determinism },
        Criterion { id: 12, name: "token conservation", budget: Duration::from_secs(30), run: token_conservation },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if took <= c.budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("over budget: {d}")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "{status} {:>2} {:<30} {:>8.3}s / {:>3}s  {detail}",
            c.id,
            c.name,
            took.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
