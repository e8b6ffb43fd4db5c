use super::*;
use crate::consensus::FinalityPolicy;
use crate::governance::{Choice, ThresholdPolicy};
use crate::network::NetworkConfig;
use crate::policy::{Decentralisation, Pattern};
use crate::state::LockPurpose;

fn minimal() -> ScenarioConfig {
    let validators: Vec<String> = (0..3).map(|i| format!("n{i}")).collect();
    let mut actors: Vec<ActorConfig> = validators.iter().map(|v| ActorConfig::new(v, 100)).collect();
    actors.push(ActorConfig::new("user", 50));
    ScenarioConfig {
        spec_version: SPEC_VERSION,
        name: "minimal".into(),
        chain_id: "main".into(),
        seed: 1,
        ticks: 20,
        mode: Decentralisation::Permissionless,
        consensus: ConsensusSection {
            selection: SelectionKind::RoundRobin,
            finality: FinalityPolicy::KDeep { k: 1 },
            incentive: IncentiveSection::default(),
        },
        patterns: Vec::new(),
        params: PatternParams::default(),
        actors,
        validators,
        network: NetworkConfig::default(),
        shards: None,
        aux_chain: None,
        actions: Vec::new(),
    }
}

fn at(tick: u64, actor: &str, action: Action) -> ScriptedAction {
    ScriptedAction {
        tick,
        actor: actor.into(),
        action,
    }
}

#[test]
fn permissioned_token_locker_names_the_field_and_level() {
    let mut c = preset("quorum-like").unwrap();
    c.patterns.push(Pattern::TokenLocker);
    let e = c.validate().unwrap_err();
    assert_eq!(e.field, format!("patterns[{}]", c.patterns.len() - 1));
    assert!(e.constraint.contains("token-locker"), "{e}");
    assert!(e.constraint.contains("permissionless"), "{e}");
    assert!(matches!(run_scenario(&c), Err(ScenarioError::Config(_))));
}

#[test]
fn permissionless_participation_permission_is_refused() {
    let mut c = minimal();
    c.patterns.push(Pattern::ParticipationPermission);
    let e = c.validate().unwrap_err();
    assert_eq!(e.field, "patterns[0]");
    assert!(e.constraint.contains("permissioned only"), "{e}");
}

#[test]
fn undeclared_actor_is_refused() {
    let mut c = minimal();
    c.actions.push(at(
        2,
        "mallory",
        Action::Transfer {
            to: "user".into(),
            amount: 1,
            memo: String::new(),
            fee: 0,
            route: false,
            chain: None,
        },
    ));
    let e = c.validate().unwrap_err();
    assert!(e.field.starts_with("actions[0]"), "{e}");
    assert!(e.constraint.contains("mallory"), "{e}");
}

#[test]
fn actions_past_the_horizon_are_refused() {
    let mut c = minimal();
    c.actions.push(at(21, "user", Action::FreezeNetwork { chain: None }));
    assert!(c.validate().unwrap_err().constraint.contains("horizon"));
}

#[test]
fn unknown_fields_are_refused() {
    let mut v: serde_json::Value = serde_json::from_str(&minimal().to_json()).unwrap();
    v["colour"] = "blue".into();
    assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
}

#[test]
fn config_json_round_trips() {
    for name in PRESETS {
        let c = preset(name).unwrap();
        assert_eq!(ScenarioConfig::from_json(&c.to_json()).unwrap(), c);
    }
}

#[test]
fn unknown_preset_is_an_error() {
    assert_eq!(preset("bitcoin-ish").unwrap_err(), UnknownPreset("bitcoin-ish".into()));
}

#[test]
fn empty_script_yields_genesis_only_chains() {
    let mut c = minimal();
    c.network.empty_blocks = false;
    let r = run_scenario(&c).unwrap();
    let main = r.main_chain();
    assert_eq!(main.distinct_tips, 1);
    assert!(main.nodes.values().all(|n| n.tip_height == 0));
    assert!(r.actions.is_empty());
    assert!(r.logs(Some("block.produced"), None).is_empty());
    assert!(r.supply_reconciles());
}

#[test]
fn same_config_same_report_bytes() {
    let c = preset("polkadot-like").unwrap();
    let a = run_scenario(&c).unwrap().to_json();
    let b = run_scenario(&c).unwrap().to_json();
    assert_eq!(a, b);
}

#[test]
fn report_json_round_trips() {
    let r = run_scenario(&preset("quorum-like").unwrap()).unwrap();
    let back = RunReport::from_json(&r.to_json()).unwrap();
    assert_eq!(back, r);
}

fn state(m: &ConformanceMatrix, profile: &str, p: Pattern) -> CellState {
    m.cell(p, profile).map(|c| c.state).unwrap_or(CellState::Inactive)
}

#[test]
fn quorum_like_shards_inactive_incentives_disabled() {
    let r = run_scenario(&preset("quorum-like").unwrap()).unwrap();
    assert_eq!(state(&r.matrix, "quorum-like", Pattern::ShardedChain), CellState::Inactive);
    assert_eq!(
        state(&r.matrix, "quorum-like", Pattern::IncentiveDistributor),
        CellState::Disabled
    );
    assert_eq!(
        state(&r.matrix, "quorum-like", Pattern::ParticipationPermission),
        CellState::Active
    );
    let main = r.main_chain();
    assert_eq!(main.distinct_tips, 1);
    assert_eq!(main.protocol_version, 2);
    assert!(r.supply_reconciles());
}

#[test]
fn polkadot_like_has_no_participation_permission() {
    let r = run_scenario(&preset("polkadot-like").unwrap()).unwrap();
    let m = &r.matrix;
    assert_eq!(state(m, "polkadot-like", Pattern::ParticipationPermission), CellState::Inactive);
    for p in [Pattern::ShardedChain, Pattern::TokenLocker, Pattern::Carbonvote, Pattern::DataMigrator] {
        assert_eq!(state(m, "polkadot-like", p), CellState::Active, "{p}");
    }
    for c in r.chains.values() {
        assert_eq!(c.distinct_tips, 1);
    }
    assert!(r.supply_reconciles());
}

#[test]
fn declared_but_unused_carbonvote_is_inactive() {
    let mut c = minimal();
    c.consensus.selection = SelectionKind::ProofOfStake;
    for a in c.actors.iter_mut().take(3) {
        a.stake = 10;
    }
    c.patterns = vec![Pattern::TokenLocker, Pattern::Carbonvote];
    c.actions.push(at(
        2,
        "user",
        Action::Lock {
            amount: 5,
            duration: 10,
            purpose: LockPurpose::VoteWeight,
            chain: None,
        },
    ));
    c.validate().unwrap();
    let r = run_scenario(&c).unwrap();
    assert_eq!(state(&r.matrix, "minimal", Pattern::Carbonvote), CellState::Inactive);
    assert_eq!(state(&r.matrix, "minimal", Pattern::TokenLocker), CellState::Active);
}

#[test]
fn matrix_evidence_is_never_empty_for_active_cells() {
    let r = run_scenario(&preset("polkadot-like").unwrap()).unwrap();
    for row in r.matrix.rows.iter().chain(&r.matrix.extended) {
        for cell in row.cells.values() {
            assert_eq!(cell.state == CellState::Inactive, cell.evidence == 0, "{}", row.pattern);
        }
    }
}

#[test]
fn matrix_render_is_stable_across_replays() {
    let c = preset("quorum-like").unwrap();
    let a = run_scenario(&c).unwrap().matrix.render();
    let b = run_scenario(&c).unwrap().matrix.render();
    assert_eq!(a, b);
    assert!(a.contains("participation-permission  active"));
}

#[test]
fn failed_proposal_leaves_version_alone() {
    let mut c = preset("quorum-like").unwrap();
    for a in c.actions.iter_mut() {
        if let Action::Vote { choice, .. } = &mut a.action {
            if a.actor == "acme" {
                *choice = Choice::No;
            }
        }
        if let Action::SubmitProposal { threshold, .. } = &mut a.action {
            assert_eq!(*threshold, ThresholdPolicy::Unanimous);
        }
    }
    let r = run_scenario(&c).unwrap();
    assert_eq!(r.main_chain().protocol_version, 1);
    assert_eq!(r.main_chain().proposals[0].status, "rejected");
}

#[test]
fn unknown_action_keys_are_refused() {
    let text = r#"{"tick": 1, "actor": "user", "action": "freeze-network", "colour": "red"}"#;
    assert!(serde_json::from_str::<ScriptedAction>(text).is_err());
    let ok = r#"{"tick": 1, "actor": "user", "action": "freeze-network"}"#;
    assert!(serde_json::from_str::<ScriptedAction>(ok).is_ok());
}
