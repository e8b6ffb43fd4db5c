use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use govsim_core::consensus::{select_validator, ConsensusPolicy, FinalityPolicy, IncentivePolicy, ValidatorSelectionPolicy};
use govsim_core::governance::{cast_vote, on_begin_block, submit_proposal, Choice, ParameterChange, ProposalPayload, ThresholdPolicy, VotingScheme};
use govsim_core::primitives::{KeyPair, MerkleTree};
use govsim_core::scenario::{preset, run_scenario};
use govsim_core::state::LockPurpose;
use govsim_core::{ChainState, Decentralisation, GenesisAccount, GenesisConfig, GovernancePolicy, Pattern};

fn chain(n: usize, patterns: &[Pattern]) -> ChainState {
    let policy = GovernancePolicy::new(
        Decentralisation::Permissionless,
        ConsensusPolicy {
            selection: ValidatorSelectionPolicy::ProofOfStake,
            finality: FinalityPolicy::KDeep { k: 1 },
            incentive: IncentivePolicy::disabled(),
            seed: 1,
        },
    )
    .with_patterns(patterns.iter().copied().chain([Pattern::TokenLocker]));
    let mut cfg = GenesisConfig::new("bench", policy);
    for i in 0..n {
        let stake = 10 + i as u64;
        cfg = cfg.account(
            GenesisAccount::new(KeyPair::from_name(&format!("a{i}")).public_key(), 1_000)
                .with_lock(stake, 1_000_000, LockPurpose::ValidatorCandidacy),
        );
    }
    cfg.build().unwrap().0
}

fn merkle(c: &mut Criterion) {
    let mut g = c.benchmark_group("merkle");
    for n in [16usize, 256, 4096] {
        let leaves: Vec<Vec<u8>> = (0..n).map(|i| i.to_le_bytes().to_vec()).collect();
        g.bench_with_input(BenchmarkId::new("build", n), &leaves, |b, l| {
            b.iter(|| MerkleTree::new(black_box(l)).unwrap().root())
        });
    }
    g.finish();
}

fn selection(c: &mut Criterion) {
    let state = chain(100, &[]);
    let mut round = 0;
    c.bench_function("pos_select_100_validators", |b| {
        b.iter(|| {
            round += 1;
            select_validator(black_box(&state), round).unwrap()
        })
    });
}

fn tally(c: &mut Criterion) {
    let base = chain(200, &[Pattern::Carbonvote]);
    c.bench_function("carbonvote_tally_200_voters", |b| {
        b.iter_batched(
            || {
                let mut s = base.clone();
                let scheme = VotingScheme::Carbonvote { lock_weighting: None };
                let payload = ProposalPayload::ParameterChange {
                    change: ParameterChange::FastTrackWindow { value: 3 },
                };
                let proposer = KeyPair::from_name("a0").address();
                let id = submit_proposal(&mut s, proposer, "b", payload, scheme, ThresholdPolicy::simple_majority(), 5).unwrap();
                for i in 0..200 {
                    let choice = if i % 3 == 0 { Choice::No } else { Choice::Yes };
                    cast_vote(&mut s, KeyPair::from_name(&format!("a{i}")).address(), id, choice, 0).unwrap();
                }
                s.height = 5;
                s
            },
            |mut s| on_begin_block(&mut s),
            criterion::BatchSize::SmallInput,
        )
    });
}

fn scenarios(c: &mut Criterion) {
    let mut g = c.benchmark_group("scenario");
    g.sample_size(10);
    for name in ["polkadot-like", "quorum-like"] {
        let config = preset(name).unwrap();
        g.bench_function(name, |b| b.iter(|| run_scenario(black_box(&config)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, merkle, selection, tally, scenarios);
criterion_main!(benches);
