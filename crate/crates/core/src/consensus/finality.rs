use std::collections::BTreeMap;

use super::{BlockTree, FinalityPolicy};
use crate::primitives::{Address, Digest};
use crate::ratio::Fraction;
use crate::state::Height;

/// Everything a node knows when deciding finality for its canonical tip.
pub struct FinalityInput<'a> {
    pub tree: &'a BlockTree,
    pub tip: Digest,
    /// Latest tip reported by each validator.
    pub votes: &'a BTreeMap<Address, Digest>,
    pub weights: &'a BTreeMap<Address, u64>,
    /// Highest own-chain height carried by a final relay block (shards only).
    pub relay_finalized: Height,
}

pub fn finalized_height(input: &FinalityInput<'_>, policy: &FinalityPolicy) -> Height {
    let tip_height = input.tree.height_of(&input.tip).unwrap_or(0);
    match policy {
        FinalityPolicy::KDeep { k } => tip_height.saturating_sub(*k),
        FinalityPolicy::Immediate => tip_height,
        FinalityPolicy::SupermajorityVote { quorum } => {
            supermajority_height(input.tree, &input.tip, input.votes, input.weights, *quorum)
        }
        FinalityPolicy::RelayInclusion => input.relay_finalized.min(tip_height),
    }
}

/// Greatest height on the chain ending at `tip` whose block is affirmed, by
/// way of a vote for it or a descendant, by validators holding strictly more
/// than `quorum` of the total weight.
pub fn supermajority_height(
    tree: &BlockTree,
    tip: &Digest,
    votes: &BTreeMap<Address, Digest>,
    weights: &BTreeMap<Address, u64>,
    quorum: Fraction,
) -> Height {
    let total: u128 = weights.values().map(|w| *w as u128).sum();
    let Some(tip_height) = tree.height_of(tip) else {
        return 0;
    };
    let voted: Vec<(u128, Digest, Height)> = votes
        .iter()
        .filter_map(|(v, b)| {
            let w = *weights.get(v)? as u128;
            Some((w, *b, tree.height_of(b)?))
        })
        .collect();
    for h in (1..=tip_height).rev() {
        let Some(block) = tree.ancestor_at(tip, h) else {
            continue;
        };
        let affirming: u128 = voted
            .iter()
            .filter(|(_, b, bh)| *bh >= h && tree.ancestor_at(b, h) == Some(block))
            .map(|(w, _, _)| *w)
            .sum();
        if quorum.exceeded_by(affirming, total) {
            return h;
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{hash, Address};

    fn addr(i: u8) -> Address {
        Address([i; 20])
    }

    fn line(n: Height) -> (BlockTree, Vec<Digest>) {
        let g = hash(b"g");
        let mut tree = BlockTree::new(g);
        let mut hashes = vec![g];
        for h in 1..=n {
            let d = hash(&h.to_be_bytes());
            assert!(tree.insert(d, *hashes.last().unwrap(), h));
            hashes.push(d);
        }
        (tree, hashes)
    }

    fn input<'a>(
        tree: &'a BlockTree,
        tip: Digest,
        votes: &'a BTreeMap<Address, Digest>,
        weights: &'a BTreeMap<Address, u64>,
    ) -> FinalityInput<'a> {
        FinalityInput {
            tree,
            tip,
            votes,
            weights,
            relay_finalized: 0,
        }
    }

    #[test]
    fn k_deep_and_immediate() {
        let (tree, hs) = line(10);
        let (votes, weights) = (BTreeMap::new(), BTreeMap::new());
        let i = input(&tree, hs[10], &votes, &weights);
        assert_eq!(finalized_height(&i, &FinalityPolicy::KDeep { k: 6 }), 4);
        assert_eq!(finalized_height(&i, &FinalityPolicy::KDeep { k: 12 }), 0);
        assert_eq!(finalized_height(&i, &FinalityPolicy::Immediate), 10);
    }

    #[test]
    fn three_of_four_affirm_height_seven() {
        let (tree, hs) = line(10);
        let weights: BTreeMap<_, _> = (0..4).map(|i| (addr(i), 1)).collect();
        let votes: BTreeMap<_, _> = [(addr(0), hs[7]), (addr(1), hs[8]), (addr(2), hs[7]), (addr(3), hs[2])]
            .into_iter()
            .collect();
        let policy = FinalityPolicy::SupermajorityVote {
            quorum: Fraction::TWO_THIRDS,
        };
        assert_eq!(finalized_height(&input(&tree, hs[10], &votes, &weights), &policy), 7);
    }

    #[test]
    fn two_of_three_is_not_a_supermajority() {
        let (tree, hs) = line(5);
        let weights: BTreeMap<_, _> = (0..3).map(|i| (addr(i), 1)).collect();
        let votes: BTreeMap<_, _> = [(addr(0), hs[5]), (addr(1), hs[5]), (addr(2), hs[1])]
            .into_iter()
            .collect();
        // 2/3 exactly does not exceed the quorum; all three affirm height 1.
        assert_eq!(
            supermajority_height(&tree, &hs[5], &votes, &weights, Fraction::TWO_THIRDS),
            1
        );
    }
}
