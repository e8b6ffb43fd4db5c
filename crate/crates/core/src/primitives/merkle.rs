//! Binary Merkle tree over SHA-256.
//!
//! Leaves are hashed once to form the bottom level. Odd levels are padded by
//! duplicating their last hash. A single-leaf tree has root `hash(hash(leaf))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{hash, hash_concat, Digest};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MerkleError {
    #[error("a Merkle tree needs at least one leaf")]
    NoLeaves,
    #[error("leaf index {index} out of range for {count} leaves")]
    IndexOutOfRange { index: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleTree {
    /// `levels[0]` holds the leaf hashes; the last level holds the root alone.
    levels: Vec<Vec<Digest>>,
    root: Digest,
}

/// Sibling path for one leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub leaf_count: usize,
    pub siblings: Vec<Digest>,
}

fn node(left: &Digest, right: &Digest) -> Digest {
    hash_concat(&[&left.0, &right.0])
}

impl MerkleTree {
    pub fn new<L: AsRef<[u8]>>(leaves: &[L]) -> Result<MerkleTree, MerkleError> {
        if leaves.is_empty() {
            return Err(MerkleError::NoLeaves);
        }
        let bottom: Vec<Digest> = leaves.iter().map(|l| hash(l.as_ref())).collect();
        if bottom.len() == 1 {
            let root = hash(&bottom[0].0);
            return Ok(MerkleTree {
                levels: vec![bottom],
                root,
            });
        }
        let mut levels = vec![bottom];
        while levels.last().map_or(0, Vec::len) > 1 {
            let current = levels.last().unwrap();
            let next = current
                .chunks(2)
                .map(|pair| node(&pair[0], pair.get(1).unwrap_or(&pair[0])))
                .collect();
            levels.push(next);
        }
        let root = levels.last().unwrap()[0];
        Ok(MerkleTree { levels, root })
    }

    pub fn root(&self) -> Digest {
        self.root
    }

    pub fn leaf_hashes(&self) -> &[Digest] {
        &self.levels[0]
    }

    pub fn levels(&self) -> &[Vec<Digest>] {
        &self.levels
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[0].len()
    }

    pub fn proof(&self, index: usize) -> Result<MerkleProof, MerkleError> {
        let count = self.leaf_count();
        if index >= count {
            return Err(MerkleError::IndexOutOfRange { index, count });
        }
        let mut siblings = Vec::new();
        let mut i = index;
        // The root level has no sibling; a single-leaf tree has no path at all.
        for level in &self.levels[..self.levels.len().saturating_sub(1)] {
            if count == 1 {
                break;
            }
            let sib = i ^ 1;
            siblings.push(*level.get(sib).unwrap_or(&level[i]));
            i /= 2;
        }
        Ok(MerkleProof {
            leaf_count: count,
            siblings,
        })
    }
}

/// Root over `leaves`; see the module docs for the padding rule.
pub fn merkle_root<L: AsRef<[u8]>>(leaves: &[L]) -> Result<Digest, MerkleError> {
    MerkleTree::new(leaves).map(|t| t.root())
}

/// Checks that `leaf` sits at `index` under `root`.
pub fn merkle_verify(root: &Digest, leaf: &[u8], index: usize, proof: &MerkleProof) -> bool {
    if index >= proof.leaf_count {
        return false;
    }
    let leaf_hash = hash(leaf);
    if proof.leaf_count == 1 {
        return proof.siblings.is_empty() && hash(&leaf_hash.0) == *root;
    }
    let mut expected_len = 0;
    let mut width = proof.leaf_count;
    while width > 1 {
        expected_len += 1;
        width = width.div_ceil(2);
    }
    if proof.siblings.len() != expected_len {
        return false;
    }
    let mut acc = leaf_hash;
    let mut i = index;
    for sib in &proof.siblings {
        acc = if i.is_multiple_of(2) {
            node(&acc, sib)
        } else {
            node(sib, &acc)
        };
        i /= 2;
    }
    acc == *root
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h(b: &[u8]) -> Digest {
        hash(b)
    }

    fn cat(a: &Digest, b: &Digest) -> Digest {
        let mut v = a.0.to_vec();
        v.extend_from_slice(&b.0);
        hash(&v)
    }

    #[test]
    fn empty_leaf_list_is_an_error() {
        let none: [&[u8]; 0] = [];
        assert_eq!(merkle_root(&none), Err(MerkleError::NoLeaves));
    }

    #[test]
    fn single_leaf_root_hashes_twice() {
        assert_eq!(merkle_root(&[b"L"]).unwrap(), h(&h(b"L").0));
    }

    #[test]
    fn four_leaf_root_by_hand() {
        let leaves: [&[u8]; 4] = [b"l1", b"l2", b"l3", b"l4"];
        let [h1, h2, h3, h4] = leaves.map(h);
        let expected = cat(&cat(&h1, &h2), &cat(&h3, &h4));
        assert_eq!(merkle_root(&leaves).unwrap(), expected);
    }

    #[test]
    fn three_leaves_duplicate_last() {
        let leaves: [&[u8]; 3] = [b"a", b"b", b"c"];
        let [h1, h2, h3] = leaves.map(h);
        let expected = cat(&cat(&h1, &h2), &cat(&h3, &h3));
        assert_eq!(merkle_root(&leaves).unwrap(), expected);
    }

    #[test]
    fn proofs_verify_only_on_their_own_index() {
        let leaves: [&[u8]; 4] = [b"w", b"x", b"y", b"z"];
        let tree = MerkleTree::new(&leaves).unwrap();
        for (i, leaf) in leaves.iter().enumerate() {
            let proof = tree.proof(i).unwrap();
            for j in 0..4 {
                assert_eq!(merkle_verify(&tree.root(), leaf, j, &proof), i == j, "{i} {j}");
            }
        }
    }

    #[test]
    fn tampered_proof_fails() {
        let leaves: [&[u8]; 4] = [b"w", b"x", b"y", b"z"];
        let tree = MerkleTree::new(&leaves).unwrap();
        let mut proof = tree.proof(2).unwrap();
        proof.siblings[0].0[0] ^= 1;
        assert!(!merkle_verify(&tree.root(), b"y", 2, &proof));
        assert!(!merkle_verify(&tree.root(), b"Y", 2, &tree.proof(2).unwrap()));
    }

    #[test]
    fn out_of_range_index() {
        let tree = MerkleTree::new(&[b"a", b"b"]).unwrap();
        assert_eq!(
            tree.proof(2),
            Err(MerkleError::IndexOutOfRange { index: 2, count: 2 })
        );
    }

    #[test]
    fn single_leaf_proof() {
        let tree = MerkleTree::new(&[b"only"]).unwrap();
        let proof = tree.proof(0).unwrap();
        assert!(proof.siblings.is_empty());
        assert!(merkle_verify(&tree.root(), b"only", 0, &proof));
        assert!(!merkle_verify(&tree.root(), b"other", 0, &proof));
    }

    proptest! {
        #[test]
        fn every_proof_verifies_and_every_mutation_moves_root(
            leaves in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..16), 1..=64),
            pick in any::<prop::sample::Index>(),
        ) {
            let tree = MerkleTree::new(&leaves).unwrap();
            prop_assert_eq!(merkle_root(&leaves).unwrap(), tree.root());
            for (i, leaf) in leaves.iter().enumerate() {
                prop_assert!(merkle_verify(&tree.root(), leaf, i, &tree.proof(i).unwrap()));
            }
            let i = pick.index(leaves.len());
            let mut mutated = leaves.clone();
            mutated[i].push(0xAA);
            prop_assert_ne!(merkle_root(&mutated).unwrap(), tree.root());
        }
    }
}
