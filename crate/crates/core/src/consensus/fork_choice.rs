use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::primitives::Digest;
use crate::state::Height;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeEntry {
    pub hash: Digest,
    pub parent: Option<Digest>,
    pub height: Height,
}

/// Hash-linked tree of accepted blocks rooted at a genesis block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTree {
    genesis: Digest,
    entries: BTreeMap<Digest, TreeEntry>,
    children: BTreeMap<Digest, Vec<Digest>>,
}

impl BlockTree {
    pub fn new(genesis: Digest) -> BlockTree {
        BlockTree::with_root(genesis, 0)
    }

    /// A tree whose root sits at `height`, as for a migrated chain.
    pub fn with_root(genesis: Digest, height: Height) -> BlockTree {
        let mut entries = BTreeMap::new();
        entries.insert(
            genesis,
            TreeEntry {
                hash: genesis,
                parent: None,
                height,
            },
        );
        BlockTree {
            genesis,
            entries,
            children: BTreeMap::new(),
        }
    }

    pub fn genesis(&self) -> Digest {
        self.genesis
    }

    /// Adds a block under a known parent. Returns false, leaving the tree
    /// untouched, when the parent is unknown, the height does not follow the
    /// parent, or the block is already present.
    pub fn insert(&mut self, hash: Digest, parent: Digest, height: Height) -> bool {
        let Some(p) = self.entries.get(&parent) else {
            return false;
        };
        if p.height + 1 != height || self.entries.contains_key(&hash) {
            return false;
        }
        self.entries.insert(
            hash,
            TreeEntry {
                hash,
                parent: Some(parent),
                height,
            },
        );
        self.children.entry(parent).or_default().push(hash);
        true
    }

    pub fn contains(&self, hash: &Digest) -> bool {
        self.entries.contains_key(hash)
    }

    pub fn get(&self, hash: &Digest) -> Option<&TreeEntry> {
        self.entries.get(hash)
    }

    pub fn height_of(&self, hash: &Digest) -> Option<Height> {
        self.entries.get(hash).map(|e| e.height)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Blocks without children.
    pub fn leaves(&self) -> impl Iterator<Item = &TreeEntry> + '_ {
        self.entries
            .values()
            .filter(|e| !self.children.contains_key(&e.hash))
    }

    /// The ancestor of `block` at `height`, or `block` itself at its own height.
    pub fn ancestor_at(&self, block: &Digest, height: Height) -> Option<Digest> {
        let mut cur = *self.entries.get(block)?;
        if height > cur.height {
            return None;
        }
        while cur.height > height {
            cur = *self.entries.get(&cur.parent?)?;
        }
        Some(cur.hash)
    }

    /// Whether `ancestor` lies on the path from genesis to `block`, inclusive.
    pub fn is_ancestor(&self, ancestor: &Digest, block: &Digest) -> bool {
        match self.entries.get(ancestor) {
            Some(a) => self.ancestor_at(block, a.height) == Some(*ancestor),
            None => false,
        }
    }

    /// Block hashes from genesis to `tip`, inclusive.
    pub fn path_to(&self, tip: &Digest) -> Vec<Digest> {
        let mut path = Vec::new();
        let mut cur = self.entries.get(tip).copied();
        while let Some(e) = cur {
            path.push(e.hash);
            cur = e.parent.and_then(|p| self.entries.get(&p).copied());
        }
        path.reverse();
        path
    }
}

fn better(a: &TreeEntry, b: &TreeEntry) -> bool {
    a.height > b.height || (a.height == b.height && a.hash < b.hash)
}

/// Longest chain; equal heights go to the smaller tip hash.
pub fn choose_canonical_chain(tree: &BlockTree) -> Digest {
    choose_canonical_chain_from(tree, &tree.genesis)
}

/// Longest-chain rule restricted to descendants of `anchor`, so a node never
/// abandons a block it has already finalized.
pub fn choose_canonical_chain_from(tree: &BlockTree, anchor: &Digest) -> Digest {
    let Some(start) = tree.get(anchor) else {
        return tree.genesis;
    };
    let mut best = *start;
    let mut stack = vec![*anchor];
    while let Some(h) = stack.pop() {
        let e = tree.entries[&h];
        if better(&e, &best) {
            best = e;
        }
        if let Some(kids) = tree.children.get(&h) {
            stack.extend(kids.iter().copied());
        }
    }
    best.hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::hash;

    fn d(label: &str) -> Digest {
        hash(label.as_bytes())
    }

    fn chain(tree: &mut BlockTree, from: Digest, start: Height, labels: &[&str]) -> Digest {
        let mut parent = from;
        for (i, l) in labels.iter().enumerate() {
            assert!(tree.insert(d(l), parent, start + i as Height + 1));
            parent = d(l);
        }
        parent
    }

    #[test]
    fn linear_chain_tip() {
        let g = d("g");
        let mut tree = BlockTree::new(g);
        let tip = chain(&mut tree, g, 0, &["1", "2", "3", "4", "5"]);
        assert_eq!(choose_canonical_chain(&tree), tip);
        assert_eq!(tree.path_to(&tip).len(), 6);
    }

    #[test]
    fn longer_branch_wins() {
        let g = d("g");
        let mut tree = BlockTree::new(g);
        chain(&mut tree, g, 0, &["a1", "a2", "a3"]);
        let b = chain(&mut tree, g, 0, &["b1", "b2", "b3", "b4"]);
        assert_eq!(choose_canonical_chain(&tree), b);
    }

    #[test]
    fn equal_branches_pick_smaller_hex() {
        let g = d("g");
        let mut tree = BlockTree::new(g);
        let a = chain(&mut tree, g, 0, &["a1", "a2", "a3"]);
        let b = chain(&mut tree, g, 0, &["b1", "b2", "b3"]);
        let expected = if a.to_hex() < b.to_hex() { a } else { b };
        assert_eq!(choose_canonical_chain(&tree), expected);
    }

    #[test]
    fn anchored_choice_ignores_other_branches() {
        let g = d("g");
        let mut tree = BlockTree::new(g);
        let a = chain(&mut tree, g, 0, &["a1", "a2"]);
        chain(&mut tree, g, 0, &["b1", "b2", "b3", "b4"]);
        assert_eq!(choose_canonical_chain_from(&tree, &d("a1")), a);
        assert!(tree.is_ancestor(&d("a1"), &a));
        assert!(!tree.is_ancestor(&d("b1"), &a));
    }

    #[test]
    fn rejects_bad_linkage() {
        let g = d("g");
        let mut tree = BlockTree::new(g);
        assert!(!tree.insert(d("x"), d("missing"), 1));
        assert!(!tree.insert(d("x"), g, 2));
        assert!(tree.insert(d("x"), g, 1));
        assert!(!tree.insert(d("x"), g, 1));
    }
}
