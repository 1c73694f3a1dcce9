use std::collections::BTreeMap;

use super::Action;

#[derive(Clone, Debug, Default)]
struct TrieNode {
    children: BTreeMap<Action, usize>,
    terminal: bool,
}

/// A set of full derivations stored as a trie, so membership of any prefix
/// is a walk from the root.
#[derive(Clone, Debug)]
pub struct ReferenceSet {
    nodes: Vec<TrieNode>,
    sequences: Vec<Vec<Action>>,
}

impl Default for ReferenceSet {
    fn default() -> Self {
        ReferenceSet {
            nodes: vec![TrieNode::default()],
            sequences: Vec::new(),
        }
    }
}

impl PartialEq for ReferenceSet {
    fn eq(&self, other: &Self) -> bool {
        let mut a = self.sequences.clone();
        let mut b = other.sequences.clone();
        a.sort();
        b.sort();
        a == b
    }
}

impl ReferenceSet {
    pub const ROOT: usize = 0;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_sequences<I: IntoIterator<Item = Vec<Action>>>(seqs: I) -> Self {
        let mut r = Self::new();
        for s in seqs {
            r.insert(&s);
        }
        r
    }

    /// Adds a full derivation; returns false if it was already present.
    pub fn insert(&mut self, actions: &[Action]) -> bool {
        let mut node = Self::ROOT;
        for &a in actions {
            node = match self.nodes[node].children.get(&a) {
                Some(&n) => n,
                None => {
                    self.nodes.push(TrieNode::default());
                    let n = self.nodes.len() - 1;
                    self.nodes[node].children.insert(a, n);
                    n
                }
            };
        }
        if self.nodes[node].terminal {
            return false;
        }
        self.nodes[node].terminal = true;
        self.sequences.push(actions.to_vec());
        true
    }

    pub fn child(&self, node: usize, a: Action) -> Option<usize> {
        self.nodes[node].children.get(&a).copied()
    }

    /// True if `prefix` begins some member (every member is its own prefix).
    pub fn contains_prefix(&self, prefix: &[Action]) -> bool {
        self.walk(prefix).is_some()
    }

    pub fn contains(&self, actions: &[Action]) -> bool {
        self.walk(actions).is_some_and(|n| self.nodes[n].terminal)
    }

    fn walk(&self, prefix: &[Action]) -> Option<usize> {
        prefix
            .iter()
            .try_fold(Self::ROOT, |node, &a| self.child(node, a))
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Members in insertion order.
    pub fn sequences(&self) -> &[Vec<Action>] {
        &self.sequences
    }

    pub fn max_len(&self) -> usize {
        self.sequences.iter().map(Vec::len).max().unwrap_or(0)
    }
}
