//! Partitions of the state space into disjoint blocks.
//!
//! Blocks are kept in canonical form: members sorted by state id, blocks
//! ordered by their least member. Refinement only ever splits blocks, so a
//! partition computed from another by refinement compares finer-or-equal.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::model::{Imdp, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    block_of: Vec<usize>,
    blocks: Vec<Vec<StateId>>,
}

impl Partition {
    /// Builds a partition from a block index per state; block ids are
    /// renumbered canonically.
    pub fn from_block_of(block_of: &[usize]) -> Partition {
        let mut remap: Vec<Option<usize>> = vec![None; block_of.len()];
        let mut blocks: Vec<Vec<StateId>> = Vec::new();
        let mut canonical = vec![0usize; block_of.len()];
        for (s, &b) in block_of.iter().enumerate() {
            if b >= remap.len() {
                remap.resize(b + 1, None);
            }
            let id = match remap[b] {
                Some(id) => id,
                None => {
                    let id = blocks.len();
                    remap[b] = Some(id);
                    blocks.push(Vec::new());
                    id
                }
            };
            blocks[id].push(StateId(s));
            canonical[s] = id;
        }
        Partition {
            block_of: canonical,
            blocks,
        }
    }

    /// Every state in its own block.
    pub fn discrete(num_states: usize) -> Partition {
        Partition::from_block_of(&(0..num_states).collect::<Vec<_>>())
    }

    /// All states in one block.
    pub fn unit(num_states: usize) -> Partition {
        Partition::from_block_of(&vec![0; num_states])
    }

    pub fn num_states(&self) -> usize {
        self.block_of.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, s: StateId) -> BlockId {
        BlockId(self.block_of[s.0])
    }

    pub fn block(&self, b: BlockId) -> &[StateId] {
        &self.blocks[b.0]
    }

    pub fn blocks(&self) -> impl Iterator<Item = (BlockId, &[StateId])> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, m)| (BlockId(i), m.as_slice()))
    }

    pub fn same_block(&self, s: StateId, t: StateId) -> bool {
        self.block_of[s.0] == self.block_of[t.0]
    }

    /// Splits block `b` into `detached` and the rest. The retained part keeps
    /// the block id `b`; the detached states get a fresh id, so ids of
    /// untouched blocks remain stable across splits. No-op when `detached`
    /// is empty or covers the whole block.
    pub fn split(&mut self, b: BlockId, detached: &BTreeSet<StateId>) -> bool {
        if detached.is_empty() || detached.len() == self.blocks[b.0].len() {
            return false;
        }
        let old = std::mem::take(&mut self.blocks[b.0]);
        let (moved, kept): (Vec<StateId>, Vec<StateId>) =
            old.into_iter().partition(|s| detached.contains(s));
        debug_assert_eq!(moved.len(), detached.len(), "detached ⊆ block");
        let fresh = self.blocks.len();
        for s in &moved {
            self.block_of[s.0] = fresh;
        }
        self.blocks[b.0] = kept;
        self.blocks.push(moved);
        true
    }

    /// Renumbers blocks into the canonical order (by least member).
    pub fn canonicalize(&self) -> Partition {
        let mut order: Vec<usize> = (0..self.blocks.len()).collect();
        order.sort_by_key(|&b| self.blocks[b].first().copied());
        let mut block_of = vec![0usize; self.block_of.len()];
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (new_id, &old_id) in order.iter().enumerate() {
            for s in &self.blocks[old_id] {
                block_of[s.0] = new_id;
            }
            blocks.push(self.blocks[old_id].clone());
        }
        Partition { block_of, blocks }
    }

    /// True iff every block of `self` is contained in a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.num_states() != coarser.num_states() {
            return false;
        }
        self.blocks.iter().all(|members| {
            let mut it = members.iter();
            match it.next() {
                None => true,
                Some(&first) => {
                    let b = coarser.block_of(first);
                    it.all(|&s| coarser.block_of(s) == b)
                }
            }
        })
    }

    /// One line per block: `B<k>: s1 s2 ...` in canonical order.
    pub fn dump(&self, m: &Imdp) -> String {
        let canon = self.canonicalize();
        let mut out = String::new();
        for (b, members) in canon.blocks() {
            let names: Vec<&str> = members.iter().map(|&s| m.state_name(s)).collect();
            writeln!(out, "B{}: {}", b.0, names.join(" ")).expect("string write");
        }
        out
    }
}
