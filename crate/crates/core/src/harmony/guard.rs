//! Cycle guard for inter-block mode.
//!
//! The generalized structure rule only looks at two-edge patterns over
//! adjacent blocks. A cycle can also close through the previous block's
//! reordered write order, or through a chain of stale reads reaching several
//! blocks back. The guard keeps the committed footprints that a stale read
//! can still reach and checks every candidate commit set for cycles through
//! the current block.
//!
//! Blocks only point backwards through stale reads, and those reach exactly
//! one block back. A block with no committed stale read therefore cuts off
//! everything older, which bounds the window.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::sim::TxnTrace;
use crate::types::{BlockId, Key, Tid};

/// Upper bound on retained blocks; only reached by long unbroken chains of
/// stale reads.
pub const MAX_WINDOW: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub block: BlockId,
    /// `(reader, key, last block visible to the read)`.
    pub reads: Vec<(Tid, Key, Option<BlockId>)>,
    /// Committed writers per key in applied order.
    pub writes: BTreeMap<Key, Vec<Tid>>,
    /// Whether some committed read missed a write of the previous block.
    pub stale: bool,
}

impl Footprint {
    pub fn new<'a>(
        block: BlockId,
        committed: impl IntoIterator<Item = &'a TxnTrace>,
        writes: BTreeMap<Key, Vec<Tid>>,
        stale: bool,
    ) -> Self {
        let mut reads = Vec::new();
        for t in committed {
            for k in t.read_keys() {
                let visible = t.reads.iter().find(|r| &r.key == k).and_then(|r| r.snapshot.block());
                reads.push((t.tid, k.clone(), visible));
            }
        }
        Footprint { block, reads, writes, stale }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    pub blocks: Vec<Footprint>,
}

impl History {
    pub fn push(&mut self, fp: Footprint) {
        self.blocks.push(fp);
        let cut = self.blocks.iter().rposition(|f| !f.stale).unwrap_or(0);
        let cut = cut.max(self.blocks.len().saturating_sub(MAX_WINDOW));
        self.blocks.drain(..cut);
    }
}

/// Successor lists over the window plus `current`; an edge means "must
/// precede".
fn successors(window: &[Footprint], current: &Footprint) -> BTreeMap<Tid, BTreeSet<Tid>> {
    let all: Vec<&Footprint> = window.iter().chain(std::iter::once(current)).collect();
    let mut block_of: BTreeMap<Tid, BlockId> = BTreeMap::new();
    let mut writers: BTreeMap<&Key, Vec<Tid>> = BTreeMap::new();
    for f in &all {
        for (k, order) in &f.writes {
            writers.entry(k).or_default().extend(order.iter().copied());
            block_of.extend(order.iter().map(|t| (*t, f.block)));
        }
        block_of.extend(f.reads.iter().map(|(t, _, _)| (*t, f.block)));
    }
    let mut succ: BTreeMap<Tid, BTreeSet<Tid>> = BTreeMap::new();
    for order in writers.values() {
        for w in order.windows(2) {
            succ.entry(w[0]).or_default().insert(w[1]);
        }
    }
    for f in &all {
        for (r, k, visible) in &f.reads {
            for &w in writers.get(k).into_iter().flatten().filter(|w| **w != *r) {
                if Some(block_of[&w]) <= *visible {
                    succ.entry(w).or_default().insert(*r);
                } else {
                    succ.entry(*r).or_default().insert(w);
                }
            }
        }
    }
    succ
}

fn on_cycle(succ: &BTreeMap<Tid, BTreeSet<Tid>>, start: Tid) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<Tid> = succ.get(&start).into_iter().flatten().copied().collect();
    while let Some(n) = stack.pop() {
        if n == start {
            return true;
        }
        if seen.insert(n) {
            stack.extend(succ.get(&n).into_iter().flatten().copied());
        }
    }
    false
}

/// The highest-TID transaction of `current` that lies on a cycle, if any.
pub fn cycle_victim(window: &[Footprint], current: &Footprint, members: &BTreeSet<Tid>) -> Option<Tid> {
    let succ = successors(window, current);
    members.iter().rev().copied().find(|t| on_cycle(&succ, *t))
}
