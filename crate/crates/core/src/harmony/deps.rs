//! Dependency resolution and the validation rules.
//!
//! Edges are written in "backward" form: `Dep { to, from }` reads
//! `to ← from`, i.e. `from` must precede `to` in any equivalent serial order.
//! For an rw-dependency `to` is the writer and `from` the transaction that
//! read the before-image of that write.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::sim::TxnTrace;
use crate::par;
use crate::types::{Key, Tid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DepKind {
    IntraRw,
    InterRw,
    InterWw,
    InterWr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Dep {
    pub to: Tid,
    pub from: Tid,
    pub kind: DepKind,
}

impl Dep {
    pub fn rw(writer: Tid, reader: Tid) -> Dep {
        Dep { to: writer, from: reader, kind: DepKind::IntraRw }
    }
}

/// Per-transaction accumulators. `min_out` starts at `tid + 1`; `max_in`
/// starts at minus infinity, represented as `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyState {
    pub tid: Tid,
    pub min_out: Tid,
    pub max_in: Option<Tid>,
}

impl DependencyState {
    pub fn new(tid: Tid) -> Self {
        DependencyState { tid, min_out: tid.next(), max_in: None }
    }

    /// Whether the transaction has an outgoing rw edge to a lower TID.
    pub fn points_backward(&self) -> bool {
        self.min_out < self.tid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Commit,
    Abort,
}

/// The commit-time check: abort iff `min_out < tid` and `min_out <= max_in`.
pub fn validate(state: &DependencyState) -> Verdict {
    match state.max_in {
        Some(max_in) if state.points_backward() && state.min_out <= max_in => Verdict::Abort,
        _ => Verdict::Commit,
    }
}

/// Accumulator table driven by rw edges.
#[derive(Debug, Clone, Default)]
pub struct DependencyTable {
    states: BTreeMap<Tid, DependencyState>,
    handler_calls: usize,
}

impl DependencyTable {
    pub fn new(tids: impl IntoIterator<Item = Tid>) -> Self {
        DependencyTable { states: tids.into_iter().map(|t| (t, DependencyState::new(t))).collect(), handler_calls: 0 }
    }

    /// Handler for `writer ← reader`. Endpoints outside the table (e.g. a
    /// writer from the previous block) only update the side that is present.
    pub fn on_rw(&mut self, writer: Tid, reader: Tid) {
        self.handler_calls += 1;
        if let Some(s) = self.states.get_mut(&reader) {
            s.min_out = s.min_out.min(writer);
        }
        if let Some(s) = self.states.get_mut(&writer) {
            s.max_in = Some(s.max_in.map_or(reader, |m| m.max(reader)));
        }
    }

    pub fn get(&self, tid: Tid) -> Option<&DependencyState> {
        self.states.get(&tid)
    }

    pub fn states(&self) -> &BTreeMap<Tid, DependencyState> {
        &self.states
    }

    pub fn handler_calls(&self) -> usize {
        self.handler_calls
    }

    pub fn min_out(&self, tid: Tid) -> Tid {
        self.states[&tid].min_out
    }
}

/// All intra-block rw edges: every reader of a key against every other
/// writer of it. Each distinct pair appears once.
pub fn intra_rw_edges(traces: &[TxnTrace]) -> Vec<Dep> {
    let mut readers: BTreeMap<&Key, BTreeSet<Tid>> = BTreeMap::new();
    let mut writers: BTreeMap<&Key, Vec<Tid>> = BTreeMap::new();
    for t in traces {
        for r in &t.reads {
            readers.entry(&r.key).or_default().insert(t.tid);
        }
        for (k, _) in &t.updates {
            writers.entry(k).or_default().push(t.tid);
        }
    }
    let keys: Vec<(&Key, &BTreeSet<Tid>)> = readers.iter().map(|(k, v)| (*k, v)).collect();
    let per_key = par::map(&keys, |(k, rs)| {
        let mut out = Vec::new();
        if let Some(ws) = writers.get(*k) {
            for &r in rs.iter() {
                for &w in ws {
                    if w != r {
                        out.push(Dep::rw(w, r));
                    }
                }
            }
        }
        out
    });
    let set: BTreeSet<Dep> = per_key.into_iter().flatten().collect();
    set.into_iter().collect()
}

/// What the commit of the previous block leaves behind for inter-block
/// dependency detection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrevBlock {
    pub committed: BTreeSet<Tid>,
    /// Committed writers per key.
    pub writers: BTreeMap<Key, Vec<Tid>>,
    /// Committed readers per key.
    #[serde(default)]
    pub readers: BTreeMap<Key, Vec<Tid>>,
    /// rw edges among committed transactions of that block, plus its
    /// inter-block dependencies that involve a committed member.
    pub rw_edges: Vec<Dep>,
    /// Committed footprints still reachable through stale reads.
    #[serde(default)]
    pub history: super::guard::History,
}

/// Dependencies between the current block and the committed part of the
/// previous one. The current block simulated against a snapshot that does
/// not contain the previous block's writes.
pub fn inter_deps(traces: &[TxnTrace], prev: &PrevBlock) -> Vec<Dep> {
    let mut out = BTreeSet::new();
    for t in traces {
        for k in t.read_keys() {
            for &w in prev.writers.get(k).into_iter().flatten() {
                out.insert(Dep { to: w, from: t.tid, kind: DepKind::InterRw });
            }
        }
        for (k, c) in &t.updates {
            for &r in prev.readers.get(k).into_iter().flatten() {
                out.insert(Dep { to: t.tid, from: r, kind: DepKind::InterRw });
            }
            for &w in prev.writers.get(k).into_iter().flatten() {
                out.insert(Dep { to: t.tid, from: w, kind: DepKind::InterWw });
                if c.is_read_modify_write() {
                    out.insert(Dep { to: t.tid, from: w, kind: DepKind::InterWr });
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Every `(i, j, k)` with `T_i ← T_j ← T_k`, `i < j` and `i <= k`.
///
/// Quadratic in the degree of each middle node; kinds are ignored.
pub fn backward_structures(edges: &[Dep]) -> Vec<(Tid, Tid, Tid)> {
    let mut outs: BTreeMap<Tid, BTreeSet<Tid>> = BTreeMap::new();
    let mut ins: BTreeMap<Tid, BTreeSet<Tid>> = BTreeMap::new();
    for e in edges {
        outs.entry(e.from).or_default().insert(e.to);
        ins.entry(e.to).or_default().insert(e.from);
    }
    let mut found = Vec::new();
    for (&j, targets) in &outs {
        let Some(sources) = ins.get(&j) else { continue };
        for &i in targets.range(..j) {
            for &k in sources.range(i..) {
                found.push((i, j, k));
            }
        }
    }
    found
}

/// Middle transactions of backward dangerous structures, by enumeration.
pub fn structure_middles(edges: &[Dep]) -> BTreeSet<Tid> {
    backward_structures(edges).into_iter().map(|(_, j, _)| j).collect()
}

/// Abort set under the inter-block rule for the block whose transactions
/// satisfy `is_current`.
///
/// For each generalized structure `T_i ← T_j ← T_k` the victim is `T_j`
/// when `T_j` and `T_k` share a block and `T_k` otherwise. The previous
/// block has already committed, so when the rule names one of its
/// transactions the current-block member of the pair is aborted instead.
/// Structures lying entirely in the previous block were settled when it
/// committed.
pub fn enhanced_victims(edges: &[Dep], is_current: impl Fn(Tid) -> bool) -> BTreeSet<Tid> {
    let mut victims = BTreeSet::new();
    for (_, j, k) in backward_structures(edges) {
        let (jc, kc) = (is_current(j), is_current(k));
        let victim = match (jc, kc) {
            (true, true) => j,
            (false, false) => continue,
            (false, true) => k,
            (true, false) => j,
        };
        victims.insert(victim);
    }
    victims
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(n: u64) -> Tid {
        Tid(n)
    }

    fn table(n: u64, edges: &[Dep]) -> DependencyTable {
        let mut tab = DependencyTable::new((1..=n).map(Tid));
        for e in edges {
            tab.on_rw(e.to, e.from);
        }
        tab
    }

    #[test]
    fn no_edges_keeps_initial_state() {
        let tab = table(3, &[]);
        for (tid, s) in tab.states() {
            assert_eq!(s.min_out, tid.next());
            assert_eq!(s.max_in, None);
            assert_eq!(validate(s), Verdict::Commit);
        }
    }

    #[test]
    fn two_transaction_match() {
        // T1 reads x, T2 writes x; T2 reads y, T1 writes y
        let edges = [Dep::rw(t(2), t(1)), Dep::rw(t(1), t(2))];
        let tab = table(2, &edges);
        let s2 = tab.get(t(2)).unwrap();
        let s1 = tab.get(t(1)).unwrap();
        assert_eq!((s2.min_out, s2.max_in), (t(1), Some(t(1))));
        assert_eq!((s1.min_out, s1.max_in), (t(2), Some(t(2))));
        assert_eq!(validate(s2), Verdict::Abort);
        assert_eq!(validate(s1), Verdict::Commit);
        assert_eq!(tab.handler_calls(), 2);
    }

    #[test]
    fn chain_aborts_only_the_middle() {
        // T1 ← T2 ← T3
        let edges = [Dep::rw(t(1), t(2)), Dep::rw(t(2), t(3))];
        let tab = table(3, &edges);
        let aborted: Vec<_> = tab.states().values().filter(|s| validate(s) == Verdict::Abort).map(|s| s.tid).collect();
        assert_eq!(aborted, vec![t(2)]);
        assert_eq!(structure_middles(&edges), [t(2)].into_iter().collect());
    }

    #[test]
    fn forward_chain_is_fine() {
        // T3 ← T2 ← T1: every edge points forward in TID order
        let edges = [Dep::rw(t(3), t(2)), Dep::rw(t(2), t(1))];
        assert!(structure_middles(&edges).is_empty());
        assert!(table(3, &edges).states().values().all(|s| validate(s) == Verdict::Commit));
    }

    #[test]
    fn inter_block_victim_is_the_later_block() {
        // block i = {1, 2}, block i+1 = {3}: T1 ←intra-rw T2 ←inter-rw T3
        let edges = [Dep::rw(t(1), t(2)), Dep { to: t(2), from: t(3), kind: DepKind::InterRw }];
        let victims = enhanced_victims(&edges, |x| x == t(3));
        assert_eq!(victims, [t(3)].into_iter().collect());
    }

    #[test]
    fn enhanced_reduces_to_rule_one_without_inter_edges() {
        let edges = [Dep::rw(t(2), t(1)), Dep::rw(t(1), t(2)), Dep::rw(t(3), t(4)), Dep::rw(t(1), t(3))];
        assert_eq!(enhanced_victims(&edges, |_| true), structure_middles(&edges));
    }
}
