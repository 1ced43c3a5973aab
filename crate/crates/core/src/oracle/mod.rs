//! Brute-force correctness oracle.
//!
//! Builds the full dependency graph of committed transactions, checks it
//! for cycles, and replays the committed transactions serially to confirm
//! the engine's output. Everything here is quadratic and unoptimized on
//! purpose.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::command::{apply_command, CommandKind};
use crate::exec::BlockResult;
use crate::harmony::TxnTrace;
use crate::program::{self, Host};
use crate::storage::State;
use crate::types::{BlockId, Key, Tid, Value};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Rw,
    Ww,
    Wr,
}

/// `from` must precede `to` in any equivalent serial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: Tid,
    pub to: Tid,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<Tid>,
    pub edges: BTreeSet<Edge>,
}

impl DependencyGraph {
    pub fn new(nodes: impl IntoIterator<Item = Tid>) -> Self {
        DependencyGraph { nodes: nodes.into_iter().collect(), edges: BTreeSet::new() }
    }

    pub fn add(&mut self, from: Tid, to: Tid, kind: EdgeKind) {
        if from != to {
            self.edges.insert(Edge { from, to, kind });
        }
    }

    fn successors(&self) -> BTreeMap<Tid, BTreeSet<Tid>> {
        let mut succ: BTreeMap<Tid, BTreeSet<Tid>> = self.nodes.iter().map(|n| (*n, BTreeSet::new())).collect();
        for e in &self.edges {
            succ.entry(e.from).or_default().insert(e.to);
            succ.entry(e.to).or_default();
        }
        succ
    }

    /// Nodes reachable backwards from `start`, `start` included.
    fn ancestors(&self, start: impl IntoIterator<Item = Tid>) -> BTreeSet<Tid> {
        let mut seen: BTreeSet<Tid> = BTreeSet::new();
        let mut stack: Vec<Tid> = start.into_iter().collect();
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(self.edges.iter().filter(|e| e.to == n).map(|e| e.from));
            }
        }
        seen
    }
}

/// One committed transaction's place in the version history.
struct Placed<'a> {
    block: BlockId,
    trace: &'a TxnTrace,
}

/// Dependency graph over the committed transactions of consecutive blocks.
///
/// Writes of a key are ordered by block and then by the block's applied
/// order, each following the one before it (ww). A read served from
/// snapshot `s` follows every writer in a block up to `s` (wr) and precedes
/// every later writer (rw); a live read also follows the lower-TID writers
/// of its own block. A read-modify-write command also reads the writer
/// before it (wr).
pub fn build_graph<'a>(results: impl IntoIterator<Item = &'a BlockResult>) -> DependencyGraph {
    let results: Vec<&BlockResult> = results.into_iter().collect();
    let mut placed: BTreeMap<Tid, Placed> = BTreeMap::new();
    let mut history: BTreeMap<&Key, Vec<Tid>> = BTreeMap::new();
    for r in &results {
        for t in r.traces.iter().filter(|t| r.committed.contains(&t.tid)) {
            placed.insert(t.tid, Placed { block: r.block, trace: t });
        }
        for (k, order) in &r.applied_order {
            history.entry(k).or_default().extend(order.iter().copied());
        }
    }
    let mut g = DependencyGraph::new(placed.keys().copied());
    // ww and read-modify-write edges to non-adjacent writers are implied by
    // transitivity, so only adjacent pairs are added.
    for (k, writers) in &history {
        for pair in writers.windows(2) {
            g.add(pair[0], pair[1], EdgeKind::Ww);
            if placed[&pair[1]].trace.update_for(k).is_some_and(|c| c.is_read_modify_write()) {
                g.add(pair[0], pair[1], EdgeKind::Wr);
            }
        }
    }
    for (&tid, p) in &placed {
        for read in &p.trace.reads {
            let visible = read.snapshot.block();
            for &w in history.get(&read.key).into_iter().flatten() {
                let earlier_in_block = read.live && placed[&w].block == p.block && w < tid;
                if Some(placed[&w].block) <= visible || earlier_in_block {
                    g.add(w, tid, EdgeKind::Wr);
                } else {
                    g.add(tid, w, EdgeKind::Rw);
                }
            }
        }
    }
    g
}

/// Kahn's algorithm, always emitting the smallest ready TID. `None` on a cycle.
pub fn topo_order(g: &DependencyGraph) -> Option<Vec<Tid>> {
    let succ = g.successors();
    let mut indeg: BTreeMap<Tid, usize> = succ.keys().map(|n| (*n, 0)).collect();
    for targets in succ.values() {
        for t in targets {
            *indeg.get_mut(t).expect("node") += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<Tid>> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| Reverse(*n)).collect();
    let mut order = Vec::with_capacity(indeg.len());
    while let Some(Reverse(n)) = ready.pop() {
        order.push(n);
        for t in &succ[&n] {
            let d = indeg.get_mut(t).expect("node");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(*t));
            }
        }
    }
    (order.len() == indeg.len()).then_some(order)
}

pub fn is_acyclic(g: &DependencyGraph) -> bool {
    topo_order(g).is_some()
}

/// Runs programs against a plain map, recording what each read saw.
struct ReplayHost<'a> {
    state: &'a mut State,
    seen: Vec<Value>,
}

impl Host for ReplayHost<'_> {
    fn read(&mut self, key: &Key) -> Result<Value, Error> {
        let v = self.state.get(key).copied().unwrap_or(Value::Absent);
        self.seen.push(v);
        Ok(v)
    }

    fn update(&mut self, key: &Key, cmd: CommandKind) -> Result<(), Error> {
        let cur = self.state.get(key).copied().unwrap_or(Value::Absent);
        self.state.insert(key.clone(), apply_command(cmd, cur)?);
        Ok(())
    }
}

fn normalized(mut s: State) -> State {
    s.retain(|_, v| !v.is_absent());
    s
}

/// Replays the committed transactions of `window` one at a time in the
/// graph's topological order, starting from `base` (the state before the
/// window's first block).
///
/// True iff the graph is acyclic, every replayed read returns what the
/// transaction observed during execution, and the final state equals `base`
/// with each block's installed writes applied in order.
pub fn serial_equivalence(window: &[(&Block, &BlockResult)], base: &State) -> bool {
    let g = build_graph(window.iter().map(|(_, r)| *r));
    let Some(order) = topo_order(&g) else { return false };

    let mut programs = BTreeMap::new();
    let mut traces = BTreeMap::new();
    for (block, result) in window {
        for txn in &block.txns {
            programs.insert(txn.tid, &txn.steps);
        }
        for t in &result.traces {
            traces.insert(t.tid, t);
        }
    }

    let mut state = base.clone();
    for tid in order {
        let (Some(steps), Some(trace)) = (programs.get(&tid), traces.get(&tid)) else { return false };
        let mut host = ReplayHost { state: &mut state, seen: Vec::new() };
        if program::run(steps, &mut host).is_err() {
            return false;
        }
        let expected: Vec<Value> = trace.reads.iter().map(|r| r.observed).collect();
        if host.seen.iter().map(|v| v.numeric()).ne(expected.iter().map(|v| v.numeric())) {
            return false;
        }
    }

    let mut installed = base.clone();
    for (_, r) in window {
        installed.extend(r.writes.iter().map(|(k, v)| (k.clone(), *v)));
    }
    normalized(state) == normalized(installed)
}

/// Whether aborting `tid` was unnecessary: some placement of it among the
/// block's committed transactions keeps the dependency graph acyclic.
///
/// The transaction has to follow everything that read a key it writes and
/// precede every committed writer of a key it read. Its writes slot into
/// each key's applied order right after the committed transactions it
/// follows, so a placement exists iff no committed writer it must precede
/// is itself forced before it.
pub fn false_abort(tid: Tid, result: &BlockResult) -> bool {
    placeable(tid, result, &build_graph([result]))
}

fn placeable(tid: Tid, result: &BlockResult, g: &DependencyGraph) -> bool {
    let Some(t) = result.trace(tid) else { return false };
    let committed: Vec<&TxnTrace> = result.traces.iter().filter(|c| result.committed.contains(&c.tid)).collect();
    let writes = t.write_keys();
    let reads = t.read_keys();
    let before: Vec<Tid> = committed
        .iter()
        .filter(|c| c.reads.iter().any(|r| writes.contains(&r.key)))
        .map(|c| c.tid)
        .collect();
    let after: BTreeSet<Tid> = committed
        .iter()
        .filter(|c| c.updates.iter().any(|(k, _)| reads.contains(k)))
        .map(|c| c.tid)
        .collect();
    g.ancestors(before).is_disjoint(&after)
}

pub fn false_aborts(result: &BlockResult) -> BTreeSet<Tid> {
    let g = build_graph([result]);
    result.aborted.iter().copied().filter(|t| placeable(*t, result, &g)).collect()
}

/// Fraction of processed transactions that hit a backward dangerous structure.
pub fn hit_rate<'a>(results: impl IntoIterator<Item = &'a BlockResult>) -> f64 {
    let (hits, total) = results
        .into_iter()
        .fold((0usize, 0usize), |(h, n), r| (h + r.hits.len(), n + r.txn_count()));
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}
