//! Baseline commit rules for comparison.
//!
//! These model only the abort decisions of the respective designs: a
//! stale-read validator that scans in TID order, a write-write validator that
//! keeps the lowest TID per key, and plain serial execution.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::command::{compose_all, CommandKind, Composite};
use crate::exec::{BlockResult, SimulatedBlock};
use crate::harmony::{intra_rw_edges, structure_middles, ReadRecord, TxnTrace};
use crate::program::{self, Host};
use crate::storage::{SnapshotStore, State};
use crate::types::{Key, Snapshot, Tid, Value};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    FabricStaleRead,
    AriaWW,
    Serial,
}

/// Scans in TID order and aborts any transaction that read a key already
/// written by an earlier committed transaction of the block.
pub fn fabric_validate(traces: &[TxnTrace]) -> BTreeSet<Tid> {
    let mut written: BTreeSet<&Key> = BTreeSet::new();
    let mut aborted = BTreeSet::new();
    let mut sorted: Vec<&TxnTrace> = traces.iter().collect();
    sorted.sort_by_key(|t| t.tid);
    for t in sorted {
        if t.reads.iter().any(|r| written.contains(&r.key)) {
            aborted.insert(t.tid);
        } else {
            written.extend(t.updates.iter().map(|(k, _)| k));
        }
    }
    aborted
}

/// Write-write rule plus the rw-pair rule.
///
/// `T_j` aborts if a lower TID also writes one of its keys, or if it read a
/// key written by a lower-TID survivor of the write-write rule while some
/// other transaction read the before-image of one of `T_j`'s writes.
pub fn aria_validate(traces: &[TxnTrace]) -> BTreeSet<Tid> {
    let mut first_writer: BTreeMap<&Key, Tid> = BTreeMap::new();
    let mut readers: BTreeMap<&Key, BTreeSet<Tid>> = BTreeMap::new();
    for t in traces {
        for (k, _) in &t.updates {
            let e = first_writer.entry(k).or_insert(t.tid);
            *e = (*e).min(t.tid);
        }
        for r in &t.reads {
            readers.entry(&r.key).or_default().insert(t.tid);
        }
    }
    let ww: BTreeSet<Tid> = traces
        .iter()
        .filter(|t| t.updates.iter().any(|(k, _)| first_writer[k] < t.tid))
        .map(|t| t.tid)
        .collect();

    let mut aborted = ww.clone();
    for t in traces.iter().filter(|t| !ww.contains(&t.tid)) {
        let stale = t.reads.iter().any(|r| {
            first_writer.get(&r.key).is_some_and(|&w| w < t.tid && !ww.contains(&w))
        });
        let incoming = t
            .updates
            .iter()
            .any(|(k, _)| readers.get(k).is_some_and(|rs| rs.iter().any(|&r| r != t.tid)));
        if stale && incoming {
            aborted.insert(t.tid);
        }
    }
    aborted
}

/// Commit step for the stale-read and write-write baselines.
pub fn commit(kind: BaselineKind, sim: SimulatedBlock, store: &SnapshotStore) -> Result<BlockResult, Error> {
    let aborted = match kind {
        BaselineKind::FabricStaleRead => fabric_validate(&sim.traces),
        BaselineKind::AriaWW => aria_validate(&sim.traces),
        BaselineKind::Serial => unreachable!("serial execution does not simulate"),
    };
    let head = store.head();
    let mut per_key: BTreeMap<&Key, Vec<(Tid, Composite)>> = BTreeMap::new();
    for t in sim.traces.iter().filter(|t| !aborted.contains(&t.tid)) {
        for (k, c) in &t.updates {
            per_key.entry(k).or_default().push((t.tid, *c));
        }
    }
    let mut writes = State::new();
    let mut applied_order = BTreeMap::new();
    for (k, mut cmds) in per_key {
        // serial application in TID order
        cmds.sort_by_key(|(t, _)| *t);
        let fused = compose_all(cmds.iter().map(|(_, c)| c))?;
        writes.insert(k.clone(), fused.apply(store.read(k, head)?)?);
        applied_order.insert(k.clone(), cmds.iter().map(|(t, _)| *t).collect());
    }
    let edges = intra_rw_edges(&sim.traces);
    let hits = structure_middles(&edges);
    let committed = sim.traces.iter().map(|t| t.tid).filter(|t| !aborted.contains(t)).collect();
    Ok(BlockResult {
        block: sim.block,
        snapshot: sim.snapshot,
        committed,
        aborted,
        writes,
        applied_order,
        handler_calls: 0,
        dep_states: BTreeMap::new(),
        edges,
        inter: Vec::new(),
        hits,
        guarded: BTreeSet::new(),
        traces: sim.traces,
    })
}

struct LiveHost<'a> {
    store: &'a SnapshotStore,
    head: Snapshot,
    overlay: &'a mut State,
    reads: Vec<ReadRecord>,
    updates: Vec<(Key, Composite)>,
    commands: Vec<(Key, CommandKind)>,
}

impl Host for LiveHost<'_> {
    fn read(&mut self, key: &Key) -> Result<Value, Error> {
        let v = match self.overlay.get(key) {
            Some(v) => *v,
            None => self.store.read(key, self.head)?,
        };
        let own_read = self.updates.iter().any(|(k, _)| k == key);
        self.reads.push(ReadRecord { key: key.clone(), snapshot: self.head, observed: v, own_read, live: true });
        Ok(v)
    }

    fn update(&mut self, key: &Key, cmd: CommandKind) -> Result<(), Error> {
        let cur = match self.overlay.get(key) {
            Some(v) => *v,
            None => self.store.read(key, self.head)?,
        };
        self.overlay.insert(key.clone(), crate::command::apply_command(cmd, cur)?);
        self.commands.push((key.clone(), cmd));
        let c = Composite::from(cmd);
        match self.updates.iter_mut().find(|(k, _)| k == key) {
            Some((_, acc)) => *acc = acc.then(&c)?,
            None => self.updates.push((key.clone(), c)),
        }
        Ok(())
    }
}

/// Runs the block one transaction at a time against the live state.
pub fn serial_execute(block: &Block, store: &SnapshotStore) -> Result<BlockResult, Error> {
    let head = store.head();
    let mut overlay = State::new();
    let mut traces = Vec::with_capacity(block.txns.len());
    let mut applied_order: BTreeMap<Key, Vec<Tid>> = BTreeMap::new();
    for txn in &block.txns {
        let mut host = LiveHost {
            store,
            head,
            overlay: &mut overlay,
            reads: Vec::new(),
            updates: Vec::new(),
            commands: Vec::new(),
        };
        program::run(&txn.steps, &mut host)?;
        let LiveHost { reads, updates, commands, .. } = host;
        for (k, _) in &updates {
            applied_order.entry(k.clone()).or_default().push(txn.tid);
        }
        traces.push(TxnTrace { tid: txn.tid, snapshot: head, reads, updates, commands });
    }
    Ok(BlockResult {
        block: block.id,
        snapshot: head,
        committed: block.txns.iter().map(|t| t.tid).collect(),
        aborted: BTreeSet::new(),
        writes: overlay,
        applied_order,
        handler_calls: 0,
        dep_states: BTreeMap::new(),
        edges: Vec::new(),
        inter: Vec::new(),
        hits: BTreeSet::new(),
        guarded: BTreeSet::new(),
        traces,
    })
}
