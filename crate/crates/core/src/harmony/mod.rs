//! The Harmony commit protocol.
//!
//! A block goes through two steps. The simulation step runs every
//! transaction against a block snapshot and records reads plus update
//! commands ([`sim`]). After a barrier, the commit step resolves rw
//! dependencies into per-transaction `min_out`/`max_in` accumulators
//! ([`deps`]), aborts the middle of every backward dangerous structure
//! `T_i ← T_j ← T_k` (`i < j`, `i <= k`), and applies the surviving update
//! commands per key in ascending `min_out` order, coalesced into one
//! evaluation ([`apply`]).
//!
//! With inter-block parallelism a block simulates against the snapshot two
//! blocks back, so it can overlap the commit of its predecessor. Commits stay
//! in block order and dependencies on the predecessor are validated by the
//! generalized rule in [`deps::enhanced_victims`].

pub mod apply;
pub mod deps;
pub mod guard;
pub mod sim;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::exec::{BlockResult, SimulatedBlock};
use crate::storage::{SnapshotStore, State};
use crate::types::{Key, Tid};
use crate::Error;

pub use apply::{apply_write_sets, reorder, AppliedKey, ReservationTable};
pub use deps::{
    backward_structures, enhanced_victims, inter_deps, intra_rw_edges, structure_middles, validate, Dep, DepKind,
    DependencyState, DependencyTable, PrevBlock, Verdict,
};
pub use guard::{Footprint, History};
pub use sim::{simulate, ReadRecord, TxnTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmonyOptions {
    pub inter_block: bool,
    /// Update reordering and coalescence. When off, write-write conflicts
    /// abort every writer but the lowest TID.
    pub update_optim: bool,
}

impl Default for HarmonyOptions {
    fn default() -> Self {
        HarmonyOptions { inter_block: false, update_optim: true }
    }
}

impl HarmonyOptions {
    pub fn snapshot_lag(&self) -> u64 {
        if self.inter_block {
            2
        } else {
            1
        }
    }
}

/// Commit step for one simulated block. `prev` is the committed footprint of
/// the previous block, used only with inter-block parallelism.
pub fn commit(
    opts: HarmonyOptions,
    sim: SimulatedBlock,
    store: &SnapshotStore,
    prev: Option<&PrevBlock>,
) -> Result<(BlockResult, PrevBlock), Error> {
    let SimulatedBlock { block, snapshot, traces } = sim;
    let tids: Vec<Tid> = traces.iter().map(|t| t.tid).collect();
    let current: BTreeSet<Tid> = tids.iter().copied().collect();

    let intra = intra_rw_edges(&traces);
    let inter = match (opts.inter_block, prev) {
        (true, Some(p)) => inter_deps(&traces, p),
        _ => Vec::new(),
    };

    let mut table = DependencyTable::new(tids.iter().copied());
    for e in intra.iter().chain(inter.iter().filter(|e| e.kind == DepKind::InterRw)) {
        table.on_rw(e.to, e.from);
    }

    let (mut aborted, hits) = if opts.inter_block {
        let mut edges = intra.clone();
        edges.extend(inter.iter().copied());
        if let Some(p) = prev {
            edges.extend(p.rw_edges.iter().copied());
        }
        let victims = enhanced_victims(&edges, |t| current.contains(&t));
        (victims.clone(), victims)
    } else {
        let aborted: BTreeSet<Tid> =
            table.states().values().filter(|s| validate(s) == Verdict::Abort).map(|s| s.tid).collect();
        (aborted, structure_middles(&intra))
    };

    let reservations = ReservationTable::build(&traces);
    if !opts.update_optim {
        for (_, writers) in reservations.writers() {
            aborted.extend(writers.iter().skip(1).copied());
        }
    }

    let mut guarded = BTreeSet::new();
    if opts.inter_block {
        let window = prev.map(|p| &p.history.blocks[..]).unwrap_or(&[]);
        loop {
            let members: BTreeSet<Tid> = current.difference(&aborted).copied().collect();
            let order = applied_orders(&reservations, &aborted, |t| table.min_out(t));
            let fp = Footprint::new(block, traces.iter().filter(|t| members.contains(&t.tid)), order, false);
            match guard::cycle_victim(window, &fp, &members) {
                Some(v) => {
                    aborted.insert(v);
                    guarded.insert(v);
                }
                None => break,
            }
        }
    }

    let committed_traces: Vec<&TxnTrace> = traces.iter().filter(|t| !aborted.contains(&t.tid)).collect();
    let head = store.head();
    let applied = apply_write_sets(
        &reservations,
        &committed_traces,
        &aborted,
        |t| table.min_out(t),
        |k: &Key| store.read(k, head),
    )?;

    let committed: BTreeSet<Tid> = committed_traces.iter().map(|t| t.tid).collect();
    let writes: State = applied.iter().map(|(k, a)| (k.clone(), a.value)).collect();
    let applied_order: BTreeMap<Key, Vec<Tid>> = applied.into_iter().map(|(k, a)| (k, a.order)).collect();

    let mut readers: BTreeMap<Key, Vec<Tid>> = BTreeMap::new();
    for t in &committed_traces {
        for k in t.read_keys() {
            readers.entry(k.clone()).or_default().push(t.tid);
        }
    }
    let mut history = prev.map(|p| p.history.clone()).unwrap_or_default();
    if opts.inter_block {
        let stale = inter
            .iter()
            .any(|e| e.kind == DepKind::InterRw && committed.contains(&e.from) && !current.contains(&e.to));
        history.push(Footprint::new(block, committed_traces.iter().copied(), applied_order.clone(), stale));
    }
    let carry = PrevBlock {
        committed: committed.clone(),
        writers: applied_order.clone(),
        readers,
        rw_edges: intra
            .iter()
            .filter(|e| committed.contains(&e.to) && committed.contains(&e.from))
            .chain(inter.iter().filter(|e| committed.contains(&e.to) || committed.contains(&e.from)))
            .copied()
            .collect(),
        history,
    };

    let result = BlockResult {
        block,
        snapshot,
        committed,
        aborted,
        writes,
        applied_order,
        handler_calls: table.handler_calls(),
        dep_states: table.states().clone(),
        edges: intra,
        inter,
        hits,
        guarded,
        traces,
    };
    Ok((result, carry))
}

/// Per-key issuer order that the reordering rule would apply.
fn applied_orders(
    table: &ReservationTable,
    aborted: &BTreeSet<Tid>,
    min_out: impl Fn(Tid) -> Tid,
) -> BTreeMap<Key, Vec<Tid>> {
    table
        .keys()
        .filter_map(|k| {
            let order: Vec<Tid> = reorder(&table.get(k)?.cmds, aborted, &min_out).into_iter().map(|(t, _)| t).collect();
            (!order.is_empty()).then(|| (k.clone(), order))
        })
        .collect()
}
