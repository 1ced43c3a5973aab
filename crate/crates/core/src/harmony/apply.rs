//! Commit-time update reordering and coalescence.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::OnceLock;

use super::sim::TxnTrace;
use crate::command::{compose_all, Composite};
use crate::par;
use crate::types::{Key, Tid, Value};
use crate::Error;

/// Outcome of applying one key's reservation list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppliedKey {
    pub value: Value,
    /// Issuers in the order their commands were applied.
    pub order: Vec<Tid>,
    pub handled_by: Tid,
}

#[derive(Debug)]
pub struct Reservation {
    /// One (already coalesced) command per issuing transaction.
    pub cmds: Vec<(Tid, Composite)>,
    handled: AtomicBool,
    result: OnceLock<Result<AppliedKey, Error>>,
}

impl Reservation {
    fn new() -> Self {
        Reservation { cmds: Vec::new(), handled: AtomicBool::new(false), result: OnceLock::new() }
    }

    /// Test-and-set of the handled flag. Exactly one caller wins per epoch.
    pub fn claim(&self) -> bool {
        !self.handled.swap(true, Ordering::AcqRel)
    }

    pub fn is_handled(&self) -> bool {
        self.handled.load(Ordering::Acquire)
    }
}

/// Key → commands reserved on it during simulation.
#[derive(Debug, Default)]
pub struct ReservationTable {
    entries: BTreeMap<Key, Reservation>,
}

impl ReservationTable {
    pub fn build(traces: &[TxnTrace]) -> Self {
        let mut entries: BTreeMap<Key, Reservation> = BTreeMap::new();
        for t in traces {
            for (k, c) in &t.updates {
                entries.entry(k.clone()).or_insert_with(Reservation::new).cmds.push((t.tid, *c));
            }
        }
        ReservationTable { entries }
    }

    pub fn get(&self, key: &Key) -> Option<&Reservation> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.entries.keys()
    }

    /// Writers per key, in TID order.
    pub fn writers(&self) -> impl Iterator<Item = (&Key, Vec<Tid>)> {
        self.entries.iter().map(|(k, r)| (k, r.cmds.iter().map(|(t, _)| *t).collect()))
    }
}

/// Sort key for reordering: ascending `min_out`, ties by TID.
pub fn reorder(cmds: &[(Tid, Composite)], aborted: &BTreeSet<Tid>, min_out: impl Fn(Tid) -> Tid) -> Vec<(Tid, Composite)> {
    let mut live: Vec<(Tid, Composite)> = cmds.iter().filter(|(t, _)| !aborted.contains(t)).copied().collect();
    live.sort_by_key(|(t, _)| (min_out(*t), *t));
    live
}

/// Applies the write sets of every committed transaction.
///
/// Committed transactions walk their updated keys in parallel; the first to
/// claim a key filters, reorders, coalesces and evaluates that key's list on
/// `base`, the others skip it.
pub fn apply_write_sets(
    table: &ReservationTable,
    committed: &[&TxnTrace],
    aborted: &BTreeSet<Tid>,
    min_out: impl Fn(Tid) -> Tid + Sync + Send,
    base: impl Fn(&Key) -> Result<Value, Error> + Sync + Send,
) -> Result<BTreeMap<Key, AppliedKey>, Error> {
    par::for_each(committed, |t| {
        for (key, _) in &t.updates {
            let entry = table.get(key).expect("reserved during simulation");
            if !entry.claim() {
                continue;
            }
            let result = (|| {
                let ordered = reorder(&entry.cmds, aborted, &min_out);
                let fused = compose_all(ordered.iter().map(|(_, c)| c))?;
                Ok(AppliedKey {
                    value: fused.apply(base(key)?)?,
                    order: ordered.iter().map(|(t, _)| *t).collect(),
                    handled_by: t.tid,
                })
            })();
            let _ = entry.result.set(result);
        }
    });
    let mut out = BTreeMap::new();
    for (k, r) in &table.entries {
        if let Some(res) = r.result.get() {
            out.insert(k.clone(), res.clone()?);
        }
    }
    Ok(out)
}
