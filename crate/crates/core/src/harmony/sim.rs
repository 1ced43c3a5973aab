//! Simulation step: run a program against a block snapshot and capture its
//! read set and update commands without touching storage.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::block::Transaction;
use crate::command::{CommandKind, Composite};
use crate::program::{self, Host};
use crate::storage::SnapshotStore;
use crate::types::{Key, Snapshot, Tid, Value};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadRecord {
    pub key: Key,
    pub snapshot: Snapshot,
    pub observed: Value,
    /// Served by evaluating the transaction's own commands on the snapshot value.
    pub own_read: bool,
    /// Saw the writes of earlier transactions in the same block (serial execution).
    #[serde(default)]
    pub live: bool,
}

/// Everything the commit step needs to know about one simulated transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxnTrace {
    pub tid: Tid,
    pub snapshot: Snapshot,
    pub reads: Vec<ReadRecord>,
    /// Updated keys in first-update order, each with the transaction's
    /// coalesced command for that key.
    pub updates: Vec<(Key, Composite)>,
    /// Raw commands in emission order.
    pub commands: Vec<(Key, CommandKind)>,
}

impl TxnTrace {
    pub fn read_keys(&self) -> BTreeSet<&Key> {
        self.reads.iter().map(|r| &r.key).collect()
    }

    pub fn write_keys(&self) -> BTreeSet<&Key> {
        self.updates.iter().map(|(k, _)| k).collect()
    }

    pub fn update_for(&self, key: &Key) -> Option<&Composite> {
        self.updates.iter().find(|(k, _)| k == key).map(|(_, c)| c)
    }
}

struct SimHost<'a> {
    store: &'a SnapshotStore,
    snapshot: Snapshot,
    reads: Vec<ReadRecord>,
    updates: Vec<(Key, Composite)>,
    index: BTreeMap<Key, usize>,
    commands: Vec<(Key, CommandKind)>,
}

impl Host for SimHost<'_> {
    fn read(&mut self, key: &Key) -> Result<Value, Error> {
        let base = self.store.read(key, self.snapshot)?;
        let (observed, own_read) = match self.index.get(key) {
            Some(&i) => (self.updates[i].1.apply(base)?, true),
            None => (base, false),
        };
        self.reads.push(ReadRecord { key: key.clone(), snapshot: self.snapshot, observed, own_read, live: false });
        Ok(observed)
    }

    fn update(&mut self, key: &Key, cmd: CommandKind) -> Result<(), Error> {
        self.commands.push((key.clone(), cmd));
        let c = Composite::from(cmd);
        match self.index.get(key) {
            // a second update to the same key coalesces into the first
            Some(&i) => self.updates[i].1 = self.updates[i].1.then(&c)?,
            None => {
                self.index.insert(key.clone(), self.updates.len());
                self.updates.push((key.clone(), c));
            }
        }
        Ok(())
    }
}

/// Runs `txn` against `store` at `snapshot`.
pub fn simulate(txn: &Transaction, store: &SnapshotStore, snapshot: Snapshot) -> Result<TxnTrace, Error> {
    let mut host = SimHost {
        store,
        snapshot,
        reads: Vec::new(),
        updates: Vec::new(),
        index: BTreeMap::new(),
        commands: Vec::new(),
    };
    program::run(&txn.steps, &mut host)?;
    Ok(TxnTrace { tid: txn.tid, snapshot, reads: host.reads, updates: host.updates, commands: host.commands })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::Step;
    use crate::storage::State;
    use crate::types::BlockId;

    fn k(s: &str) -> Key {
        Key::new(s).unwrap()
    }

    fn store_with_x10() -> SnapshotStore {
        let mut s = SnapshotStore::new();
        let w: State = [(k("x"), Value::Num(10))].into_iter().collect();
        s.install_block_writes(BlockId(0), &w).unwrap();
        s
    }

    #[test]
    fn read_then_add_records_both() {
        let s = store_with_x10();
        let t = Transaction::new(Tid(1), BlockId(1), vec![Step::read(&k("x")), Step::update(&k("x"), CommandKind::Add(10))]);
        let tr = simulate(&t, &s, s.head()).unwrap();
        assert_eq!(tr.reads.len(), 1);
        assert_eq!(tr.reads[0].observed, Value::Num(10));
        assert!(!tr.reads[0].own_read);
        assert_eq!(tr.updates, vec![(k("x"), Composite::from(CommandKind::Add(10)))]);
    }

    #[test]
    fn repeated_updates_coalesce_per_transaction() {
        let s = store_with_x10();
        let t = Transaction::new(
            Tid(1),
            BlockId(1),
            vec![Step::update(&k("x"), CommandKind::Add(1)), Step::update(&k("x"), CommandKind::Add(2))],
        );
        let tr = simulate(&t, &s, s.head()).unwrap();
        assert_eq!(tr.updates, vec![(k("x"), Composite::from(CommandKind::Add(3)))]);
        assert_eq!(tr.commands.len(), 2);
    }

    #[test]
    fn own_read_evaluates_own_commands_on_snapshot() {
        let s = store_with_x10();
        let t = Transaction::new(Tid(1), BlockId(1), vec![Step::update(&k("x"), CommandKind::Add(10)), Step::read(&k("x"))]);
        let tr = simulate(&t, &s, s.head()).unwrap();
        assert_eq!(tr.reads[0].observed, Value::Num(20));
        assert!(tr.reads[0].own_read);
    }

    #[test]
    fn simulation_leaves_store_untouched() {
        let s = store_with_x10();
        let before = s.state_hash(s.head()).unwrap();
        let t = Transaction::new(Tid(1), BlockId(1), vec![Step::update(&k("x"), CommandKind::Set(0))]);
        simulate(&t, &s, s.head()).unwrap();
        assert_eq!(s.state_hash(s.head()).unwrap(), before);
    }
}
