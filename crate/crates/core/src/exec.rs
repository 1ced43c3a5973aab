//! Per-replica block executor shared by Harmony and the baselines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineKind};
use crate::block::{Block, Digest};
use crate::harmony::{self, Dep, DependencyState, HarmonyOptions, PrevBlock, TxnTrace};
use crate::par;
use crate::storage::{SnapshotStore, State};
use crate::types::{BlockId, Key, Snapshot, Tid};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineKind {
    Harmony(HarmonyOptions),
    Baseline(BaselineKind),
}

impl EngineKind {
    pub fn harmony() -> Self {
        EngineKind::Harmony(HarmonyOptions::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            EngineKind::Harmony(_) => "harmony",
            EngineKind::Baseline(BaselineKind::FabricStaleRead) => "fabric",
            EngineKind::Baseline(BaselineKind::AriaWW) => "aria",
            EngineKind::Baseline(BaselineKind::Serial) => "serial",
        }
    }

    pub fn snapshot_lag(&self) -> u64 {
        match self {
            EngineKind::Harmony(o) => o.snapshot_lag(),
            EngineKind::Baseline(_) => 1,
        }
    }

    pub fn with_options(self, opts: HarmonyOptions) -> Self {
        match self {
            EngineKind::Harmony(_) => EngineKind::Harmony(opts),
            other => other,
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "harmony" => EngineKind::harmony(),
            "fabric" => EngineKind::Baseline(BaselineKind::FabricStaleRead),
            "aria" => EngineKind::Baseline(BaselineKind::AriaWW),
            "serial" => EngineKind::Baseline(BaselineKind::Serial),
            other => return Err(Error::Config(format!("unknown engine {other:?}"))),
        })
    }
}

/// Output of the simulation step for one block.
#[derive(Debug, Clone)]
pub struct SimulatedBlock {
    pub block: BlockId,
    pub snapshot: Snapshot,
    pub traces: Vec<TxnTrace>,
}

/// Outcome of committing one block, with enough detail for the oracle.
#[derive(Debug, Clone)]
pub struct BlockResult {
    pub block: BlockId,
    pub snapshot: Snapshot,
    pub committed: BTreeSet<Tid>,
    pub aborted: BTreeSet<Tid>,
    pub writes: State,
    /// Per key, committed issuers in application order.
    pub applied_order: BTreeMap<Key, Vec<Tid>>,
    /// rw handler invocations during dependency resolution.
    pub handler_calls: usize,
    pub dep_states: BTreeMap<Tid, DependencyState>,
    /// Intra-block rw edges over all simulated transactions.
    pub edges: Vec<Dep>,
    /// Dependencies on the previous block (inter-block mode only).
    pub inter: Vec<Dep>,
    /// Transactions matching a (generalized) backward dangerous structure.
    pub hits: BTreeSet<Tid>,
    /// Extra aborts made by the inter-block cycle guard.
    pub guarded: BTreeSet<Tid>,
    pub traces: Vec<TxnTrace>,
}

impl BlockResult {
    pub fn txn_count(&self) -> usize {
        self.committed.len() + self.aborted.len()
    }

    pub fn trace(&self, tid: Tid) -> Option<&TxnTrace> {
        self.traces.iter().find(|t| t.tid == tid)
    }
}

/// A replica's execution state: its store and the committed footprint of
/// the last block.
#[derive(Debug, Clone)]
pub struct Executor {
    kind: EngineKind,
    store: SnapshotStore,
    prev: Option<PrevBlock>,
}

impl Executor {
    pub fn new(kind: EngineKind, store: SnapshotStore) -> Self {
        Executor { kind, store, prev: None }
    }

    pub fn restore(kind: EngineKind, store: SnapshotStore, prev: Option<PrevBlock>) -> Self {
        Executor { kind, store, prev }
    }

    pub fn kind(&self) -> EngineKind {
        self.kind
    }

    pub fn store(&self) -> &SnapshotStore {
        &self.store
    }

    pub fn carry(&self) -> Option<&PrevBlock> {
        self.prev.as_ref()
    }

    pub fn state_hash(&self) -> Digest {
        self.store.state_hash(self.store.head()).expect("head is readable")
    }

    /// Whether `block` could start simulating now.
    pub fn can_simulate(&self, block: BlockId) -> bool {
        Snapshot::lagging(block, self.kind.snapshot_lag()) <= self.store.head()
    }

    /// Simulation step. Needs only the snapshot `lag` blocks back, so with
    /// inter-block parallelism it may run before the previous block commits.
    pub fn simulate(&self, block: &Block) -> Result<SimulatedBlock, Error> {
        let snapshot = Snapshot::lagging(block.id, self.kind.snapshot_lag());
        let results = par::map(&block.txns, |t| harmony::simulate(t, &self.store, snapshot));
        let traces = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(SimulatedBlock { block: block.id, snapshot, traces })
    }

    /// Commit step; blocks commit strictly in id order.
    pub fn commit(&mut self, block: &Block, sim: Option<SimulatedBlock>) -> Result<BlockResult, Error> {
        let expected = self.store.next_block();
        if block.id != expected {
            return Err(Error::OutOfOrderCommit { expected, got: block.id });
        }
        let result = match self.kind {
            EngineKind::Baseline(BaselineKind::Serial) => baselines::serial_execute(block, &self.store)?,
            EngineKind::Baseline(b) => {
                let sim = match sim {
                    Some(s) => s,
                    None => self.simulate(block)?,
                };
                baselines::commit(b, sim, &self.store)?
            }
            EngineKind::Harmony(opts) => {
                let sim = match sim {
                    Some(s) => s,
                    None => self.simulate(block)?,
                };
                let (result, carry) = harmony::commit(opts, sim, &self.store, self.prev.as_ref())?;
                self.prev = Some(carry);
                result
            }
        };
        self.store.install_block_writes(block.id, &result.writes)?;
        Ok(result)
    }

    pub fn process_block(&mut self, block: &Block) -> Result<BlockResult, Error> {
        self.commit(block, None)
    }
}
