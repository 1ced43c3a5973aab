//! A replica with an on-disk chain log and periodic checkpoints.

use std::path::{Path, PathBuf};

use crate::block::{Block, Digest};
use crate::exec::{BlockResult, EngineKind, Executor};
use crate::harmony::PrevBlock;
use crate::storage::{read_log, verify_chain, ChainLog, Checkpoint, CheckpointDir, SnapshotStore, State};
use crate::types::{BlockId, Snapshot};
use crate::Error;

const LOG_FILE: &str = "chain.jsonl";

pub type EngineCheckpoint = Checkpoint<Option<PrevBlock>>;

#[derive(Debug)]
pub struct DurableNode {
    exec: Executor,
    log: ChainLog,
    checkpoints: CheckpointDir,
    interval: u64,
}

/// What `DurableNode::recover` did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recovery {
    /// Checkpoint the state was restored from; `None` means genesis.
    pub from: Option<BlockId>,
    pub replayed: Vec<BlockId>,
    /// State hash after each replayed block.
    pub hashes: Vec<Digest>,
}

impl DurableNode {
    /// A fresh node in `dir`, which must not already hold a log.
    pub fn create(dir: impl AsRef<Path>, kind: EngineKind, genesis: State, interval: u64) -> Result<Self, Error> {
        if interval == 0 {
            return Err(Error::Config("checkpoint interval must be positive".into()));
        }
        let checkpoints = CheckpointDir::new(dir.as_ref())?;
        let path = log_path(dir.as_ref());
        if path.exists() {
            return Err(Error::Config(format!("{} already exists", path.display())));
        }
        let log = ChainLog::open(path)?;
        Ok(DurableNode { exec: Executor::new(kind, SnapshotStore::with_genesis(genesis)), log, checkpoints, interval })
    }

    /// Rebuilds a node after a crash: restores the newest published
    /// checkpoint and replays the logged blocks after it.
    pub fn recover(
        dir: impl AsRef<Path>,
        kind: EngineKind,
        genesis: State,
        interval: u64,
    ) -> Result<(Self, Recovery), Error> {
        let checkpoints = CheckpointDir::new(dir.as_ref())?;
        let path = log_path(dir.as_ref());
        let blocks = if path.exists() { read_log(&path)? } else { Vec::new() };
        if let Some((i, _)) = blocks.iter().enumerate().find(|(i, b)| b.id != BlockId(*i as u64)) {
            return Err(Error::MissingLogSegment(BlockId(i as u64)));
        }
        if let Some(bad) = verify_chain(&blocks) {
            return Err(Error::ChainBroken(bad));
        }

        let cp: Option<EngineCheckpoint> = checkpoints.latest()?;
        let (exec, from) = match cp {
            Some(cp) => {
                if (blocks.len() as u64) <= cp.block.0 {
                    return Err(Error::MissingLogSegment(BlockId(blocks.len() as u64)));
                }
                let store = SnapshotStore::restore(cp.block, cp.state, &cp.prior);
                (Executor::restore(kind, store, cp.carry), Some(cp.block))
            }
            None => (Executor::new(kind, SnapshotStore::with_genesis(genesis)), None),
        };

        let log = ChainLog::open(&path)?;
        let mut node = DurableNode { exec, log, checkpoints, interval };
        let start = from.map_or(0, |b| b.0 as usize + 1);
        let mut rec = Recovery { from, replayed: Vec::new(), hashes: Vec::new() };
        for block in &blocks[start..] {
            node.execute(block)?;
            rec.replayed.push(block.id);
            rec.hashes.push(node.state_hash());
        }
        Ok((node, rec))
    }

    /// Logs `block` durably, then executes it.
    pub fn process(&mut self, block: &Block) -> Result<BlockResult, Error> {
        self.log.append_block(block.clone())?;
        self.execute(block)
    }

    fn execute(&mut self, block: &Block) -> Result<BlockResult, Error> {
        let result = self.exec.process_block(block)?;
        if block.id.0 != 0 && block.id.0.is_multiple_of(self.interval) {
            self.checkpoints.save(&self.checkpoint(&result)?)?;
        }
        Ok(result)
    }

    /// Checkpoint of the state after `result`'s block, not yet written.
    pub fn checkpoint(&self, result: &BlockResult) -> Result<EngineCheckpoint, Error> {
        let store = self.exec.store();
        let before = Snapshot::lagging(result.block, 1);
        let prior = result
            .writes
            .keys()
            .map(|k| Ok((k.clone(), store.read(k, before)?)))
            .collect::<Result<State, Error>>()?;
        Ok(Checkpoint { block: result.block, carry: self.exec.carry().cloned(), prior, state: store.latest().clone() })
    }

    pub fn state_hash(&self) -> Digest {
        self.exec.state_hash()
    }

    pub fn executor(&self) -> &Executor {
        &self.exec
    }

    pub fn checkpoints(&self) -> &CheckpointDir {
        &self.checkpoints
    }

    pub fn log_path(&self) -> PathBuf {
        self.log.path().expect("file-backed").to_path_buf()
    }
}

pub fn log_path(dir: &Path) -> PathBuf {
    dir.join(LOG_FILE)
}
