//! Sequencing, broadcast, replicated execution and crash recovery.

mod clock;
mod durable;
mod network;
mod replica;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use clock::{CostModel, Timing};
pub use durable::{log_path, DurableNode, EngineCheckpoint, Recovery};
pub use network::{DelayModel, SimulatedNetwork};
pub use replica::{Cluster, Replica, ReplicaOutcome, RunReport};

use crate::block::{Block, Digest, Transaction, ZERO_DIGEST};
use crate::exec::EngineKind;
use crate::harmony::HarmonyOptions;
use crate::program::Step;
use crate::storage::DEFAULT_CHECKPOINT_INTERVAL;
use crate::types::{BlockId, Tid};
use crate::Error;

/// Assigns TIDs in arrival order and cuts hash-linked blocks.
#[derive(Debug)]
pub struct Sequencer {
    block_size: usize,
    next_tid: Tid,
    next_block: BlockId,
    prev_hash: Digest,
    pending: VecDeque<(Tid, Vec<Step>)>,
}

impl Sequencer {
    pub fn new(block_size: usize) -> Self {
        assert!(block_size > 0, "block size must be positive");
        Sequencer { block_size, next_tid: Tid(0), next_block: BlockId(0), prev_hash: ZERO_DIGEST, pending: VecDeque::new() }
    }

    pub fn submit(&mut self, steps: Vec<Step>) -> Tid {
        let tid = self.next_tid;
        self.next_tid = tid.next();
        self.pending.push_back((tid, steps));
        tid
    }

    /// The next full block, if enough transactions are waiting.
    pub fn poll_block(&mut self) -> Option<Block> {
        (self.pending.len() >= self.block_size).then(|| self.cut(self.block_size))
    }

    /// Seals whatever is pending into a (possibly short) block.
    pub fn flush(&mut self) -> Option<Block> {
        (!self.pending.is_empty()).then(|| self.cut(self.pending.len()))
    }

    fn cut(&mut self, n: usize) -> Block {
        let id = self.next_block;
        let txns = self.pending.drain(..n).map(|(tid, steps)| Transaction::new(tid, id, steps)).collect();
        let block = Block::seal(id, txns, self.prev_hash).expect("sequencer tids are contiguous");
        self.prev_hash = block.hash;
        self.next_block = BlockId(id.0 + 1);
        block
    }

    /// Sequences a whole batch: full blocks plus a trailing short one.
    pub fn sequence_all(block_size: usize, programs: impl IntoIterator<Item = Vec<Step>>) -> Vec<Block> {
        let mut s = Sequencer::new(block_size);
        let mut out = Vec::new();
        for p in programs {
            s.submit(p);
            out.extend(s.poll_block());
        }
        out.extend(s.flush());
        out
    }
}

/// Run configuration, loadable from JSON. Missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub replicas: usize,
    pub block_size: usize,
    /// Upper bound of the uniform per-block delivery delay.
    pub delay_max: u64,
    pub seed: u64,
    pub engine: String,
    pub inter_block: bool,
    pub update_optim: bool,
    pub checkpoint_p: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            replicas: 1,
            block_size: 100,
            delay_max: 0,
            seed: 0,
            engine: "harmony".into(),
            inter_block: false,
            update_optim: true,
            checkpoint_p: DEFAULT_CHECKPOINT_INTERVAL,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), Error> {
        if self.replicas == 0 || self.block_size == 0 || self.checkpoint_p == 0 {
            return Err(Error::Config("replicas, block_size and checkpoint_p must be positive".into()));
        }
        self.engine_kind().map(|_| ())
    }

    pub fn engine_kind(&self) -> Result<EngineKind, Error> {
        let opts = HarmonyOptions { inter_block: self.inter_block, update_optim: self.update_optim };
        Ok(self.engine.parse::<EngineKind>()?.with_options(opts))
    }

    pub fn network(&self) -> SimulatedNetwork {
        let delay = if self.delay_max == 0 { DelayModel::Zero } else { DelayModel::Uniform { max: self.delay_max } };
        SimulatedNetwork::new(self.seed, delay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::CommandKind;
    use crate::storage::verify_chain;
    use crate::types::Key;

    fn prog(i: i64) -> Vec<Step> {
        vec![Step::update(&Key::new("k").unwrap(), CommandKind::Add(i))]
    }

    #[test]
    fn sequencer_cuts_linked_blocks() {
        let blocks = Sequencer::sequence_all(4, (0..10).map(prog));
        assert_eq!(blocks.iter().map(|b| b.txns.len()).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert_eq!(verify_chain(&blocks), None);
        let tids: Vec<u64> = blocks.iter().flat_map(|b| b.txns.iter().map(|t| t.tid.0)).collect();
        assert_eq!(tids, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn poll_waits_for_a_full_block() {
        let mut s = Sequencer::new(3);
        assert_eq!(s.submit(prog(1)), Tid(0));
        assert!(s.poll_block().is_none());
        s.submit(prog(2));
        s.submit(prog(3));
        assert_eq!(s.poll_block().unwrap().id, BlockId(0));
        assert!(s.flush().is_none());
    }

    #[test]
    fn config_json() {
        let cfg = PipelineConfig::from_json(r#"{"replicas": 4, "engine": "aria", "delay_max": 7}"#).unwrap();
        assert_eq!(cfg.replicas, 4);
        assert_eq!(cfg.block_size, 100);
        assert_eq!(cfg.engine_kind().unwrap().name(), "aria");
        assert_eq!(cfg.network().delay, DelayModel::Uniform { max: 7 });
        assert!(PipelineConfig::from_json(r#"{"engine": "nope"}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"replicas": 0}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"replica": 2}"#).is_err());
    }
}
