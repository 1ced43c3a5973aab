//! Virtual-clock cost model.
//!
//! Throughput is measured in virtual time so results do not depend on the
//! host machine. Simulation spreads transactions over a fixed worker pool,
//! commit is charged per transaction validated and per key installed. The
//! serial engine does all its work in the commit phase on one worker.

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineKind;
use crate::block::Block;
use crate::exec::{BlockResult, EngineKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub workers: usize,
    pub step_cost: u64,
    pub txn_overhead: u64,
    pub validate_cost: u64,
    pub apply_cost: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { workers: 8, step_cost: 10, txn_overhead: 5, validate_cost: 2, apply_cost: 3 }
    }
}

impl CostModel {
    fn txn_cost(&self, steps: usize) -> u64 {
        self.txn_overhead + self.step_cost * steps as u64
    }

    /// Makespan of simulating `block`, assigning each transaction in TID
    /// order to the least-loaded worker.
    pub fn simulate(&self, kind: EngineKind, block: &Block) -> u64 {
        if kind == EngineKind::Baseline(BaselineKind::Serial) {
            return 0;
        }
        let mut bins = vec![0u64; self.workers.max(1)];
        for t in &block.txns {
            let slot = bins.iter_mut().min().expect("at least one worker");
            *slot += self.txn_cost(t.steps.len());
        }
        bins.into_iter().max().unwrap_or(0)
    }

    pub fn commit(&self, kind: EngineKind, block: &Block, result: &BlockResult) -> u64 {
        let install = self.apply_cost * result.writes.len() as u64;
        if kind == EngineKind::Baseline(BaselineKind::Serial) {
            return block.txns.iter().map(|t| self.txn_cost(t.steps.len())).sum::<u64>() + install;
        }
        self.validate_cost * result.txn_count() as u64 + install
    }
}

/// Virtual times of one block's two phases at one replica.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub arrival: u64,
    pub sim_start: u64,
    pub sim_end: u64,
    pub commit_start: u64,
    pub commit_end: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::Transaction;
    use crate::command::CommandKind;
    use crate::program::Step;
    use crate::storage::SnapshotStore;
    use crate::types::{BlockId, Key, Tid};
    use crate::Executor;

    fn block(n: u64) -> Block {
        let k = Key::new("k").unwrap();
        let txns = (0..n).map(|i| Transaction::new(Tid(i), BlockId(0), vec![Step::update(&k, CommandKind::Add(1))])).collect();
        Block::seal(BlockId(0), txns, crate::block::ZERO_DIGEST).unwrap()
    }

    #[test]
    fn simulation_spreads_over_workers() {
        let m = CostModel { workers: 4, ..CostModel::default() };
        let one = m.txn_cost(1);
        assert_eq!(m.simulate(EngineKind::harmony(), &block(4)), one);
        assert_eq!(m.simulate(EngineKind::harmony(), &block(5)), 2 * one);
        assert_eq!(m.simulate("serial".parse().unwrap(), &block(5)), 0);
    }

    #[test]
    fn serial_pays_everything_at_commit() {
        let m = CostModel::default();
        let b = block(6);
        let serial: EngineKind = "serial".parse().unwrap();
        let r = Executor::new(serial, SnapshotStore::new()).process_block(&b).unwrap();
        assert_eq!(m.commit(serial, &b, &r), 6 * m.txn_cost(1) + m.apply_cost);
        let r = Executor::new(EngineKind::harmony(), SnapshotStore::new()).process_block(&b).unwrap();
        assert_eq!(m.commit(EngineKind::harmony(), &b, &r), 6 * m.validate_cost + m.apply_cost);
    }
}
