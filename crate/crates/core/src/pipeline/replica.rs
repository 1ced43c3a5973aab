//! Replicas fed by the simulated network, driven in virtual time.

use std::collections::{BTreeMap, VecDeque};

use super::clock::{CostModel, Timing};
use super::network::SimulatedNetwork;
use crate::block::{Block, Digest};
use crate::exec::{BlockResult, EngineKind, Executor, SimulatedBlock};
use crate::par;
use crate::storage::{ChainLog, SnapshotStore, State};
use crate::types::BlockId;
use crate::Error;

/// One replica: an engine plus its own copy of the chain.
#[derive(Debug)]
pub struct Replica {
    pub exec: Executor,
    pub log: ChainLog,
}

impl Replica {
    pub fn new(kind: EngineKind, genesis: State) -> Self {
        Replica { exec: Executor::new(kind, SnapshotStore::with_genesis(genesis)), log: ChainLog::in_memory() }
    }

    /// Appends a delivered block; a block that does not extend the chain is
    /// refused.
    pub fn receive(&mut self, block: Block) -> Result<(), Error> {
        self.log.append_block(block)
    }
}

#[derive(Debug, Clone)]
pub struct ReplicaOutcome {
    /// State hash after each committed block.
    pub hashes: Vec<Digest>,
    pub results: Vec<BlockResult>,
    pub timings: Vec<Timing>,
    /// Why the replica stopped early, if it did.
    pub halted: Option<Error>,
}

impl ReplicaOutcome {
    /// Virtual time at which the last block committed.
    pub fn makespan(&self) -> u64 {
        self.timings.last().map_or(0, |t| t.commit_end)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub replicas: Vec<ReplicaOutcome>,
}

impl RunReport {
    /// `[replica][block]` state hashes.
    pub fn hash_matrix(&self) -> Vec<Vec<Digest>> {
        self.replicas.iter().map(|r| r.hashes.clone()).collect()
    }

    /// Whether every replica that did not halt agrees on every block.
    pub fn consistent(&self) -> bool {
        let mut live = self.replicas.iter().filter(|r| r.halted.is_none());
        match live.next() {
            None => true,
            Some(first) => live.all(|r| r.hashes == first.hashes),
        }
    }
}

/// A set of replicas processing the same block stream.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub kind: EngineKind,
    pub replicas: usize,
    pub genesis: State,
    pub network: SimulatedNetwork,
    pub cost: CostModel,
    /// Latest virtual time by which every block must be committed.
    pub horizon: u64,
    arrivals: Option<Vec<Vec<u64>>>,
    tampered: BTreeMap<(usize, BlockId), Block>,
}

impl Cluster {
    pub fn new(kind: EngineKind, replicas: usize, genesis: State) -> Self {
        Cluster {
            kind,
            replicas,
            genesis,
            network: SimulatedNetwork::instant(),
            cost: CostModel::default(),
            horizon: u64::MAX,
            arrivals: None,
            tampered: BTreeMap::new(),
        }
    }

    pub fn with_network(mut self, network: SimulatedNetwork) -> Self {
        self.network = network;
        self
    }

    pub fn with_cost(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    /// Fixed `[replica][block]` arrival times instead of the network's.
    pub fn with_arrivals(mut self, arrivals: Vec<Vec<u64>>) -> Self {
        self.arrivals = Some(arrivals);
        self
    }

    /// Delivers `block` instead of the sequenced block with the same id to
    /// one replica.
    pub fn tamper(mut self, replica: usize, block: Block) -> Self {
        self.tampered.insert((replica, block.id), block);
        self
    }

    pub fn run(&self, blocks: &[Block]) -> Result<RunReport, Error> {
        let arrivals = match &self.arrivals {
            Some(a) if a.len() != self.replicas || a.iter().any(|r| r.len() < blocks.len()) => {
                return Err(Error::Config("arrival schedule does not cover every replica and block".into()))
            }
            Some(a) => a.clone(),
            None => self.network.arrivals(self.replicas, blocks.len()),
        };
        let ids: Vec<usize> = (0..self.replicas).collect();
        let outcomes = par::map(&ids, |&r| self.run_one(r, blocks, &arrivals[r]));
        let replicas = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(RunReport { replicas })
    }

    fn run_one(&self, idx: usize, blocks: &[Block], arrivals: &[u64]) -> Result<ReplicaOutcome, Error> {
        let mut rep = Replica::new(self.kind, self.genesis.clone());
        let lag = self.kind.snapshot_lag() as usize;
        let mut out = ReplicaOutcome { hashes: Vec::new(), results: Vec::new(), timings: Vec::new(), halted: None };
        let mut timings: Vec<Timing> = arrivals.iter().map(|&arrival| Timing { arrival, ..Timing::default() }).collect();
        let mut simulated: VecDeque<SimulatedBlock> = VecDeque::new();
        let (mut next_sim, mut next_commit) = (0usize, 0usize);

        while next_commit < blocks.len() {
            // Earliest virtual start of each phase that is ready to run.
            let sim_ready = (next_sim < blocks.len() && next_sim < next_commit + lag).then(|| {
                let prev_sim = next_sim.checked_sub(1).map_or(0, |p| timings[p].sim_end);
                let dep = (next_sim + 1).checked_sub(lag + 1).map_or(0, |p| timings[p].commit_end);
                timings[next_sim].arrival.max(prev_sim).max(dep)
            });
            let commit_ready = (next_commit < next_sim).then(|| {
                let prev = next_commit.checked_sub(1).map_or(0, |p| timings[p].commit_end);
                timings[next_commit].sim_end.max(prev)
            });
            let run_commit = match (sim_ready, commit_ready) {
                (Some(s), Some(c)) => c <= s,
                (None, Some(_)) => true,
                (Some(_), None) => false,
                (None, None) => unreachable!("one phase is always ready"),
            };

            if run_commit {
                let i = next_commit;
                let sim = simulated.pop_front().expect("simulated before commit");
                let block = rep.log.get(blocks[i].id).expect("received").clone();
                let result = rep.exec.commit(&block, Some(sim))?;
                let t = &mut timings[i];
                t.commit_start = commit_ready.expect("ready");
                t.commit_end = t.commit_start + self.cost.commit(self.kind, &block, &result);
                if t.commit_end > self.horizon {
                    return Err(Error::Liveness);
                }
                out.hashes.push(rep.exec.state_hash());
                out.results.push(result);
                next_commit += 1;
            } else {
                let i = next_sim;
                let delivered = self.tampered.get(&(idx, blocks[i].id)).unwrap_or(&blocks[i]).clone();
                if let Err(e) = rep.receive(delivered) {
                    out.halted = Some(e);
                    break;
                }
                let block = rep.log.get(blocks[i].id).expect("just appended");
                simulated.push_back(rep.exec.simulate(block)?);
                let t = &mut timings[i];
                t.sim_start = sim_ready.expect("ready");
                t.sim_end = t.sim_start + self.cost.simulate(self.kind, block);
                next_sim += 1;
            }
        }
        timings.truncate(next_commit);
        out.timings = timings;
        Ok(out)
    }
}
