//! Experiment runner: metrics, CSV rows, run comparison and plot data.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use std::path::PathBuf;

use crate::block::Block;
use crate::exec::{BlockResult, EngineKind};
use crate::harmony::HarmonyOptions;
use crate::oracle;
use crate::par;
use crate::pipeline::{Cluster, CostModel, DurableNode, Sequencer, SimulatedNetwork};
use crate::storage::State;
use crate::workloads::{generate, genesis, WorkloadKind, WorkloadSpec};
use crate::Error;

/// Virtual time units per second.
pub const TICKS_PER_SECOND: f64 = 1_000_000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub engine: EngineKind,
    pub workload: WorkloadSpec,
    pub txns: usize,
    pub block_size: usize,
    pub replicas: usize,
    pub network: SimulatedNetwork,
    pub cost: CostModel,
    /// Check every block with the oracle and measure false aborts.
    pub oracle_check: bool,
    /// Also run a durable node writing its log and checkpoints here.
    pub log_dir: Option<PathBuf>,
    pub checkpoint_p: u64,
}

impl Experiment {
    pub fn new(engine: EngineKind, workload: WorkloadSpec) -> Self {
        Experiment {
            engine,
            workload,
            txns: 10_000,
            block_size: 100,
            replicas: 1,
            network: SimulatedNetwork::instant(),
            cost: CostModel::default(),
            oracle_check: false,
            log_dir: None,
            checkpoint_p: crate::storage::DEFAULT_CHECKPOINT_INTERVAL,
        }
    }

    pub fn check(&self) -> Result<(), Error> {
        self.workload.check()?;
        if self.txns == 0 || self.block_size == 0 || self.replicas == 0 {
            return Err(Error::Config("txns, block size and replicas must be positive".into()));
        }
        Ok(())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub engine: String,
    pub workload: String,
    pub theta: f64,
    pub block_size: usize,
    pub inter_block: bool,
    pub update_optim: bool,
    pub committed: usize,
    pub aborted: usize,
    pub abort_rate: f64,
    /// Only measured with the oracle on.
    pub false_abort_rate: Option<f64>,
    pub hit_rate: f64,
    pub wall_time: f64,
    pub commits_per_second: f64,
    pub blocks: usize,
    pub hotspot_prob: f64,
}

impl RunMetrics {
    /// Engine name plus the Harmony switches that differ from the default.
    pub fn label(&self) -> String {
        let mut s = self.engine.clone();
        if self.engine == "harmony" {
            if self.inter_block {
                s.push_str("+inter");
            }
            if !self.update_optim {
                s.push_str("-optim");
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub metrics: RunMetrics,
    /// Replica 0's per-block results.
    pub results: Vec<BlockResult>,
    /// Invariant violations found (replica divergence, oracle failures).
    pub violations: Vec<String>,
}

fn options(engine: EngineKind) -> HarmonyOptions {
    match engine {
        EngineKind::Harmony(o) => o,
        EngineKind::Baseline(_) => HarmonyOptions { inter_block: false, update_optim: false },
    }
}

pub fn run_experiment(exp: &Experiment) -> Result<Outcome, Error> {
    exp.check()?;
    let started = now();
    let blocks = Sequencer::sequence_all(exp.block_size, generate(&exp.workload, exp.txns)?);
    let gen = genesis(&exp.workload);
    let report = Cluster::new(exp.engine, exp.replicas, gen.clone())
        .with_network(exp.network.clone())
        .with_cost(exp.cost)
        .run(&blocks)?;
    let mut violations = Vec::new();
    if !report.consistent() {
        violations.push("replicas diverged".to_string());
    }
    let lead = report.replicas.into_iter().next().expect("at least one replica");
    if let Some(e) = &lead.halted {
        return Err(e.clone());
    }

    let committed: usize = lead.results.iter().map(|r| r.committed.len()).sum();
    let aborted: usize = lead.results.iter().map(|r| r.aborted.len()).sum();
    let processed = committed + aborted;
    if processed != exp.txns {
        violations.push(format!("{processed} transactions processed, {} submitted", exp.txns));
    }
    let false_abort_rate = exp.oracle_check.then(|| {
        let n: usize = lead.results.iter().map(|r| oracle::false_aborts(r).len()).sum();
        ratio(n, processed)
    });
    if exp.oracle_check {
        violations.extend(oracle_violations(&blocks, &lead.results, &gen, options(exp.engine).inter_block));
    }
    if let Some(dir) = &exp.log_dir {
        let mut node = DurableNode::create(dir, exp.engine, gen.clone(), exp.checkpoint_p)?;
        for b in &blocks {
            node.process(b)?;
        }
        if lead.hashes.last() != Some(&node.state_hash()) {
            violations.push("durable node diverged".to_string());
        }
    }
    let makespan = lead.makespan();
    let opts = options(exp.engine);
    let metrics = RunMetrics {
        engine: exp.engine.name().to_string(),
        workload: exp.workload.kind.name().to_string(),
        theta: exp.workload.theta,
        block_size: exp.block_size,
        inter_block: opts.inter_block,
        update_optim: opts.update_optim,
        committed,
        aborted,
        abort_rate: ratio(aborted, processed),
        false_abort_rate,
        hit_rate: oracle::hit_rate(&lead.results),
        wall_time: elapsed(started),
        commits_per_second: if makespan == 0 { 0.0 } else { committed as f64 * TICKS_PER_SECOND / makespan as f64 },
        blocks: blocks.len(),
        hotspot_prob: if exp.workload.kind == WorkloadKind::YcsbHotspot { exp.workload.hotspot_prob } else { 0.0 },
    };
    Ok(Outcome { metrics, results: lead.results, violations })
}

/// Runs independent experiments, concurrently when `parallel` is set and
/// the crate was built with thread support.
pub fn run_grid(exps: &[Experiment], parallel: bool) -> Vec<Result<Outcome, Error>> {
    if parallel {
        par::map(exps, run_experiment)
    } else {
        exps.iter().map(run_experiment).collect()
    }
}

fn oracle_violations(blocks: &[Block], results: &[BlockResult], genesis: &State, whole_history: bool) -> Vec<String> {
    if whole_history {
        let window: Vec<_> = blocks.iter().zip(results).collect();
        return if oracle::serial_equivalence(&window, genesis) {
            Vec::new()
        } else {
            vec!["history is not serializable".to_string()]
        };
    }
    let mut state = genesis.clone();
    let mut out = Vec::new();
    for (b, r) in blocks.iter().zip(results) {
        if !oracle::serial_equivalence(&[(b, r)], &state) {
            out.push(format!("block {} is not serializable", b.id));
        }
        state.extend(r.writes.iter().map(|(k, v)| (k.clone(), *v)));
    }
    out
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

#[cfg(not(target_arch = "wasm32"))]
type Instant = std::time::Instant;
#[cfg(target_arch = "wasm32")]
type Instant = ();

#[cfg(not(target_arch = "wasm32"))]
fn now() -> Instant {
    std::time::Instant::now()
}

#[cfg(not(target_arch = "wasm32"))]
fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

// No monotonic clock on wasm32-unknown-unknown.
#[cfg(target_arch = "wasm32")]
fn now() -> Instant {}

#[cfg(target_arch = "wasm32")]
fn elapsed(_: Instant) -> f64 {
    0.0
}

pub fn write_csv<W: Write>(rows: &[RunMetrics], out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunMetrics>, Error> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Rows of several runs at one `(workload, theta, block_size)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub workload: String,
    pub theta: f64,
    pub block_size: usize,
    /// `(label, abort_rate)`, lowest first.
    pub by_abort_rate: Vec<(String, f64)>,
    /// `(label, commits_per_second)`, highest first.
    pub by_throughput: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub points: Vec<GridPoint>,
}

type GridKey = (String, u64, usize);

fn grid_key(r: &RunMetrics) -> GridKey {
    (r.workload.clone(), r.theta.to_bits(), r.block_size)
}

/// Joins tables on `(workload, theta, block_size)`; only points present in
/// every table are reported.
pub fn compare(tables: &[Vec<RunMetrics>]) -> Comparison {
    let mut joined: BTreeMap<GridKey, Vec<&RunMetrics>> = BTreeMap::new();
    for r in tables.iter().flatten() {
        joined.entry(grid_key(r)).or_default().push(r);
    }
    let points = joined
        .into_iter()
        .filter(|(k, _)| tables.iter().all(|t| t.iter().any(|r| &grid_key(r) == k)))
        .map(|((workload, theta, block_size), rows)| {
            let mut by_abort_rate: Vec<(String, f64)> = rows.iter().map(|r| (r.label(), r.abort_rate)).collect();
            by_abort_rate.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            let mut by_throughput: Vec<(String, f64)> = rows.iter().map(|r| (r.label(), r.commits_per_second)).collect();
            by_throughput.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            GridPoint { workload, theta: f64::from_bits(theta), block_size, by_abort_rate, by_throughput }
        })
        .collect();
    Comparison { points }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.points.is_empty() {
            return writeln!(f, "no common grid");
        }
        let list = |xs: &[(String, f64)]| xs.iter().map(|(l, v)| format!("{l} {v:.4}")).collect::<Vec<_>>().join(" < ");
        for p in &self.points {
            writeln!(f, "{} theta={} block_size={}", p.workload, p.theta, p.block_size)?;
            writeln!(f, "  abort_rate: {}", list(&p.by_abort_rate))?;
            let tput = p.by_throughput.iter().map(|(l, v)| format!("{l} {v:.0}")).collect::<Vec<_>>().join(" > ");
            writeln!(f, "  commits/s:  {tput}")?;
        }
        Ok(())
    }
}

/// gnuplot data: one indexed data set per `(label, workload, block_size)`
/// with columns `theta abort_rate hit_rate commits_per_second`.
pub fn write_dat<W: Write>(rows: &[RunMetrics], mut out: W) -> Result<(), Error> {
    let mut series: BTreeMap<(String, String, usize), Vec<&RunMetrics>> = BTreeMap::new();
    for r in rows {
        series.entry((r.label(), r.workload.clone(), r.block_size)).or_default().push(r);
    }
    for (i, ((label, workload, bs), mut rs)) in series.into_iter().enumerate() {
        if i > 0 {
            out.write_all(b"\n\n")?;
        }
        rs.sort_by(|a, b| a.theta.total_cmp(&b.theta).then(a.hotspot_prob.total_cmp(&b.hotspot_prob)));
        writeln!(out, "# {label} {workload} block_size={bs}")?;
        writeln!(out, "# theta abort_rate hit_rate commits_per_second")?;
        for r in rs {
            let x = if r.workload == "hotspot" { r.hotspot_prob } else { r.theta };
            writeln!(out, "{x} {} {} {}", r.abort_rate, r.hit_rate, r.commits_per_second)?;
        }
    }
    Ok(())
}
