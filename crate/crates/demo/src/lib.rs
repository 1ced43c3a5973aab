//! Browser demo: inspect one block, sweep skew, sweep hotspot probability.
//! Every export returns a JSON string.

use serde_json::{json, Value as Json};
use wasm_bindgen::prelude::*;

use harmony_core::bench::{run_experiment, Experiment};
use harmony_core::pipeline::Sequencer;
use harmony_core::storage::SnapshotStore;
use harmony_core::workloads::{generate, genesis, WorkloadKind, WorkloadSpec};
use harmony_core::{EngineKind, Executor, HarmonyOptions};

const ENGINES: [&str; 3] = ["harmony", "fabric", "aria"];

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn engine(name: &str, inter_block: bool) -> Result<EngineKind, JsValue> {
    let kind: EngineKind = name.parse().map_err(err)?;
    Ok(kind.with_options(HarmonyOptions { inter_block, update_optim: true }))
}

fn workload(name: &str) -> Result<WorkloadKind, JsValue> {
    name.parse().map_err(err)
}

/// Runs one small YCSB block and returns its transactions, rw edges and
/// verdicts.
#[wasm_bindgen]
pub fn inspect_block(engine_name: &str, txns: usize, keys: u32, theta: f64, seed: u32) -> Result<String, JsValue> {
    let spec = WorkloadSpec { keys: keys.max(1) as u64, ops_per_txn: 4, theta, seed: seed as u64, ..WorkloadSpec::default() };
    spec.check().map_err(err)?;
    let size = txns.clamp(1, 64);
    let block = Sequencer::sequence_all(size, generate(&spec, size).map_err(err)?).remove(0);
    let mut exec = Executor::new(engine(engine_name, false)?, SnapshotStore::with_genesis(genesis(&spec)));
    let r = exec.process_block(&block).map_err(err)?;

    let txns: Vec<Json> = r
        .traces
        .iter()
        .map(|t| {
            let status = if r.aborted.contains(&t.tid) { "aborted" } else { "committed" };
            json!({
                "tid": t.tid.0,
                "reads": t.read_keys().iter().map(|k| k.as_str()).collect::<Vec<_>>(),
                "writes": t.write_keys().iter().map(|k| k.as_str()).collect::<Vec<_>>(),
                "status": status,
                "hit": r.hits.contains(&t.tid),
            })
        })
        .collect();
    let edges: Vec<Json> = r.edges.iter().map(|e| json!({ "from": e.from.0, "to": e.to.0 })).collect();
    let order: serde_json::Map<String, Json> = r
        .applied_order
        .iter()
        .filter(|(_, tids)| tids.len() > 1)
        .map(|(k, tids)| (k.as_str().to_string(), json!(tids.iter().map(|t| t.0).collect::<Vec<_>>())))
        .collect();
    Ok(json!({
        "engine": engine_name,
        "committed": r.committed.len(),
        "aborted": r.aborted.len(),
        "txns": txns,
        "edges": edges,
        "applied_order": order,
    })
    .to_string())
}

fn abort_rate(engine: EngineKind, spec: WorkloadSpec, txns: usize, block_size: usize) -> Result<f64, JsValue> {
    let mut exp = Experiment::new(engine, spec);
    exp.txns = txns.max(1);
    exp.block_size = block_size.max(1);
    Ok(run_experiment(&exp).map_err(err)?.metrics.abort_rate)
}

/// Abort rate of each engine at each skew level.
#[wasm_bindgen]
pub fn theta_sweep(workload_name: &str, txns: usize, block_size: usize, seed: u32) -> Result<String, JsValue> {
    let kind = workload(workload_name)?;
    let thetas = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let mut series = serde_json::Map::new();
    for name in ENGINES {
        let rates = thetas
            .iter()
            .map(|&theta| {
                let spec = WorkloadSpec { kind, theta, seed: seed as u64, ..WorkloadSpec::default() };
                abort_rate(engine(name, false)?, spec, txns, block_size)
            })
            .collect::<Result<Vec<_>, _>>()?;
        series.insert(name.to_string(), json!(rates));
    }
    Ok(json!({ "x": thetas, "series": series }).to_string())
}

/// Abort rate of each engine as the hotspot probability grows.
#[wasm_bindgen]
pub fn hotspot_sweep(txns: usize, block_size: usize, seed: u32) -> Result<String, JsValue> {
    let probs = [0.0, 0.1, 0.25, 0.5, 0.75, 1.0];
    let mut series = serde_json::Map::new();
    for name in ENGINES {
        let rates = probs
            .iter()
            .map(|&p| abort_rate(engine(name, false)?, WorkloadSpec::hotspot(p, seed as u64), txns, block_size))
            .collect::<Result<Vec<_>, _>>()?;
        series.insert(name.to_string(), json!(rates));
    }
    Ok(json!({ "x": probs, "series": series }).to_string())
}
