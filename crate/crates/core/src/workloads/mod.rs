//! Deterministic workload generators.
//!
//! Every generator is a pure function of its [`WorkloadSpec`] (seed
//! included), so all replicas and reruns see the same transaction stream.

pub mod smallbank;
pub mod zipf;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::command::CommandKind;
use crate::program::Step;
use crate::storage::State;
use crate::types::Key;
use crate::Error;

pub use smallbank::{Procedure, SmallbankGen};
pub use zipf::ZipfSampler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WorkloadKind {
    Ycsb,
    Smallbank,
    YcsbHotspot,
}

impl WorkloadKind {
    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::Ycsb => "ycsb",
            WorkloadKind::Smallbank => "smallbank",
            WorkloadKind::YcsbHotspot => "hotspot",
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "ycsb" => Ok(WorkloadKind::Ycsb),
            "smallbank" => Ok(WorkloadKind::Smallbank),
            "hotspot" => Ok(WorkloadKind::YcsbHotspot),
            other => Err(Error::Config(format!("unknown workload {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    /// Keys for YCSB, accounts for Smallbank.
    pub keys: u64,
    pub ops_per_txn: usize,
    pub read_ratio: f64,
    pub theta: f64,
    pub hotspot_fraction: f64,
    pub hotspot_prob: f64,
    /// Relative weights of the six Smallbank procedures.
    pub smallbank_mix: [u32; 6],
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            kind: WorkloadKind::Ycsb,
            keys: 10_000,
            ops_per_txn: 10,
            read_ratio: 0.5,
            theta: 0.0,
            hotspot_fraction: 0.01,
            hotspot_prob: 0.0,
            smallbank_mix: [1; 6],
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn ycsb(theta: f64, seed: u64) -> Self {
        WorkloadSpec { theta, seed, ..Default::default() }
    }

    pub fn smallbank(theta: f64, seed: u64) -> Self {
        WorkloadSpec { kind: WorkloadKind::Smallbank, theta, seed, ..Default::default() }
    }

    pub fn hotspot(hotspot_prob: f64, seed: u64) -> Self {
        WorkloadSpec { kind: WorkloadKind::YcsbHotspot, hotspot_prob, seed, ..Default::default() }
    }

    pub fn check(&self) -> Result<(), Error> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.keys == 0 {
            return Err(Error::Config("keys must be positive".into()));
        }
        if self.kind == WorkloadKind::Smallbank && self.keys < 2 {
            return Err(Error::Config("smallbank needs at least two accounts".into()));
        }
        if self.ops_per_txn == 0 {
            return Err(Error::Config("ops_per_txn must be positive".into()));
        }
        if !unit(self.theta) || !unit(self.read_ratio) || !unit(self.hotspot_prob) || !unit(self.hotspot_fraction) {
            return Err(Error::Config("theta, read_ratio and hotspot settings must lie in [0, 1]".into()));
        }
        if self.smallbank_mix.iter().all(|w| *w == 0) {
            return Err(Error::Config("smallbank mix has no positive weight".into()));
        }
        Ok(())
    }

    /// Number of hotspot keys: at least one.
    pub fn hotspot_keys(&self) -> u64 {
        ((self.keys as f64 * self.hotspot_fraction).round() as u64).clamp(1, self.keys)
    }
}

pub fn ycsb_key(rank: u64) -> Key {
    Key::new(format!("user{rank:05}")).expect("non-empty")
}

/// A transaction stream for `spec`.
pub fn generator(spec: &WorkloadSpec) -> Result<Box<dyn Iterator<Item = Vec<Step>> + Send>, Error> {
    spec.check()?;
    Ok(match spec.kind {
        WorkloadKind::Ycsb | WorkloadKind::YcsbHotspot => Box::new(YcsbGen::new(spec.clone())),
        WorkloadKind::Smallbank => Box::new(SmallbankGen::new(spec.clone())),
    })
}

/// The first `count` programs of the stream.
pub fn generate(spec: &WorkloadSpec, count: usize) -> Result<Vec<Vec<Step>>, Error> {
    Ok(generator(spec)?.take(count).collect())
}

/// Initial database contents. YCSB starts empty (absent keys read as zero).
pub fn genesis(spec: &WorkloadSpec) -> State {
    match spec.kind {
        WorkloadKind::Smallbank => smallbank::genesis(spec.keys),
        _ => State::new(),
    }
}

/// YCSB-style generator; with `kind == YcsbHotspot` each step goes to a
/// hotspot key with probability `hotspot_prob`.
pub struct YcsbGen {
    spec: WorkloadSpec,
    zipf: ZipfSampler,
    rng: ChaCha8Rng,
}

impl YcsbGen {
    pub fn new(spec: WorkloadSpec) -> Self {
        let zipf = ZipfSampler::new(spec.keys, spec.theta);
        let rng = ChaCha8Rng::seed_from_u64(spec.seed);
        YcsbGen { spec, zipf, rng }
    }

    fn step(&mut self) -> Step {
        let hot = self.spec.kind == WorkloadKind::YcsbHotspot
            && self.spec.hotspot_prob > 0.0
            && self.rng.gen_bool(self.spec.hotspot_prob);
        if hot {
            // the read-modify-write is fused into one blind Add
            let rank = self.rng.gen_range(0..self.spec.hotspot_keys());
            return Step::update(&ycsb_key(rank), CommandKind::Add(self.rng.gen_range(1..=10)));
        }
        let key = ycsb_key(self.zipf.sample(&mut self.rng));
        if self.rng.gen_bool(self.spec.read_ratio) {
            Step::read(&key)
        } else {
            Step::update(&key, CommandKind::Add(self.rng.gen_range(1..=10)))
        }
    }
}

impl Iterator for YcsbGen {
    type Item = Vec<Step>;

    fn next(&mut self) -> Option<Vec<Step>> {
        Some((0..self.spec.ops_per_txn).map(|_| self.step()).collect())
    }
}
