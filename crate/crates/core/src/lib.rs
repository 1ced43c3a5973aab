//! Abort-minimizing deterministic concurrency control for order-execute
//! replicated ledgers.
//!
//! Replicas receive the same ordered blocks of transaction programs and must
//! reach byte-identical states. The [`harmony`] engine simulates every
//! transaction of a block against a block snapshot, aborts only the middle
//! transaction of backward dangerous structures in the rw-dependency graph,
//! and commits everything else in parallel by reordering and coalescing
//! update commands per key.
//!
//! Around the engine sit the [`storage`] layer (block snapshots, the
//! hash-chained input log, checkpoints), [`baselines`] that reproduce the
//! abort rules of stale-read and write-write validators, a seeded
//! [`pipeline`] of replicas behind a simulated network, [`workloads`], a
//! brute-force [`oracle`], and the [`bench`] harness.

pub mod baselines;
pub mod bench;
pub mod block;
pub mod command;
pub mod exec;
pub mod harmony;
pub mod oracle;
pub mod pipeline;
pub mod program;
pub mod storage;
pub mod types;
pub mod workloads;

mod par;

pub use block::{Block, Digest, Transaction, TxnStatus};
pub use command::{apply_command, compose, CommandKind, Composite, UpdateCommand};
pub use exec::{BlockResult, EngineKind, Executor};
pub use harmony::HarmonyOptions;
pub use types::{BlockId, Key, Snapshot, Tid, Value};

use types::Snapshot as Snap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("keys must be non-empty")]
    EmptyKey,
    #[error("64-bit arithmetic overflow while applying an update command")]
    Overflow,
    #[error("cannot compose an empty command list")]
    EmptyCompose,
    #[error("branch at step {at} jumps to {target}, past the end of the program")]
    BadBranch { at: usize, target: usize },
    #[error("register {0} read before it was written")]
    BadRegister(usize),
    #[error("block {0} has non-contiguous or foreign transaction ids")]
    NonContiguousTids(BlockId),
    #[error("snapshot {requested} is newer than the head {head}")]
    SnapshotNotReady { requested: Snap, head: Snap },
    #[error("snapshot {0} was pruned")]
    SnapshotPruned(Snap),
    #[error("block {got} installed out of order, expected {expected}")]
    OutOfOrderInstall { expected: BlockId, got: BlockId },
    #[error("block {got} appended out of order, expected {expected}")]
    OutOfOrderAppend { expected: BlockId, got: BlockId },
    #[error("hash link of block {0} does not match")]
    HashLinkMismatch(BlockId),
    #[error("hash chain broken at block {0}")]
    ChainBroken(BlockId),
    #[error("log line {line} is malformed: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("checkpoint is unusable: {0}")]
    CorruptCheckpoint(String),
    #[error("log is missing block {0} needed for recovery")]
    MissingLogSegment(BlockId),
    #[error("block {got} committed out of order, expected {expected}")]
    OutOfOrderCommit { expected: BlockId, got: BlockId },
    #[error("replica stalled past the event horizon")]
    Liveness,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
