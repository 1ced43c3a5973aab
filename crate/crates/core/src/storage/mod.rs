//! Block-snapshot storage, the hash-chained input log, and checkpoints.

mod chain;
mod checkpoint;
mod snapshot;

pub use chain::{read_log, verify_chain, ChainLog};
pub use checkpoint::{Checkpoint, CheckpointDir, CheckpointMarker, DEFAULT_CHECKPOINT_INTERVAL};
pub use snapshot::{hash_state, SnapshotStore, State};
