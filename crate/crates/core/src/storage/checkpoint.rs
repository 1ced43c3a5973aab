use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::snapshot::State;
use crate::block::sha256;
use crate::types::BlockId;
use crate::Error;

pub const DEFAULT_CHECKPOINT_INTERVAL: u64 = 10;

const MARKER_FILE: &str = "block_checkpoint_log.json";

/// Full state after `block`, plus whatever the engine needs to carry across
/// the block boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<C> {
    pub block: BlockId,
    pub carry: C,
    /// Value before `block` of each key that `block` wrote.
    pub prior: State,
    pub state: State,
}

#[derive(Serialize, Deserialize)]
struct Envelope<B> {
    body: B,
    checksum: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMarker {
    pub checkpoint_block: BlockId,
}

/// Directory of checkpoint files plus the marker naming the newest complete
/// one. A checkpoint is only named by the marker once its file is durable,
/// and the previous file is kept until then.
#[derive(Debug, Clone)]
pub struct CheckpointDir {
    dir: PathBuf,
}

impl CheckpointDir {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self, Error> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(CheckpointDir { dir: dir.as_ref().to_path_buf() })
    }

    pub fn file_for(&self, block: BlockId) -> PathBuf {
        self.dir.join(format!("checkpoint-{}.json", block.0))
    }

    fn marker_path(&self) -> PathBuf {
        self.dir.join(MARKER_FILE)
    }

    pub fn marker(&self) -> Result<Option<CheckpointMarker>, Error> {
        let p = self.marker_path();
        if !p.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(p)?;
        serde_json::from_str(&text).map(Some).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
    }

    /// Writes the checkpoint file. Does not publish it.
    pub fn write_file<C: Serialize>(&self, cp: &Checkpoint<C>) -> Result<PathBuf, Error> {
        let body = serde_json::to_string(cp).expect("checkpoint serializes");
        let checksum = hex::encode(sha256(&[body.as_bytes()]));
        let env = Envelope { body: cp, checksum };
        let path = self.file_for(cp.block);
        write_durably(&path, serde_json::to_string(&env).expect("envelope serializes").as_bytes())?;
        Ok(path)
    }

    /// Points the marker at `block`, then drops checkpoints older than the
    /// one it replaced.
    pub fn publish(&self, block: BlockId) -> Result<(), Error> {
        let previous = self.marker()?;
        let m = CheckpointMarker { checkpoint_block: block };
        write_durably(&self.marker_path(), serde_json::to_string(&m).expect("marker serializes").as_bytes())?;
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let name = entry.file_name();
            let Some(id) = name
                .to_str()
                .and_then(|n| n.strip_prefix("checkpoint-"))
                .and_then(|n| n.strip_suffix(".json"))
                .and_then(|n| n.parse::<u64>().ok())
            else {
                continue;
            };
            let keep = id == block.0 || previous.is_some_and(|p| p.checkpoint_block.0 == id);
            if !keep && id < block.0 {
                fs::remove_file(entry.path())?;
            }
        }
        Ok(())
    }

    pub fn save<C: Serialize>(&self, cp: &Checkpoint<C>) -> Result<(), Error> {
        self.write_file(cp)?;
        self.publish(cp.block)
    }

    pub fn load<C: Serialize + DeserializeOwned>(&self, block: BlockId) -> Result<Checkpoint<C>, Error> {
        let text = fs::read_to_string(self.file_for(block))?;
        let env: Envelope<Checkpoint<C>> = serde_json::from_str(&text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let body = serde_json::to_string(&env.body).expect("checkpoint serializes");
        if hex::encode(sha256(&[body.as_bytes()])) != env.checksum {
            return Err(Error::CorruptCheckpoint(format!("checksum mismatch for block {}", block.0)));
        }
        Ok(env.body)
    }

    /// The newest published checkpoint, if any.
    pub fn latest<C: Serialize + DeserializeOwned>(&self) -> Result<Option<Checkpoint<C>>, Error> {
        match self.marker()? {
            None => Ok(None),
            Some(m) => self.load(m.checkpoint_block).map(Some),
        }
    }
}

fn write_durably(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
