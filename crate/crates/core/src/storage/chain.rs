use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::block::{Block, Digest, ZERO_DIGEST};
use crate::types::BlockId;
use crate::Error;

/// Append-only, hash-linked log of input blocks.
///
/// When backed by a file the log is JSON lines, one block per line, and each
/// block is flushed before it is handed to the engine.
#[derive(Debug, Default)]
pub struct ChainLog {
    blocks: Vec<Block>,
    file: Option<(PathBuf, File)>,
}

impl ChainLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a file-backed log, loading any blocks already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref().to_path_buf();
        let blocks = if path.exists() { read_log(&path)? } else { Vec::new() };
        if let Some(bad) = verify_chain(&blocks) {
            return Err(Error::ChainBroken(bad));
        }
        let f = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(ChainLog { blocks, file: Some((path, f)) })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn get(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(id.0 as usize)
    }

    pub fn tip_hash(&self) -> Digest {
        self.blocks.last().map_or(ZERO_DIGEST, |b| b.hash)
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn append_block(&mut self, block: Block) -> Result<(), Error> {
        let expected = BlockId(self.blocks.len() as u64);
        if block.id != expected {
            return Err(Error::OutOfOrderAppend { expected, got: block.id });
        }
        if block.prev_hash != self.tip_hash() || block.recompute_hash() != block.hash {
            return Err(Error::HashLinkMismatch(block.id));
        }
        if let Some((_, f)) = self.file.as_mut() {
            let mut line = block.to_json_line();
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.sync_data()?;
        }
        self.blocks.push(block);
        Ok(())
    }
}

/// Walks the hash links; returns the first block whose link does not hold.
pub fn verify_chain(blocks: &[Block]) -> Option<BlockId> {
    let mut prev = ZERO_DIGEST;
    for (i, b) in blocks.iter().enumerate() {
        if b.id != BlockId(i as u64) || b.prev_hash != prev || b.recompute_hash() != b.hash {
            return Some(BlockId(i as u64));
        }
        prev = b.hash;
    }
    None
}

/// Reads every block of a JSON-lines log. A malformed line is a hard error.
pub fn read_log(path: &Path) -> Result<Vec<Block>, Error> {
    let f = File::open(path)?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let b: Block = serde_json::from_str(&line).map_err(|e| Error::CorruptLog { line: n + 1, reason: e.to_string() })?;
        out.push(b);
    }
    Ok(out)
}
