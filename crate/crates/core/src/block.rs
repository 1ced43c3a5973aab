use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::program::Step;
use crate::types::{BlockId, Tid};
use crate::Error;

pub type Digest = [u8; 32];

pub const ZERO_DIGEST: Digest = [0u8; 32];

pub fn sha256(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TxnStatus {
    #[default]
    Pending,
    Simulated,
    Committed,
    Aborted,
}

/// A sequenced transaction. Serializes canonically as `{tid, block, steps}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub tid: Tid,
    pub block: BlockId,
    pub steps: Vec<Step>,
    #[serde(skip)]
    pub status: TxnStatus,
}

impl Transaction {
    pub fn new(tid: Tid, block: BlockId, steps: Vec<Step>) -> Self {
        Transaction { tid, block, steps, status: TxnStatus::Pending }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("transaction serializes")
    }
}

#[derive(Serialize)]
struct Payload<'a> {
    id: BlockId,
    txns: &'a [Transaction],
}

mod hex_digest {
    use super::Digest;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Digest, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Digest, D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}

/// An ordered batch of transactions linked into the hash chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    #[serde(with = "hex_digest")]
    pub hash: Digest,
    pub id: BlockId,
    #[serde(with = "hex_digest")]
    pub prev_hash: Digest,
    pub txns: Vec<Transaction>,
}

impl Block {
    /// Seals a block on top of `prev_hash`.
    pub fn seal(id: BlockId, txns: Vec<Transaction>, prev_hash: Digest) -> Result<Block, Error> {
        check_tids(id, &txns)?;
        let hash = link_hash(&prev_hash, &payload_bytes(id, &txns));
        Ok(Block { hash, id, prev_hash, txns })
    }

    pub fn payload(&self) -> Vec<u8> {
        payload_bytes(self.id, &self.txns)
    }

    /// The hash this block should carry given its content.
    pub fn recompute_hash(&self) -> Digest {
        link_hash(&self.prev_hash, &self.payload())
    }

    pub fn first_tid(&self) -> Option<Tid> {
        self.txns.first().map(|t| t.tid)
    }

    pub fn contains(&self, tid: Tid) -> bool {
        match (self.txns.first(), self.txns.last()) {
            (Some(a), Some(b)) => a.tid <= tid && tid <= b.tid,
            _ => false,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("block serializes")
    }
}

fn payload_bytes(id: BlockId, txns: &[Transaction]) -> Vec<u8> {
    serde_json::to_vec(&Payload { id, txns }).expect("payload serializes")
}

pub fn link_hash(prev: &Digest, payload: &[u8]) -> Digest {
    sha256(&[prev, payload])
}

fn check_tids(id: BlockId, txns: &[Transaction]) -> Result<(), Error> {
    for w in txns.windows(2) {
        if w[1].tid.0 != w[0].tid.0 + 1 {
            return Err(Error::NonContiguousTids(id));
        }
    }
    if txns.iter().any(|t| t.block != id) {
        return Err(Error::NonContiguousTids(id));
    }
    Ok(())
}
