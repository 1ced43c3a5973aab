use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Transaction id assigned by the sequencer in arrival order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tid(pub u64);

impl Tid {
    pub fn next(self) -> Tid {
        Tid(self.0 + 1)
    }
}

impl fmt::Display for Tid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

/// Position of a block in the chain. Block 0 is the first block the
/// sequencer emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u64);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A state version that reads can be served from.
///
/// `Genesis` is the initial load that precedes block 0; `After(b)` is the
/// state once block `b` has been installed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Snapshot {
    #[default]
    Genesis,
    After(BlockId),
}

impl Snapshot {
    /// Snapshot a block reads from when it lags `lag` blocks behind.
    pub fn lagging(block: BlockId, lag: u64) -> Snapshot {
        match block.0.checked_sub(lag) {
            Some(b) => Snapshot::After(BlockId(b)),
            None => Snapshot::Genesis,
        }
    }

    pub fn block(self) -> Option<BlockId> {
        match self {
            Snapshot::Genesis => None,
            Snapshot::After(b) => Some(b),
        }
    }
}

impl fmt::Display for Snapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snapshot::Genesis => f.write_str("genesis"),
            Snapshot::After(b) => write!(f, "after {b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key(String);

impl Key {
    pub fn new(s: impl Into<String>) -> Result<Key, crate::Error> {
        let s = s.into();
        if s.is_empty() {
            return Err(crate::Error::EmptyKey);
        }
        Ok(Key(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Key {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Key {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Key::new(s).map_err(serde::de::Error::custom)
    }
}

/// Stored value. `Absent` means the key was never written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Value {
    #[default]
    Absent,
    Num(i64),
}

impl Value {
    /// Arithmetic view: `Absent` reads as zero.
    pub fn numeric(self) -> i64 {
        match self {
            Value::Absent => 0,
            Value::Num(v) => v,
        }
    }

    pub fn is_absent(self) -> bool {
        matches!(self, Value::Absent)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Num(v)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Absent => s.serialize_none(),
            Value::Num(v) => s.serialize_i64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match Option::<i64>::deserialize(d)? {
            None => Value::Absent,
            Some(v) => Value::Num(v),
        })
    }
}
