//! Update commands and their composition.
//!
//! Transactions record *commands* such as `add(x, 10)` in their write sets
//! rather than the values those commands produce. The commit step decides the
//! order of all commands touching a key and folds them into a single
//! [`Composite`] that is evaluated once.

use serde::{Deserialize, Serialize};

use crate::types::{Tid, Value};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandKind {
    Add(i64),
    Mul(i64),
    Set(i64),
}

impl CommandKind {
    /// Whether the command reads the value it overwrites.
    pub fn is_read_modify_write(self) -> bool {
        !matches!(self, CommandKind::Set(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UpdateCommand {
    pub kind: CommandKind,
    pub issuer: Tid,
}

impl UpdateCommand {
    pub fn new(kind: CommandKind, issuer: Tid) -> Self {
        UpdateCommand { kind, issuer }
    }
}

/// Applies a single command. `Absent` inputs count as zero for `Add`/`Mul`.
pub fn apply_command(cmd: CommandKind, input: Value) -> Result<Value, Error> {
    let x = input.numeric();
    let out = match cmd {
        CommandKind::Add(c) => x.checked_add(c),
        CommandKind::Mul(c) => x.checked_mul(c),
        CommandKind::Set(v) => Some(v),
    };
    out.map(Value::Num).ok_or(Error::Overflow)
}

/// A fused command `x -> mul * x + add`.
///
/// Every sequence of `Add`, `Mul` and `Set` collapses to this affine form:
/// `Set(v)` is `(0, v)`, so anything composed after a `Set` forgets the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Composite {
    pub mul: i64,
    pub add: i64,
}

impl Composite {
    pub const IDENTITY: Composite = Composite { mul: 1, add: 0 };

    pub fn apply(&self, input: Value) -> Result<Value, Error> {
        if self.mul == 0 {
            return Ok(Value::Num(self.add));
        }
        input
            .numeric()
            .checked_mul(self.mul)
            .and_then(|v| v.checked_add(self.add))
            .map(Value::Num)
            .ok_or(Error::Overflow)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Composite) -> Result<Composite, Error> {
        if next.mul == 0 {
            return Ok(*next);
        }
        let mul = self.mul.checked_mul(next.mul).ok_or(Error::Overflow)?;
        let add = self
            .add
            .checked_mul(next.mul)
            .and_then(|v| v.checked_add(next.add))
            .ok_or(Error::Overflow)?;
        Ok(Composite { mul, add })
    }

    /// Whether applying this composite depends on the prior value.
    pub fn is_read_modify_write(&self) -> bool {
        self.mul != 0
    }
}

impl From<CommandKind> for Composite {
    fn from(k: CommandKind) -> Self {
        match k {
            CommandKind::Add(c) => Composite { mul: 1, add: c },
            CommandKind::Mul(c) => Composite { mul: c, add: 0 },
            CommandKind::Set(v) => Composite { mul: 0, add: v },
        }
    }
}

/// Folds an ordered command list into one composite.
pub fn compose(commands: &[CommandKind]) -> Result<Composite, Error> {
    let (first, rest) = commands.split_first().ok_or(Error::EmptyCompose)?;
    rest.iter()
        .try_fold(Composite::from(*first), |acc, c| acc.then(&Composite::from(*c)))
}

/// Folds already-fused composites, e.g. one per transaction after reordering.
pub fn compose_all<'a>(parts: impl IntoIterator<Item = &'a Composite>) -> Result<Composite, Error> {
    parts
        .into_iter()
        .try_fold(Composite::IDENTITY, |acc, c| acc.then(c))
}
