//! Transaction programs as small interpreted step lists.
//!
//! A program is a pure function of the values it reads: it can only read
//! keys, branch on what it read, and emit update commands. Keeping programs
//! as data means blocks serialize into the log and replay after recovery.

use serde::{Deserialize, Serialize};

use crate::command::CommandKind;
use crate::types::{Key, Value};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Add,
    Mul,
    Set,
}

/// Argument of an update: a constant or the sum of earlier reads.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Const(i64),
    Regs(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl Cmp {
    fn holds(self, l: i64, r: i64) -> bool {
        match self {
            Cmp::Lt => l < r,
            Cmp::Le => l <= r,
            Cmp::Eq => l == r,
            Cmp::Ne => l != r,
            Cmp::Ge => l >= r,
            Cmp::Gt => l > r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    /// Reads `key` into the next register.
    Read { key: Key },
    Update { key: Key, op: Op, arg: Operand },
    /// Skips the next `skip` steps unless `sum(regs) cmp rhs` holds.
    Branch { regs: Vec<usize>, cmp: Cmp, rhs: i64, skip: usize },
    /// Unconditionally skips the next `skip` steps.
    Jump { skip: usize },
}

impl Step {
    pub fn read(key: &Key) -> Step {
        Step::Read { key: key.clone() }
    }

    pub fn update(key: &Key, kind: CommandKind) -> Step {
        let (op, c) = match kind {
            CommandKind::Add(c) => (Op::Add, c),
            CommandKind::Mul(c) => (Op::Mul, c),
            CommandKind::Set(c) => (Op::Set, c),
        };
        Step::Update { key: key.clone(), op, arg: Operand::Const(c) }
    }
}

/// What a running program talks to.
pub trait Host {
    fn read(&mut self, key: &Key) -> Result<Value, Error>;
    fn update(&mut self, key: &Key, cmd: CommandKind) -> Result<(), Error>;
}

fn sum_regs(regs: &[usize], values: &[i64]) -> Result<i64, Error> {
    regs.iter().try_fold(0i64, |acc, &r| {
        let v = *values.get(r).ok_or(Error::BadRegister(r))?;
        acc.checked_add(v).ok_or(Error::Overflow)
    })
}

/// Runs `steps` against `host`.
pub fn run(steps: &[Step], host: &mut impl Host) -> Result<(), Error> {
    let mut regs: Vec<i64> = Vec::new();
    let mut pc = 0usize;
    while pc < steps.len() {
        match &steps[pc] {
            Step::Read { key } => {
                regs.push(host.read(key)?.numeric());
                pc += 1;
            }
            Step::Update { key, op, arg } => {
                let c = match arg {
                    Operand::Const(c) => *c,
                    Operand::Regs(rs) => sum_regs(rs, &regs)?,
                };
                let kind = match op {
                    Op::Add => CommandKind::Add(c),
                    Op::Mul => CommandKind::Mul(c),
                    Op::Set => CommandKind::Set(c),
                };
                host.update(key, kind)?;
                pc += 1;
            }
            Step::Branch { regs: rs, cmp, rhs, skip } => {
                let taken = cmp.holds(sum_regs(rs, &regs)?, *rhs);
                pc = jump_target(steps.len(), pc, if taken { 0 } else { *skip })?;
            }
            Step::Jump { skip } => {
                pc = jump_target(steps.len(), pc, *skip)?;
            }
        }
    }
    Ok(())
}

fn jump_target(len: usize, pc: usize, skip: usize) -> Result<usize, Error> {
    let target = pc + 1 + skip;
    if target > len {
        return Err(Error::BadBranch { at: pc, target });
    }
    Ok(target)
}

/// Keys a program could touch, in step order. Used by workload statistics.
pub fn keys(steps: &[Step]) -> impl Iterator<Item = &Key> {
    steps.iter().filter_map(|s| match s {
        Step::Read { key } | Step::Update { key, .. } => Some(key),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[derive(Default)]
    struct Mem {
        state: BTreeMap<Key, Value>,
        emitted: Vec<(Key, CommandKind)>,
    }

    impl Host for Mem {
        fn read(&mut self, key: &Key) -> Result<Value, Error> {
            Ok(self.state.get(key).copied().unwrap_or_default())
        }
        fn update(&mut self, key: &Key, cmd: CommandKind) -> Result<(), Error> {
            self.emitted.push((key.clone(), cmd));
            Ok(())
        }
    }

    fn k(s: &str) -> Key {
        Key::new(s).unwrap()
    }

    #[test]
    fn branch_guard_suppresses_update() {
        // if chk >= 5 { chk -= 5; dst += 5 }
        let prog = vec![
            Step::read(&k("chk")),
            Step::Branch { regs: vec![0], cmp: Cmp::Ge, rhs: 5, skip: 2 },
            Step::update(&k("chk"), CommandKind::Add(-5)),
            Step::update(&k("dst"), CommandKind::Add(5)),
        ];
        let mut poor = Mem::default();
        poor.state.insert(k("chk"), Value::Num(3));
        run(&prog, &mut poor).unwrap();
        assert!(poor.emitted.is_empty());

        let mut rich = Mem::default();
        rich.state.insert(k("chk"), Value::Num(9));
        run(&prog, &mut rich).unwrap();
        assert_eq!(rich.emitted.len(), 2);
    }

    #[test]
    fn register_operand_sums_reads() {
        let prog = vec![
            Step::read(&k("a")),
            Step::read(&k("b")),
            Step::Update { key: k("c"), op: Op::Add, arg: Operand::Regs(vec![0, 1]) },
        ];
        let mut m = Mem::default();
        m.state.insert(k("a"), Value::Num(4));
        m.state.insert(k("b"), Value::Num(6));
        run(&prog, &mut m).unwrap();
        assert_eq!(m.emitted, vec![(k("c"), CommandKind::Add(10))]);
    }

    #[test]
    fn out_of_range_branch_is_an_error() {
        let prog = vec![Step::Jump { skip: 3 }, Step::read(&k("a"))];
        assert!(matches!(run(&prog, &mut Mem::default()), Err(Error::BadBranch { .. })));
        let prog = vec![Step::Update { key: k("a"), op: Op::Add, arg: Operand::Regs(vec![2]) }];
        assert_eq!(run(&prog, &mut Mem::default()), Err(Error::BadRegister(2)));
    }
}
