//! Smallbank: six banking procedures over paired checking/savings accounts.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{WorkloadSpec, ZipfSampler};
use crate::command::CommandKind;
use crate::program::{Cmp, Op, Operand, Step};
use crate::storage::State;
use crate::types::{Key, Value};

pub const INITIAL_BALANCE: i64 = 1_000;

pub fn checking(account: u64) -> Key {
    Key::new(format!("chk{account:05}")).expect("non-empty")
}

pub fn savings(account: u64) -> Key {
    Key::new(format!("sav{account:05}")).expect("non-empty")
}

pub fn genesis(accounts: u64) -> State {
    (0..accounts)
        .flat_map(|a| [(checking(a), Value::Num(INITIAL_BALANCE)), (savings(a), Value::Num(INITIAL_BALANCE))])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Procedure {
    Amalgamate { from: u64, to: u64 },
    Balance { account: u64 },
    DepositChecking { account: u64, amount: i64 },
    SendPayment { from: u64, to: u64, amount: i64 },
    TransactSavings { account: u64, amount: i64 },
    WriteCheck { account: u64, amount: i64 },
}

fn update_regs(key: Key, op: Op, regs: Vec<usize>) -> Step {
    Step::Update { key, op, arg: Operand::Regs(regs) }
}

impl Procedure {
    pub fn program(&self) -> Vec<Step> {
        match *self {
            // move everything from `from` into `to`'s checking account
            Procedure::Amalgamate { from, to } => vec![
                Step::read(&savings(from)),
                Step::read(&checking(from)),
                Step::update(&savings(from), CommandKind::Set(0)),
                Step::update(&checking(from), CommandKind::Set(0)),
                update_regs(checking(to), Op::Add, vec![0, 1]),
            ],
            Procedure::Balance { account } => vec![Step::read(&checking(account)), Step::read(&savings(account))],
            Procedure::DepositChecking { account, amount } => {
                vec![Step::update(&checking(account), CommandKind::Add(amount))]
            }
            Procedure::SendPayment { from, to, amount } => vec![
                Step::read(&checking(from)),
                Step::Branch { regs: vec![0], cmp: Cmp::Ge, rhs: amount, skip: 2 },
                Step::update(&checking(from), CommandKind::Add(-amount)),
                Step::update(&checking(to), CommandKind::Add(amount)),
            ],
            // a withdrawal may not overdraw savings
            Procedure::TransactSavings { account, amount } => vec![
                Step::read(&savings(account)),
                Step::Branch { regs: vec![0], cmp: Cmp::Ge, rhs: -amount, skip: 1 },
                Step::update(&savings(account), CommandKind::Add(amount)),
            ],
            // overdrawing the combined balance costs one extra unit
            Procedure::WriteCheck { account, amount } => vec![
                Step::read(&savings(account)),
                Step::read(&checking(account)),
                Step::Branch { regs: vec![0, 1], cmp: Cmp::Lt, rhs: amount, skip: 2 },
                Step::update(&checking(account), CommandKind::Add(-(amount + 1))),
                Step::Jump { skip: 1 },
                Step::update(&checking(account), CommandKind::Add(-amount)),
            ],
        }
    }
}

pub struct SmallbankGen {
    zipf: ZipfSampler,
    mix: WeightedIndex<u32>,
    rng: ChaCha8Rng,
}

impl SmallbankGen {
    pub fn new(spec: WorkloadSpec) -> Self {
        SmallbankGen {
            zipf: ZipfSampler::new(spec.keys, spec.theta),
            mix: WeightedIndex::new(spec.smallbank_mix).expect("mix has a positive weight"),
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
        }
    }

    fn account(&mut self) -> u64 {
        self.zipf.sample(&mut self.rng)
    }

    fn pair(&mut self) -> (u64, u64) {
        let a = self.account();
        loop {
            let b = self.account();
            if b != a {
                return (a, b);
            }
        }
    }

    pub fn next_procedure(&mut self) -> Procedure {
        let amount = self.rng.gen_range(1..=100);
        match self.mix.sample(&mut self.rng) {
            0 => {
                let (from, to) = self.pair();
                Procedure::Amalgamate { from, to }
            }
            1 => Procedure::Balance { account: self.account() },
            2 => Procedure::DepositChecking { account: self.account(), amount },
            3 => {
                let (from, to) = self.pair();
                Procedure::SendPayment { from, to, amount }
            }
            4 => {
                let amount = if self.rng.gen_bool(0.5) { amount } else { -amount };
                Procedure::TransactSavings { account: self.account(), amount }
            }
            _ => Procedure::WriteCheck { account: self.account(), amount },
        }
    }
}

impl Iterator for SmallbankGen {
    type Item = Vec<Step>;

    fn next(&mut self) -> Option<Vec<Step>> {
        Some(self.next_procedure().program())
    }
}
