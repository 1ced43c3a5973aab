use std::collections::BTreeMap;

use sha2::{Digest as _, Sha256};

use crate::block::Digest;
use crate::types::{BlockId, Key, Snapshot, Value};
use crate::Error;

pub type State = BTreeMap<Key, Value>;

/// Multi-versioned key/value store with one version per block.
///
/// Readers address a [`Snapshot`]; a read returns the newest version no newer
/// than the snapshot. Blocks install strictly in order and never touch older
/// versions.
#[derive(Debug, Clone, Default)]
pub struct SnapshotStore {
    versions: BTreeMap<Key, Vec<(Snapshot, Value)>>,
    latest: State,
    last: Option<BlockId>,
    /// Oldest snapshot that is still fully readable.
    floor: Snapshot,
    /// Multiset digest of `latest`.
    digest: StateDigest,
}

impl SnapshotStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A store whose genesis state is `initial`.
    pub fn with_genesis(initial: State) -> Self {
        let mut s = Self::default();
        for (k, v) in initial {
            if !v.is_absent() {
                s.versions.insert(k.clone(), vec![(Snapshot::Genesis, v)]);
                s.digest.add(&k, v);
                s.latest.insert(k, v);
            }
        }
        s
    }

    /// Rebuilds a store from a checkpoint taken after `block`.
    ///
    /// `prior` holds the pre-block value of every key `block` wrote, so that
    /// the snapshot one block back stays readable for lagging simulation.
    pub fn restore(block: BlockId, state: State, prior: &State) -> Self {
        let before = Snapshot::lagging(block, 1);
        let at = Snapshot::After(block);
        let mut s = SnapshotStore { last: Some(block), floor: before, ..Default::default() };
        for (k, v) in &state {
            match prior.get(k) {
                Some(p) => {
                    let mut vs = Vec::with_capacity(2);
                    if !p.is_absent() {
                        vs.push((before, *p));
                    }
                    vs.push((at, *v));
                    s.versions.insert(k.clone(), vs);
                }
                None => {
                    s.versions.insert(k.clone(), vec![(before, *v)]);
                }
            }
        }
        s.digest = StateDigest::of(&state);
        s.latest = state;
        s
    }

    pub fn last_committed(&self) -> Option<BlockId> {
        self.last
    }

    /// The newest readable snapshot.
    pub fn head(&self) -> Snapshot {
        match self.last {
            Some(b) => Snapshot::After(b),
            None => Snapshot::Genesis,
        }
    }

    pub fn next_block(&self) -> BlockId {
        self.last.map_or(BlockId(0), |b| BlockId(b.0 + 1))
    }

    fn check_readable(&self, at: Snapshot) -> Result<(), Error> {
        if at > self.head() {
            return Err(Error::SnapshotNotReady { requested: at, head: self.head() });
        }
        if at < self.floor {
            return Err(Error::SnapshotPruned(at));
        }
        Ok(())
    }

    pub fn read(&self, key: &Key, at: Snapshot) -> Result<Value, Error> {
        self.check_readable(at)?;
        Ok(self.read_unchecked(key, at))
    }

    fn read_unchecked(&self, key: &Key, at: Snapshot) -> Value {
        if at == self.head() {
            return self.latest.get(key).copied().unwrap_or_default();
        }
        let Some(vs) = self.versions.get(key) else {
            return Value::Absent;
        };
        let idx = vs.partition_point(|(s, _)| *s <= at);
        if idx == 0 {
            Value::Absent
        } else {
            vs[idx - 1].1
        }
    }

    /// Installs the writes of `block`, which must directly follow the head.
    pub fn install_block_writes(&mut self, block: BlockId, writes: &State) -> Result<(), Error> {
        let expected = self.next_block();
        if block != expected {
            return Err(Error::OutOfOrderInstall { expected, got: block });
        }
        let at = Snapshot::After(block);
        for (k, v) in writes {
            let vs = self.versions.entry(k.clone()).or_default();
            debug_assert!(vs.last().is_none_or(|(s, _)| *s < at));
            vs.push((at, *v));
            if let Some(old) = self.latest.insert(k.clone(), *v) {
                self.digest.remove(k, old);
            }
            self.digest.add(k, *v);
        }
        self.last = Some(block);
        Ok(())
    }

    pub fn latest(&self) -> &State {
        &self.latest
    }

    pub fn state_at(&self, at: Snapshot) -> Result<State, Error> {
        self.check_readable(at)?;
        if at == self.head() {
            return Ok(self.latest.clone());
        }
        Ok(self
            .versions
            .keys()
            .filter_map(|k| match self.read_unchecked(k, at) {
                Value::Absent => None,
                v => Some((k.clone(), v)),
            })
            .collect())
    }

    /// Digest of the visible state at `at`, domain-separated by snapshot.
    /// Constant time at the head.
    pub fn state_hash(&self, at: Snapshot) -> Result<Digest, Error> {
        self.check_readable(at)?;
        if at == self.head() {
            return Ok(self.digest.finish(at));
        }
        Ok(hash_state(at, &self.state_at(at)?))
    }

    /// Drops versions that are invisible from `keep_from` onwards.
    pub fn prune_before(&mut self, keep_from: Snapshot) {
        if keep_from <= self.floor {
            return;
        }
        let keep_from = keep_from.min(self.head());
        for vs in self.versions.values_mut() {
            let idx = vs.partition_point(|(s, _)| *s <= keep_from);
            if idx > 1 {
                vs.drain(..idx - 1);
            }
        }
        self.floor = keep_from;
    }

    pub fn version_count(&self) -> usize {
        self.versions.values().map(Vec::len).sum()
    }
}

/// Order-independent digest of a set of entries: the sum modulo 2^256 of
/// each entry's SHA-256, so single writes update it in place.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct StateDigest([u64; 4]);

impl StateDigest {
    fn of(state: &State) -> Self {
        let mut d = StateDigest::default();
        for (k, v) in state {
            d.add(k, *v);
        }
        d
    }

    fn entry(key: &Key, n: i64) -> [u64; 4] {
        let len = (key.as_bytes().len() as u32).to_le_bytes();
        let h = crate::block::sha256(&[&len, key.as_bytes(), &n.to_le_bytes()]);
        std::array::from_fn(|i| u64::from_le_bytes(h[i * 8..i * 8 + 8].try_into().expect("8 bytes")))
    }

    fn add(&mut self, key: &Key, v: Value) {
        if let Value::Num(n) = v {
            let e = Self::entry(key, n);
            let mut carry = false;
            for (limb, x) in self.0.iter_mut().zip(e) {
                let (s1, c1) = limb.overflowing_add(x);
                let (s2, c2) = s1.overflowing_add(carry as u64);
                *limb = s2;
                carry = c1 || c2;
            }
        }
    }

    fn remove(&mut self, key: &Key, v: Value) {
        if let Value::Num(n) = v {
            let e = Self::entry(key, n);
            let mut borrow = false;
            for (limb, x) in self.0.iter_mut().zip(e) {
                let (d1, b1) = limb.overflowing_sub(x);
                let (d2, b2) = d1.overflowing_sub(borrow as u64);
                *limb = d2;
                borrow = b1 || b2;
            }
        }
    }

    fn finish(&self, at: Snapshot) -> Digest {
        let mut h = Sha256::new();
        h.update(b"state\0");
        match at {
            Snapshot::Genesis => h.update([0u8]),
            Snapshot::After(b) => {
                h.update([1u8]);
                h.update(b.0.to_le_bytes());
            }
        }
        for limb in self.0 {
            h.update(limb.to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Hash of a state; absent values are skipped.
pub fn hash_state(at: Snapshot, state: &State) -> Digest {
    StateDigest::of(state).finish(at)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(s: &str) -> Key {
        Key::new(s).unwrap()
    }

    fn writes(pairs: &[(&str, i64)]) -> State {
        pairs.iter().map(|(a, v)| (k(a), Value::Num(*v))).collect()
    }

    fn after(b: u64) -> Snapshot {
        Snapshot::After(BlockId(b))
    }

    #[test]
    fn reads_see_latest_version_at_or_before_snapshot() {
        let mut s = SnapshotStore::new();
        for b in 0..6 {
            let w = if b == 3 { writes(&[("k", 9)]) } else { State::new() };
            s.install_block_writes(BlockId(b), &w).unwrap();
        }
        assert_eq!(s.read(&k("k"), after(5)).unwrap(), Value::Num(9));
        assert_eq!(s.read(&k("k"), after(2)).unwrap(), Value::Absent);
        assert_eq!(s.read(&k("k"), Snapshot::Genesis).unwrap(), Value::Absent);
    }

    #[test]
    fn version_visibility_per_block() {
        let mut s = SnapshotStore::new();
        s.install_block_writes(BlockId(0), &State::new()).unwrap();
        s.install_block_writes(BlockId(1), &writes(&[("a", 1)])).unwrap();
        assert_eq!(s.read(&k("a"), after(0)).unwrap(), Value::Absent);
        assert_eq!(s.read(&k("a"), after(1)).unwrap(), Value::Num(1));
    }

    #[test]
    fn future_snapshot_is_a_contract_violation() {
        let s = SnapshotStore::new();
        assert!(matches!(s.read(&k("a"), after(0)), Err(Error::SnapshotNotReady { .. })));
    }

    #[test]
    fn out_of_order_install_rejected() {
        let mut s = SnapshotStore::new();
        assert!(s.install_block_writes(BlockId(1), &State::new()).is_err());
        s.install_block_writes(BlockId(0), &State::new()).unwrap();
        assert!(s.install_block_writes(BlockId(0), &State::new()).is_err());
    }

    #[test]
    fn empty_block_changes_hash_only_by_block_id() {
        let mut s = SnapshotStore::new();
        s.install_block_writes(BlockId(0), &writes(&[("a", 1)])).unwrap();
        s.install_block_writes(BlockId(1), &State::new()).unwrap();
        let h0 = s.state_hash(after(0)).unwrap();
        let h1 = s.state_hash(after(1)).unwrap();
        assert_ne!(h0, h1);
        assert_eq!(h1, hash_state(after(1), &writes(&[("a", 1)])));
    }

    #[test]
    fn identical_stores_hash_identically_and_flip_is_detected() {
        let a = SnapshotStore::new();
        let b = SnapshotStore::new();
        assert_eq!(a.state_hash(Snapshot::Genesis).unwrap(), b.state_hash(Snapshot::Genesis).unwrap());

        let mut a = SnapshotStore::new();
        let mut b = SnapshotStore::new();
        a.install_block_writes(BlockId(0), &writes(&[("x", 5), ("y", 1)])).unwrap();
        b.install_block_writes(BlockId(0), &writes(&[("x", 5), ("y", 2)])).unwrap();
        assert_ne!(a.state_hash(after(0)).unwrap(), b.state_hash(after(0)).unwrap());
    }

    #[test]
    fn historic_hash_matches_latest_hash_at_that_time() {
        let mut s = SnapshotStore::with_genesis(writes(&[("g", 100)]));
        let mut seen = Vec::new();
        for b in 0..5u64 {
            s.install_block_writes(BlockId(b), &writes(&[("x", b as i64), ("g", 100 + b as i64)])).unwrap();
            seen.push(s.state_hash(after(b)).unwrap());
        }
        for b in 0..5u64 {
            assert_eq!(s.state_hash(after(b)).unwrap(), seen[b as usize]);
        }
    }

    #[test]
    fn restore_keeps_previous_snapshot_readable() {
        let mut s = SnapshotStore::new();
        s.install_block_writes(BlockId(0), &writes(&[("a", 1), ("b", 1)])).unwrap();
        s.install_block_writes(BlockId(1), &writes(&[("a", 2), ("c", 3)])).unwrap();
        let prior: State = [(k("a"), Value::Num(1)), (k("c"), Value::Absent)].into_iter().collect();
        let r = SnapshotStore::restore(BlockId(1), s.latest().clone(), &prior);
        for key in ["a", "b", "c"] {
            for b in 0..=1 {
                assert_eq!(r.read(&k(key), after(b)).unwrap(), s.read(&k(key), after(b)).unwrap());
            }
        }
        assert_eq!(r.state_hash(after(0)).unwrap(), s.state_hash(after(0)).unwrap());
        assert!(r.read(&k("a"), Snapshot::Genesis).is_err());
    }

    #[test]
    fn pruning_keeps_recent_snapshots() {
        let mut s = SnapshotStore::new();
        for b in 0..4 {
            s.install_block_writes(BlockId(b), &writes(&[("a", b as i64)])).unwrap();
        }
        s.prune_before(after(2));
        assert_eq!(s.read(&k("a"), after(2)).unwrap(), Value::Num(2));
        assert_eq!(s.read(&k("a"), after(3)).unwrap(), Value::Num(3));
        assert!(s.read(&k("a"), after(1)).is_err());
        assert_eq!(s.version_count(), 2);
    }

    proptest::proptest! {
        #[test]
        fn running_digest_matches_full_hash(
            blocks in proptest::collection::vec(proptest::collection::vec((0u8..6, -3i64..3), 0..5), 1..8)
        ) {
            let mut s = SnapshotStore::with_genesis(writes(&[("a", 1), ("b", 2)]));
            for (b, ws) in blocks.iter().enumerate() {
                let names: Vec<String> = ws.iter().map(|(key, _)| format!("k{key}")).collect();
                let state: State = names.iter().zip(ws).map(|(n, (_, v))| (k(n), Value::Num(*v))).collect();
                s.install_block_writes(BlockId(b as u64), &state).unwrap();
                let head = s.head();
                proptest::prop_assert_eq!(s.state_hash(head).unwrap(), hash_state(head, s.latest()));
            }
        }
    }
}
