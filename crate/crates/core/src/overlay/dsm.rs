//! Decentralized structured overlay: a Chord ring with consistent key
//! placement, join/stabilize/notify maintenance and two lookup strategies.
//!
//! Key `k` belongs to the node `n` with `k ∈ (predecessor(n), n]`. Finger `i`
//! (1-based) of node `n` is `successor(n + 2^(i-1))`.
//!
//! Remote calls made by maintenance and lookups complete within the engine
//! callback that issues them; each call is counted in [`DsmStats`].

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::membership::{consistency_tick, ConsistencyAction, ConsistencyPolicy, DescriptorStore, OwnerState};
use crate::model::{Descriptor, KeySpace, Message, NodeId, ResourceKey};
use crate::sim::{Actor, Engine, Timer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DsmError {
    #[error("ring is empty")]
    EmptyRing,
    #[error("join failed: bootstrap node {0} unreachable")]
    JoinFailed(NodeId),
    #[error("lookup timed out after {hops} hops")]
    LookupTimeout { hops: u32 },
    #[error("node {0} is not on the ring")]
    UnknownNode(NodeId),
}

/// Smallest id `>= k` in ring order, wrapping to the minimum. `ids` must be sorted.
pub fn successor_oracle(ids: &[u64], k: u64) -> Result<u64, DsmError> {
    if ids.is_empty() {
        return Err(DsmError::EmptyRing);
    }
    let i = ids.partition_point(|&x| x < k);
    Ok(if i == ids.len() { ids[0] } else { ids[i] })
}

/// Greatest id `< k` in ring order, wrapping to the maximum.
pub fn predecessor_oracle(ids: &[u64], k: u64) -> Result<u64, DsmError> {
    if ids.is_empty() {
        return Err(DsmError::EmptyRing);
    }
    let i = ids.partition_point(|&x| x < k);
    Ok(if i == 0 { ids[ids.len() - 1] } else { ids[i - 1] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChordNode {
    pub id: NodeId,
    pub successor: NodeId,
    pub predecessor: Option<NodeId>,
    /// `finger[i - 1]` holds finger `i`.
    pub finger: Vec<NodeId>,
    pub succ_list: Vec<NodeId>,
    pub store: DescriptorStore,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupResult {
    pub owner: NodeId,
    pub hops: u32,
    /// Nodes visited, starting with the origin and ending with the owner.
    pub path: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DsmStats {
    pub rpcs: u64,
    pub lookups: u64,
    pub lookup_timeouts: u64,
    pub join_failures: u64,
    pub keys_transferred: u64,
}

/// The set of live Chord nodes and their routing state.
#[derive(Debug, Clone)]
pub struct ChordRing {
    ks: KeySpace,
    succ_list_len: usize,
    nodes: BTreeMap<NodeId, ChordNode>,
    stats: DsmStats,
}

impl ChordRing {
    pub fn new(ks: KeySpace, succ_list_len: usize) -> Self {
        Self { ks, succ_list_len: succ_list_len.max(1), nodes: BTreeMap::new(), stats: DsmStats::default() }
    }

    /// Ring whose pointers already equal the oracle values.
    pub fn quiesced(ks: KeySpace, ids: impl IntoIterator<Item = NodeId>, succ_list_len: usize) -> Self {
        let mut ring = Self::new(ks, succ_list_len);
        for id in ids {
            ring.nodes.insert(id, ring.blank(id, id));
        }
        ring.rebuild_from_oracle();
        ring
    }

    fn blank(&self, id: NodeId, successor: NodeId) -> ChordNode {
        ChordNode {
            id,
            successor,
            predecessor: None,
            finger: vec![successor; self.ks.m_bits() as usize],
            succ_list: vec![successor],
            store: DescriptorStore::new(),
        }
    }

    /// Overwrites every pointer with its oracle value.
    pub fn rebuild_from_oracle(&mut self) {
        let ids = self.ids();
        let ks = self.ks;
        let len = self.succ_list_len.min(ids.len());
        for (pos, &id) in ids.iter().enumerate() {
            let node = self.nodes.get_mut(&NodeId(id)).expect("listed id");
            node.successor = NodeId(ids[(pos + 1) % ids.len()]);
            node.predecessor = Some(NodeId(ids[(pos + ids.len() - 1) % ids.len()]));
            node.succ_list = (1..=len).map(|j| NodeId(ids[(pos + j) % ids.len()])).collect();
            for i in 1..=ks.m_bits() {
                let start = ks.add(id, ks.finger_offset(i));
                node.finger[i as usize - 1] = NodeId(successor_oracle(&ids, start).expect("nonempty"));
            }
        }
    }

    pub fn key_space(&self) -> KeySpace {
        self.ks
    }

    pub fn stats(&self) -> DsmStats {
        self.stats
    }

    /// Sorted ids of the nodes on the ring.
    pub fn ids(&self) -> Vec<u64> {
        self.nodes.keys().map(|n| n.0).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&ChordNode> {
        self.nodes.get(&id)
    }

    pub fn oracle_successor(&self, key: u64) -> Result<NodeId, DsmError> {
        successor_oracle(&self.ids(), key).map(NodeId)
    }

    /// True when every successor and predecessor pointer equals the oracle.
    pub fn successors_correct(&self) -> bool {
        let ids = self.ids();
        self.nodes.values().all(|n| {
            let succ = successor_oracle(&ids, self.ks.add(n.id.0, 1)).ok();
            let pred = predecessor_oracle(&ids, n.id.0).ok();
            Some(n.successor.0) == succ && n.predecessor.map(|p| p.0) == pred
        })
    }

    /// True when every finger equals its oracle value.
    pub fn fingers_correct(&self) -> bool {
        let ids = self.ids();
        self.nodes.values().all(|n| {
            (1..=self.ks.m_bits()).all(|i| {
                let start = self.ks.add(n.id.0, self.ks.finger_offset(i));
                Ok(n.finger[i as usize - 1].0) == successor_oracle(&ids, start)
            })
        })
    }

    /// First live entry among the successor pointer and successor list.
    fn live_successor(&self, id: NodeId) -> NodeId {
        let node = &self.nodes[&id];
        std::iter::once(node.successor)
            .chain(node.succ_list.iter().copied())
            .find(|s| self.nodes.contains_key(s))
            .unwrap_or(id)
    }

    fn owns(&self, id: NodeId, key: u64) -> bool {
        match self.nodes[&id].predecessor {
            Some(p) if self.nodes.contains_key(&p) => self.ks.in_open_closed(key, p.0, id.0),
            _ => self.nodes.len() == 1,
        }
    }

    fn hop_limit(&self) -> u32 {
        2 * self.nodes.len() as u32 + self.ks.m_bits() + 2
    }

    /// Walks successor pointers until the key's owner is found.
    pub fn lookup_basic(&mut self, from: NodeId, key: u64) -> Result<LookupResult, DsmError> {
        if !self.nodes.contains_key(&from) {
            return Err(DsmError::UnknownNode(from));
        }
        self.stats.lookups += 1;
        let mut path = vec![from];
        if self.owns(from, key) {
            return Ok(LookupResult { owner: from, hops: 0, path });
        }
        let mut cur = from;
        let limit = self.hop_limit();
        loop {
            let s = self.live_successor(cur);
            self.stats.rpcs += 1;
            path.push(s);
            let hops = path.len() as u32 - 1;
            if s == cur || self.ks.in_open_closed(key, cur.0, s.0) {
                return Ok(LookupResult { owner: s, hops, path });
            }
            if hops >= limit {
                self.stats.lookup_timeouts += 1;
                return Err(DsmError::LookupTimeout { hops });
            }
            cur = s;
        }
    }

    /// Highest finger (or successor-list entry) strictly inside `(id, key)`.
    fn closest_preceding(&self, id: NodeId, key: u64) -> NodeId {
        let node = &self.nodes[&id];
        let live_in = |c: &NodeId| self.nodes.contains_key(c) && self.ks.in_open(c.0, id.0, key);
        let best_finger = node.finger.iter().rev().find(|c| live_in(c)).copied();
        let best_succ = node.succ_list.iter().rev().find(|c| live_in(c)).copied();
        match (best_finger, best_succ) {
            (Some(f), Some(s)) => {
                if self.ks.distance(id.0, f.0) >= self.ks.distance(id.0, s.0) {
                    f
                } else {
                    s
                }
            }
            (Some(f), None) => f,
            (None, Some(s)) => s,
            (None, None) => id,
        }
    }

    /// Finger-table routing: each hop jumps to the closest preceding finger.
    pub fn lookup_scalable(&mut self, from: NodeId, key: u64) -> Result<LookupResult, DsmError> {
        if !self.nodes.contains_key(&from) {
            return Err(DsmError::UnknownNode(from));
        }
        self.stats.lookups += 1;
        let mut path = vec![from];
        if self.owns(from, key) {
            return Ok(LookupResult { owner: from, hops: 0, path });
        }
        let mut cur = from;
        let limit = self.hop_limit();
        loop {
            let s = self.live_successor(cur);
            self.stats.rpcs += 1;
            if s == cur || self.ks.in_open_closed(key, cur.0, s.0) {
                path.push(s);
                return Ok(LookupResult { owner: s, hops: path.len() as u32 - 1, path });
            }
            let mut next = self.closest_preceding(cur, key);
            if next == cur {
                next = s;
            }
            path.push(next);
            let hops = path.len() as u32 - 1;
            if hops >= limit {
                self.stats.lookup_timeouts += 1;
                return Err(DsmError::LookupTimeout { hops });
            }
            cur = next;
        }
    }

    /// Adds the first node; it is its own successor.
    pub fn create(&mut self, id: NodeId) {
        let node = self.blank(id, id);
        self.nodes.insert(id, node);
    }

    /// Adds `id` by asking `via` for the successor of `id`.
    pub fn join(&mut self, id: NodeId, via: NodeId) -> Result<(), DsmError> {
        if self.nodes.contains_key(&id) {
            return Ok(());
        }
        if !self.nodes.contains_key(&via) {
            self.stats.join_failures += 1;
            return Err(DsmError::JoinFailed(via));
        }
        let succ = self.lookup_scalable(via, id.0)?.owner;
        let node = self.blank(id, succ);
        self.nodes.insert(id, node);
        Ok(())
    }

    /// Removes `id` without notice; its store is lost.
    pub fn fail(&mut self, id: NodeId) -> Option<ChordNode> {
        self.nodes.remove(&id)
    }

    /// One stabilize round at `id`, followed by notify to the successor.
    pub fn stabilize(&mut self, id: NodeId) {
        if !self.nodes.contains_key(&id) {
            return;
        }
        let mut succ = self.live_successor(id);
        self.stats.rpcs += 1;
        if let Some(x) = self.nodes[&succ].predecessor {
            if self.nodes.contains_key(&x) && self.ks.in_open(x.0, id.0, succ.0) {
                succ = x;
            }
        }
        let tail: Vec<NodeId> = self.nodes[&succ].succ_list.clone();
        let len = self.succ_list_len;
        let node = self.nodes.get_mut(&id).expect("checked");
        node.successor = succ;
        node.finger[0] = succ;
        let mut list = vec![succ];
        for t in tail {
            if list.len() >= len {
                break;
            }
            if t != id && !list.contains(&t) {
                list.push(t);
            }
        }
        node.succ_list = list;
        if succ != id {
            self.notify(succ, id);
        }
    }

    /// `candidate` believes it might be the predecessor of `target`.
    pub fn notify(&mut self, target: NodeId, candidate: NodeId) {
        self.stats.rpcs += 1;
        let ks = self.ks;
        let pred_live = self.nodes[&target].predecessor.filter(|p| self.nodes.contains_key(p));
        let accept = match pred_live {
            None => true,
            Some(p) => ks.in_open(candidate.0, p.0, target.0),
        };
        if !accept {
            return;
        }
        let t = self.nodes.get_mut(&target).expect("live target");
        t.predecessor = Some(candidate);
        let moved = t.store.drain_where(|d| !ks.in_open_closed(d.key.0, candidate.0, target.0));
        if !moved.is_empty() {
            self.stats.keys_transferred += moved.len() as u64;
            let c = self.nodes.get_mut(&candidate).expect("live candidate");
            for d in moved {
                c.store.insert(d);
            }
        }
    }

    /// Clears a predecessor pointer that refers to a departed node.
    pub fn check_predecessor(&mut self, id: NodeId) {
        let dead = self.nodes[&id].predecessor.is_some_and(|p| !self.nodes.contains_key(&p));
        if dead {
            self.nodes.get_mut(&id).expect("live").predecessor = None;
        }
    }

    /// Refreshes finger `i` (1-based) of `id` with a scalable lookup.
    pub fn fix_finger(&mut self, id: NodeId, i: u32) {
        let start = self.ks.add(id.0, self.ks.finger_offset(i));
        if let Ok(r) = self.lookup_scalable(id, start) {
            self.nodes.get_mut(&id).expect("live").finger[i as usize - 1] = r.owner;
        }
    }

    /// Stores `d` at the owner of its key.
    pub fn put(&mut self, from: NodeId, d: Descriptor) -> Result<LookupResult, DsmError> {
        let r = self.lookup_scalable(from, d.key.0)?;
        self.stats.rpcs += 1;
        self.nodes.get_mut(&r.owner).expect("owner is live").store.insert(d);
        Ok(r)
    }

    /// Unexpired descriptors held for `key` by its owner.
    pub fn get(&mut self, from: NodeId, key: ResourceKey, now: f64) -> Result<Vec<Descriptor>, DsmError> {
        let r = self.lookup_scalable(from, key.0)?;
        self.stats.rpcs += 1;
        Ok(self.nodes[&r.owner].store.get(key, now))
    }

    pub fn evict_expired(&mut self, id: NodeId, now: f64) -> usize {
        self.nodes.get_mut(&id).map_or(0, |n| n.store.evict_expired(now).len())
    }
}

const TIMER_STABILIZE: u32 = 10;
const TIMER_FIX_FINGERS: u32 = 11;
const TIMER_REPUBLISH: u32 = 12;
const TIMER_AUDIT: u32 = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct DsmConfig {
    pub m_bits: u32,
    pub stabilize_period: f64,
    pub succ_list_len: usize,
    /// Self-lookup audit cadence; `None` disables the audit.
    pub audit_period: Option<f64>,
    pub consistency: Option<ConsistencyPolicy>,
}

impl Default for DsmConfig {
    fn default() -> Self {
        Self { m_bits: 16, stabilize_period: 5.0, succ_list_len: 4, audit_period: None, consistency: None }
    }
}

/// Chord maintenance and storage driven by engine timers.
pub struct DsmOverlay {
    cfg: DsmConfig,
    ring: ChordRing,
    owners: BTreeMap<NodeId, OwnerState>,
}

impl DsmOverlay {
    pub fn new(cfg: DsmConfig) -> Result<Self, crate::model::ModelError> {
        let ks = KeySpace::new(cfg.m_bits)?;
        let ring = ChordRing::new(ks, cfg.succ_list_len);
        Ok(Self { cfg, ring, owners: BTreeMap::new() })
    }

    pub fn ring(&self) -> &ChordRing {
        &self.ring
    }

    pub fn ring_mut(&mut self) -> &mut ChordRing {
        &mut self.ring
    }

    pub fn config(&self) -> &DsmConfig {
        &self.cfg
    }

    /// Puts `id` on the ring through a random live member and starts its timers.
    pub fn join_node(&mut self, eng: &mut Engine, id: NodeId) {
        eng.add_live(id);
        if self.ring.is_empty() {
            self.ring.create(id);
        } else {
            let members: Vec<NodeId> = self.ring.nodes.keys().copied().collect();
            let via = members[eng.rng().gen_range(0..members.len())];
            if let Err(e) = self.ring.join(id, via) {
                eng.record("join_failed", id.to_string(), 1.0);
                debug_assert!(matches!(e, DsmError::JoinFailed(_) | DsmError::LookupTimeout { .. }));
                return;
            }
        }
        self.start_timers(eng, id);
    }

    /// Replaces the ring with oracle-correct pointers for `ids`, all live, and starts their timers.
    pub fn start_quiesced(&mut self, eng: &mut Engine, ids: impl IntoIterator<Item = NodeId>) {
        let ids: Vec<NodeId> = ids.into_iter().collect();
        self.ring = ChordRing::quiesced(self.ring.key_space(), ids.iter().copied(), self.cfg.succ_list_len);
        for &id in &ids {
            eng.add_live(id);
        }
        for id in self.ring.nodes.keys().copied().collect::<Vec<_>>() {
            self.start_timers(eng, id);
        }
    }

    fn start_timers(&mut self, eng: &mut Engine, id: NodeId) {
        let p = self.cfg.stabilize_period;
        // stagger first rounds so nodes do not fire in lock-step
        let offset = eng.rng().gen::<f64>() * p;
        eng.set_timer(id, offset, Timer::new(TIMER_STABILIZE, 0));
        eng.set_timer(id, offset, Timer::new(TIMER_FIX_FINGERS, 0));
        if let Some(period) = self.cfg.consistency.and_then(|c| c.republish_period) {
            eng.set_timer(id, period, Timer::new(TIMER_REPUBLISH, 0));
        }
        if let Some(a) = self.cfg.audit_period {
            eng.set_timer(id, a, Timer::new(TIMER_AUDIT, 0));
        }
    }

    /// Publishes `d` from its owner; the owner republishes it if configured.
    pub fn publish(&mut self, eng: &mut Engine, d: Descriptor) -> Result<LookupResult, DsmError> {
        let now = eng.now();
        let owner = d.owner;
        self.owners.entry(owner).or_default().publish(d.clone(), now);
        let r = self.ring.put(owner, d)?;
        eng.record("put_hops", owner.to_string(), r.hops as f64);
        Ok(r)
    }

    /// GET issued by `from`; records `get_hit` (count of descriptors) or `get_fail`.
    pub fn get(&mut self, eng: &mut Engine, from: NodeId, key: ResourceKey) -> Result<Vec<Descriptor>, DsmError> {
        let now = eng.now();
        let subject = format!("{from}:{key}");
        match self.ring.get(from, key, now) {
            Ok(found) => {
                eng.record("get_result", subject, found.len() as f64);
                Ok(found)
            }
            Err(e) => {
                eng.record("get_result", subject, -1.0);
                Err(e)
            }
        }
    }

    /// Scalable lookup that records its hop count.
    pub fn lookup(&mut self, eng: &mut Engine, from: NodeId, key: u64) -> Result<LookupResult, DsmError> {
        let r = self.ring.lookup_scalable(from, key)?;
        eng.record("lookup_hops", format!("{from}:{key}"), r.hops as f64);
        Ok(r)
    }
}

impl Actor for DsmOverlay {
    fn on_deliver(&mut self, _eng: &mut Engine, _to: NodeId, _msg: Message) {}

    fn on_timer(&mut self, eng: &mut Engine, owner: NodeId, timer: Timer) {
        if !self.ring.contains(owner) {
            return;
        }
        let now = eng.now();
        match timer.kind {
            TIMER_STABILIZE => {
                self.ring.check_predecessor(owner);
                self.ring.stabilize(owner);
                self.ring.evict_expired(owner, now);
                eng.set_timer(owner, self.cfg.stabilize_period, timer);
            }
            TIMER_FIX_FINGERS => {
                let i = eng.rng().gen_range(1..=self.cfg.m_bits);
                self.ring.fix_finger(owner, i);
                eng.set_timer(owner, self.cfg.stabilize_period, timer);
            }
            TIMER_REPUBLISH => {
                let Some(policy) = self.cfg.consistency else { return };
                if let Some(state) = self.owners.get_mut(&owner) {
                    let mut scratch = DescriptorStore::new();
                    let actions = consistency_tick(&policy, state, &mut scratch, now);
                    for a in actions {
                        if let ConsistencyAction::Republish(d) = a {
                            if self.ring.put(owner, d).is_ok() {
                                eng.record("republish", owner.to_string(), 1.0);
                            }
                        }
                    }
                }
                if let Some(p) = policy.republish_period {
                    eng.set_timer(owner, p, timer);
                }
            }
            TIMER_AUDIT => {
                let succ = self.ring.live_successor(owner);
                let ok = self.ring.lookup_scalable(succ, owner.0).map(|r| r.owner == owner).unwrap_or(false);
                eng.record("audit", owner.to_string(), if ok { 1.0 } else { 0.0 });
                if let Some(a) = self.cfg.audit_period {
                    eng.set_timer(owner, a, timer);
                }
            }
            _ => {}
        }
    }

    fn on_join(&mut self, eng: &mut Engine, node: NodeId) {
        self.join_node(eng, node);
    }

    fn on_leave(&mut self, _eng: &mut Engine, node: NodeId) {
        self.ring.fail(node);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeIdAllocator;
    use crate::sim::{seeded_rng, Action};

    fn ring(m: u32, ids: &[u64]) -> ChordRing {
        ChordRing::quiesced(KeySpace::new(m).unwrap(), ids.iter().map(|&i| NodeId(i)), 4)
    }

    fn random_ring(m: u32, n: usize, seed: u64) -> ChordRing {
        let ks = KeySpace::new(m).unwrap();
        let mut alloc = NodeIdAllocator::new(ks);
        let mut rng = seeded_rng(seed);
        let ids: Vec<NodeId> = (0..n).map(|_| alloc.random(&mut rng).unwrap()).collect();
        ChordRing::quiesced(ks, ids, 4)
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(successor_oracle(&[0, 1, 3], 2), Ok(3));
        assert_eq!(successor_oracle(&[0, 1, 3], 3), Ok(3));
        assert_eq!(successor_oracle(&[0, 1, 3], 6), Ok(0));
        assert_eq!(successor_oracle(&[5], 200), Ok(5));
        assert_eq!(successor_oracle(&[], 1), Err(DsmError::EmptyRing));
    }

    #[test]
    fn quiesced_fingers_small_ring() {
        // ring {0,1,3}, m=3
        let r = ring(3, &[0, 1, 3]);
        assert_eq!(r.node(NodeId(0)).unwrap().finger, vec![NodeId(1), NodeId(3), NodeId(0)]);
        assert_eq!(r.node(NodeId(1)).unwrap().finger, vec![NodeId(3), NodeId(3), NodeId(0)]);
        assert_eq!(r.node(NodeId(3)).unwrap().finger, vec![NodeId(0), NodeId(0), NodeId(0)]);
        assert!(r.successors_correct());
        assert!(r.fingers_correct());
    }

    #[test]
    fn wrap_lookup_small_ring() {
        let mut r = ring(3, &[0, 1, 3]);
        let res = r.lookup_scalable(NodeId(0), 6).unwrap();
        assert_eq!(res.owner, NodeId(0));
        assert_eq!(res.hops, 0);
        let res = r.lookup_scalable(NodeId(1), 6).unwrap();
        assert_eq!(res.path, vec![NodeId(1), NodeId(3), NodeId(0)]);
        let basic = r.lookup_basic(NodeId(1), 6).unwrap();
        assert_eq!(basic.owner, NodeId(0));
        assert_eq!(basic.hops, 2);
    }

    #[test]
    fn basic_four_hops() {
        let ids: Vec<u64> = (0..10).map(|i| i * 100).collect();
        let mut r = ring(10, &ids);
        // key owned by the node 4 positions clockwise
        let res = r.lookup_basic(NodeId(0), 350).unwrap();
        assert_eq!(res.owner, NodeId(400));
        assert_eq!(res.hops, 4);
        assert_eq!(r.lookup_basic(NodeId(300), 250).unwrap().hops, 0);
        assert_eq!(r.lookup_scalable(NodeId(300), 250).unwrap().hops, 0);
        assert_eq!(r.lookup_scalable(NodeId(300), 350).unwrap().hops, 1);
    }

    #[test]
    fn exhaustive_small_rings_match_oracle() {
        for seed in 0..5 {
            let mut r = random_ring(8, 20, seed);
            let ids = r.ids();
            let origins = ids.clone();
            for k in 0..256u64 {
                let want = NodeId(successor_oracle(&ids, k).unwrap());
                let from = NodeId(origins[k as usize % origins.len()]);
                assert_eq!(r.lookup_basic(from, k).unwrap().owner, want);
                let s = r.lookup_scalable(from, k).unwrap();
                assert_eq!(s.owner, want);
                assert!(s.hops <= 8);
            }
        }
    }

    #[test]
    fn basic_mean_hops_half_ring() {
        let mut r = random_ring(16, 128, 7);
        let ids = r.ids();
        let mut rng = seeded_rng(8);
        let ks = r.key_space();
        let total: u64 = (0..1000)
            .map(|_| {
                let from = NodeId(ids[rng.gen_range(0..ids.len())]);
                r.lookup_basic(from, ks.random_id(&mut rng)).unwrap().hops as u64
            })
            .sum();
        let mean = total as f64 / 1000.0;
        assert!((mean - 64.0).abs() <= 0.15 * 64.0, "mean={mean}");
    }

    #[test]
    fn single_node_owns_everything() {
        let mut r = ChordRing::new(KeySpace::new(8).unwrap(), 4);
        r.create(NodeId(9));
        assert_eq!(r.lookup_scalable(NodeId(9), 200).unwrap().owner, NodeId(9));
        assert_eq!(r.lookup_basic(NodeId(9), 3).unwrap().hops, 0);
    }

    #[test]
    fn join_notify_sequence() {
        // n_p = 10, n_s = 50, n = 30 joins between them
        let mut r = ring(8, &[10, 50, 200]);
        r.join(NodeId(30), NodeId(200)).unwrap();
        let n = r.node(NodeId(30)).unwrap();
        assert_eq!(n.successor, NodeId(50));
        assert_eq!(n.predecessor, None);
        r.stabilize(NodeId(30));
        assert_eq!(r.node(NodeId(50)).unwrap().predecessor, Some(NodeId(30)));
        r.stabilize(NodeId(10));
        assert_eq!(r.node(NodeId(10)).unwrap().successor, NodeId(30));
        assert_eq!(r.node(NodeId(30)).unwrap().predecessor, Some(NodeId(10)));
        assert!(r.successors_correct());
    }

    #[test]
    fn join_through_two_node_ring() {
        let mut r = ring(3, &[0, 3]);
        r.join(NodeId(1), NodeId(0)).unwrap();
        assert_eq!(r.node(NodeId(1)).unwrap().successor, NodeId(3));
        assert_eq!(r.join(NodeId(5), NodeId(6)), Err(DsmError::JoinFailed(NodeId(6))));
    }

    #[test]
    fn quiesced_stabilize_is_noop() {
        let mut r = random_ring(12, 30, 2);
        let before: Vec<ChordNode> = r.nodes.values().cloned().collect();
        for id in r.ids() {
            r.stabilize(NodeId(id));
        }
        let after: Vec<ChordNode> = r.nodes.values().cloned().collect();
        assert_eq!(before, after);
    }

    #[test]
    fn keys_move_to_new_predecessor() {
        let ks = KeySpace::new(8).unwrap();
        let mut r = ring(8, &[10, 100]);
        let d = Descriptor { key: ResourceKey(40), ..Descriptor::new(b"x", NodeId(10), ks, 0.0, None) };
        r.put(NodeId(10), d.clone()).unwrap();
        assert_eq!(r.node(NodeId(100)).unwrap().store.len(), 1);
        r.join(NodeId(50), NodeId(10)).unwrap();
        r.stabilize(NodeId(50));
        assert_eq!(r.node(NodeId(50)).unwrap().store.len(), 1);
        r.stabilize(NodeId(10));
        assert_eq!(r.get(NodeId(100), ResourceKey(40), 1.0).unwrap(), vec![d]);
    }

    #[test]
    fn put_get_set_semantics() {
        let ks = KeySpace::new(16).unwrap();
        let mut r = random_ring(16, 40, 3);
        let from = NodeId(r.ids()[0]);
        let a = Descriptor::new(b"song", NodeId(1), ks, 0.0, None);
        let b = Descriptor { owner: NodeId(2), ..a.clone() };
        r.put(from, a.clone()).unwrap();
        r.put(from, b.clone()).unwrap();
        let got = r.get(NodeId(r.ids()[5]), a.key, 1.0).unwrap();
        assert_eq!(got.len(), 2);
        assert!(got.contains(&a) && got.contains(&b));
    }

    #[test]
    fn successor_list_failover() {
        let mut r = random_ring(12, 20, 4);
        let ids = r.ids();
        let victim = NodeId(ids[3]);
        r.fail(victim);
        let from = NodeId(ids[2]);
        r.stabilize(from);
        assert_eq!(r.node(from).unwrap().successor, NodeId(ids[4]));
        for k in (0..4096).step_by(37) {
            let want = r.oracle_successor(k).unwrap();
            assert_eq!(r.lookup_scalable(from, k).unwrap().owner, want);
        }
    }

    #[test]
    fn random_joins_converge() {
        let cfg = DsmConfig { m_bits: 16, stabilize_period: 5.0, ..DsmConfig::default() };
        let mut ov = DsmOverlay::new(cfg).unwrap();
        let mut eng = Engine::new(21);
        let ks = KeySpace::new(16).unwrap();
        let mut alloc = NodeIdAllocator::new(ks);
        let mut rng = seeded_rng(22);
        let ids: Vec<NodeId> = (0..64).map(|_| alloc.random(&mut rng).unwrap()).collect();
        ov.join_node(&mut eng, ids[0]);
        for (j, &id) in ids.iter().enumerate().skip(1) {
            eng.schedule(j as f64 * 0.5, Action::Join(id)).unwrap();
        }
        eng.run_until(300.0, &mut ov).unwrap();
        assert_eq!(ov.ring().len(), 64);
        assert!(ov.ring().successors_correct());
    }

    #[test]
    fn republish_outlives_lifetime_until_owner_leaves() {
        use crate::membership::{ConsistencyMode, ConsistencyPolicy};
        let policy = ConsistencyPolicy {
            mode: ConsistencyMode::DsmRepublish,
            descriptor_lifetime: 60.0,
            republish_period: Some(30.0),
        };
        let cfg = DsmConfig { m_bits: 12, consistency: Some(policy), ..DsmConfig::default() };
        let mut ov = DsmOverlay::new(cfg).unwrap();
        let mut eng = Engine::new(5);
        for i in 0..16u64 {
            ov.join_node(&mut eng, NodeId(i * 256 + 7));
        }
        ov.ring_mut().rebuild_from_oracle();
        let ks = ov.ring().key_space();
        let owner = NodeId(7);
        let d = Descriptor::new(b"doc", owner, ks, 0.0, Some(60.0));
        ov.publish(&mut eng, d.clone()).unwrap();
        let reader = NodeId(3 * 256 + 7);
        eng.run_until(120.0, &mut ov).unwrap();
        assert_eq!(ov.get(&mut eng, reader, d.key).unwrap().len(), 1);
    }
}
