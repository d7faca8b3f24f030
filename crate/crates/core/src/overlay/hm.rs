//! Hybrid overlay: a central index server (eMule-style publish/search) and a
//! tracker that keeps one swarm registry per content digest.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::membership::{consistency_tick, ConsistencyAction, ConsistencyPolicy, DescriptorStore, OwnerState};
use crate::model::{Descriptor, Digest160, Message, NodeId, ResourceKey};
use crate::sim::{Actor, Engine, Timer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HmError {
    #[error("peer {0} is not registered with the server")]
    NotRegistered(NodeId),
    #[error("unknown torrent {0}")]
    UnknownTorrent(Digest160),
}

/// Central catalogue of shared descriptors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexServer {
    offer_limit: usize,
    registered: BTreeSet<NodeId>,
    catalog: BTreeMap<ResourceKey, BTreeMap<NodeId, Descriptor>>,
    rejected: u64,
}

impl IndexServer {
    pub fn new(offer_limit: usize) -> Self {
        Self { offer_limit, ..Default::default() }
    }

    pub fn register(&mut self, peer: NodeId) {
        self.registered.insert(peer);
    }

    /// Drops `peer` and every descriptor it offered.
    pub fn unregister(&mut self, peer: NodeId) {
        self.registered.remove(&peer);
        self.withdraw(peer);
    }

    pub fn is_registered(&self, peer: NodeId) -> bool {
        self.registered.contains(&peer)
    }

    fn withdraw(&mut self, peer: NodeId) {
        self.catalog.retain(|_, providers| {
            providers.remove(&peer);
            !providers.is_empty()
        });
    }

    /// Replaces the peer's offered list; accepts at most `offer_limit` entries.
    pub fn offer_files(&mut self, peer: NodeId, descriptors: &[Descriptor]) -> Result<usize, HmError> {
        if !self.registered.contains(&peer) {
            return Err(HmError::NotRegistered(peer));
        }
        self.withdraw(peer);
        let accepted = descriptors.len().min(self.offer_limit);
        self.rejected += (descriptors.len() - accepted) as u64;
        for d in &descriptors[..accepted] {
            self.catalog.entry(d.key).or_default().insert(peer, d.clone());
        }
        Ok(accepted)
    }

    /// Updates one descriptor already offered by `peer`.
    pub fn notify_update(&mut self, peer: NodeId, d: Descriptor) -> Result<(), HmError> {
        if !self.registered.contains(&peer) {
            return Err(HmError::NotRegistered(peer));
        }
        self.catalog.entry(d.key).or_default().insert(peer, d);
        Ok(())
    }

    /// Registered providers of `key`, in ascending id order.
    pub fn server_search(&self, key: ResourceKey) -> Vec<(NodeId, Descriptor)> {
        self.catalog
            .get(&key)
            .map(|p| {
                p.iter().filter(|(n, _)| self.registered.contains(n)).map(|(n, d)| (*n, d.clone())).collect()
            })
            .unwrap_or_default()
    }

    pub fn search_digest(&self, digest: Digest160) -> Vec<NodeId> {
        let mut out: BTreeSet<NodeId> = BTreeSet::new();
        for providers in self.catalog.values() {
            for (n, d) in providers {
                if d.content_digest == digest && self.registered.contains(n) {
                    out.insert(*n);
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    /// Number of (key, provider) entries.
    pub fn catalog_len(&self) -> usize {
        self.catalog.values().map(|p| p.len()).sum()
    }
}

/// Swarm registry keyed by content digest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tracker {
    handout: usize,
    torrents: BTreeMap<Digest160, BTreeSet<NodeId>>,
    announces: u64,
    departures: u64,
}

impl Tracker {
    pub fn new(handout: usize) -> Self {
        Self { handout, ..Default::default() }
    }

    pub fn publish(&mut self, digest: Digest160) {
        self.torrents.entry(digest).or_default();
    }

    /// Adds `peer` to the swarm and returns up to `handout` other members.
    pub fn announce<R: Rng + ?Sized>(
        &mut self,
        peer: NodeId,
        digest: Digest160,
        rng: &mut R,
    ) -> Result<Vec<NodeId>, HmError> {
        let swarm = self.torrents.get_mut(&digest).ok_or(HmError::UnknownTorrent(digest))?;
        let mut others: Vec<NodeId> = swarm.iter().copied().filter(|&n| n != peer).collect();
        if swarm.insert(peer) {
            self.announces += 1;
        }
        let take = self.handout.min(others.len());
        let (chosen, _) = others.partial_shuffle(rng, take);
        Ok(chosen.to_vec())
    }

    /// Removes `peer` from every swarm.
    pub fn depart(&mut self, peer: NodeId) {
        for swarm in self.torrents.values_mut() {
            if swarm.remove(&peer) {
                self.departures += 1;
            }
        }
    }

    pub fn swarm(&self, digest: Digest160) -> Option<&BTreeSet<NodeId>> {
        self.torrents.get(&digest)
    }

    pub fn announces(&self) -> u64 {
        self.announces
    }

    pub fn departures(&self) -> u64 {
        self.departures
    }
}

const TIMER_NOTIFY: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct HmConfig {
    pub offer_limit: usize,
    pub tracker_handout: usize,
    pub reannounce_period: f64,
    pub consistency: Option<ConsistencyPolicy>,
}

impl Default for HmConfig {
    fn default() -> Self {
        Self { offer_limit: 200, tracker_handout: 20, reannounce_period: 1800.0, consistency: None }
    }
}

/// Index server driven by peer joins and departures.
pub struct HmOverlay {
    cfg: HmConfig,
    server: IndexServer,
    shared: BTreeMap<NodeId, OwnerState>,
}

impl HmOverlay {
    pub fn new(cfg: HmConfig) -> Self {
        let server = IndexServer::new(cfg.offer_limit);
        Self { cfg, server, shared: BTreeMap::new() }
    }

    pub fn server(&self) -> &IndexServer {
        &self.server
    }

    /// Registers a live peer and offers its shared list.
    pub fn connect(&mut self, eng: &mut Engine, peer: NodeId) {
        eng.add_live(peer);
        self.on_join(eng, peer);
    }

    pub fn share(&mut self, eng: &mut Engine, peer: NodeId, d: Descriptor) {
        let now = eng.now();
        self.shared.entry(peer).or_default().publish(d, now);
        if self.server.is_registered(peer) {
            self.offer(eng, peer);
        }
    }

    /// Changes a shared descriptor; the server learns of it on the next notify tick.
    pub fn edit(&mut self, peer: NodeId, d: Descriptor) {
        self.shared.entry(peer).or_default().edit(d);
    }

    fn offer(&mut self, eng: &mut Engine, peer: NodeId) {
        let list: Vec<Descriptor> = self.shared.get(&peer).map(|s| s.owned().cloned().collect()).unwrap_or_default();
        if let Ok(n) = self.server.offer_files(peer, &list) {
            eng.record("offer_accepted", peer.to_string(), n as f64);
        }
    }

    /// Server search from `peer`; records the provider count.
    pub fn search(&mut self, eng: &mut Engine, peer: NodeId, key: ResourceKey) -> Vec<(NodeId, Descriptor)> {
        let found = self.server.server_search(key);
        debug_assert!(found.iter().all(|(n, _)| eng.is_live(*n)));
        eng.record("search_providers", format!("{peer}:{key}"), found.len() as f64);
        found
    }
}

impl Actor for HmOverlay {
    fn on_deliver(&mut self, _eng: &mut Engine, _to: NodeId, _msg: Message) {}

    fn on_timer(&mut self, eng: &mut Engine, owner: NodeId, timer: Timer) {
        if timer.kind != TIMER_NOTIFY {
            return;
        }
        let Some(policy) = self.cfg.consistency else { return };
        if let Some(state) = self.shared.get_mut(&owner) {
            let mut scratch = DescriptorStore::new();
            for a in consistency_tick(&policy, state, &mut scratch, eng.now()) {
                if let ConsistencyAction::Notify(d) = a {
                    if self.server.notify_update(owner, d).is_ok() {
                        eng.record("notify", owner.to_string(), 1.0);
                    }
                }
            }
        }
        eng.set_timer(owner, self.cfg.reannounce_period, timer);
    }

    fn on_join(&mut self, eng: &mut Engine, node: NodeId) {
        self.server.register(node);
        self.offer(eng, node);
        if self.cfg.consistency.is_some() {
            eng.set_timer(node, self.cfg.reannounce_period, Timer::new(TIMER_NOTIFY, 0));
        }
    }

    fn on_leave(&mut self, _eng: &mut Engine, node: NodeId) {
        self.server.unregister(node);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{content_digest, KeySpace};
    use crate::sim::{seeded_rng, Action};

    fn ks() -> KeySpace {
        KeySpace::new(32).unwrap()
    }

    fn descs(owner: u64, n: usize) -> Vec<Descriptor> {
        (0..n).map(|i| Descriptor::new(format!("file-{i}").as_bytes(), NodeId(owner), ks(), 0.0, None)).collect()
    }

    #[test]
    fn offer_limit_caps_catalog() {
        let mut s = IndexServer::new(200);
        s.register(NodeId(1));
        assert_eq!(s.offer_files(NodeId(1), &descs(1, 250)), Ok(200));
        assert_eq!(s.rejected(), 50);
        assert_eq!(s.catalog_len(), 200);
    }

    #[test]
    fn reoffer_replaces_and_is_idempotent() {
        let mut s = IndexServer::new(200);
        s.register(NodeId(1));
        let mut list = descs(1, 3);
        s.offer_files(NodeId(1), &list).unwrap();
        let snapshot = s.clone();
        s.offer_files(NodeId(1), &list).unwrap();
        assert_eq!(s, snapshot);
        list[0] = Descriptor { published_at: 9.0, ..list[0].clone() };
        s.offer_files(NodeId(1), &list).unwrap();
        assert_eq!(s.server_search(list[0].key)[0].1.published_at, 9.0);
    }

    #[test]
    fn unregistered_peer_rejected() {
        let mut s = IndexServer::new(200);
        assert_eq!(s.offer_files(NodeId(4), &descs(4, 1)), Err(HmError::NotRegistered(NodeId(4))));
    }

    #[test]
    fn search_excludes_departed() {
        let mut s = IndexServer::new(200);
        let d = descs(1, 1);
        s.register(NodeId(1));
        s.offer_files(NodeId(1), &d).unwrap();
        assert_eq!(s.server_search(d[0].key).len(), 1);
        assert_eq!(s.search_digest(d[0].content_digest), vec![NodeId(1)]);
        s.unregister(NodeId(1));
        assert!(s.server_search(d[0].key).is_empty());
    }

    #[test]
    fn separate_servers_do_not_federate() {
        let mut a = IndexServer::new(200);
        let b = IndexServer::new(200);
        let d = descs(1, 1);
        a.register(NodeId(1));
        a.offer_files(NodeId(1), &d).unwrap();
        assert!(b.server_search(d[0].key).is_empty());
    }

    #[test]
    fn tracker_handout() {
        let digest = content_digest(b"movie");
        let mut t = Tracker::new(20);
        let mut rng = seeded_rng(1);
        assert_eq!(t.announce(NodeId(0), content_digest(b"other"), &mut rng), Err(HmError::UnknownTorrent(content_digest(b"other"))));
        t.publish(digest);
        assert!(t.announce(NodeId(0), digest, &mut rng).unwrap().is_empty());
        for i in 1..30 {
            t.announce(NodeId(i), digest, &mut rng).unwrap();
        }
        let got = t.announce(NodeId(29), digest, &mut rng).unwrap();
        let set: BTreeSet<NodeId> = got.iter().copied().collect();
        assert_eq!(got.len(), 20);
        assert_eq!(set.len(), 20);
        assert!(!set.contains(&NodeId(29)));
    }

    #[test]
    fn swarm_registry_conservation() {
        let digest = content_digest(b"x");
        let mut t = Tracker::new(5);
        t.publish(digest);
        let mut rng = seeded_rng(2);
        for i in 0..10 {
            t.announce(NodeId(i), digest, &mut rng).unwrap();
        }
        for i in 0..4 {
            t.depart(NodeId(i));
        }
        assert_eq!(t.swarm(digest).unwrap().len() as u64, t.announces() - t.departures());
    }

    #[test]
    fn overlay_follows_liveness() {
        let mut ov = HmOverlay::new(HmConfig::default());
        let mut eng = Engine::new(1);
        let d = descs(1, 1).remove(0);
        ov.connect(&mut eng, NodeId(1));
        ov.share(&mut eng, NodeId(1), d.clone());
        assert_eq!(ov.search(&mut eng, NodeId(2), d.key).len(), 1);
        eng.schedule(5.0, Action::Leave(NodeId(1))).unwrap();
        eng.run_until(6.0, &mut ov).unwrap();
        assert!(ov.search(&mut eng, NodeId(2), d.key).is_empty());
    }

    #[test]
    fn notify_pushes_edits() {
        use crate::membership::{ConsistencyMode, ConsistencyPolicy};
        let policy =
            ConsistencyPolicy { mode: ConsistencyMode::HmNotify, descriptor_lifetime: 3600.0, republish_period: None };
        let cfg = HmConfig { reannounce_period: 10.0, consistency: Some(policy), ..HmConfig::default() };
        let mut ov = HmOverlay::new(cfg);
        let mut eng = Engine::new(1);
        let d = descs(1, 1).remove(0);
        ov.connect(&mut eng, NodeId(1));
        ov.share(&mut eng, NodeId(1), d.clone());
        ov.edit(NodeId(1), Descriptor { published_at: 3.0, ..d.clone() });
        eng.run_until(11.0, &mut ov).unwrap();
        assert_eq!(ov.server().server_search(d.key)[0].1.published_at, 3.0);
    }
}
