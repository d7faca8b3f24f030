//! Decentralized unstructured overlay: bounded random peer views, flooding
//! search with TTL and duplicate suppression, replies along the reverse path.
//!
//! TTL semantics: every relay (the originator included) sends `ttl - 1`,
//! saturating at zero, and a node only relays a query that arrived with
//! `ttl > 0`. A query issued with `ttl = t >= 1` therefore reaches nodes at
//! most `t` hops away; `ttl = 0` reaches only the originator's neighbours.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::Rng;

use crate::membership::{bootstrap_peer_based, scope_check, DescriptorStore, Group, Mediator, PeerCache, Scope};
use crate::model::{Descriptor, GroupId, Message, MessageId, MessageIdGen, MessageKind, NodeId, Payload, ResourceKey};
use crate::sim::{Actor, Engine, LinkModel, SimRng, Timer};
use crate::topology::TopologySnapshot;

const TIMER_PING: u32 = 1;
const TIMER_CACHE_SWEEP: u32 = 2;

/// Bounded neighbour set of one peer.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerView {
    owner: NodeId,
    neighbors: BTreeSet<NodeId>,
    max_size: usize,
}

impl PeerView {
    pub fn new(owner: NodeId, max_size: usize) -> Self {
        Self { owner, neighbors: BTreeSet::new(), max_size }
    }

    pub fn insert(&mut self, n: NodeId) -> bool {
        if n == self.owner || self.is_full() {
            return false;
        }
        self.neighbors.insert(n)
    }

    pub fn remove(&mut self, n: NodeId) -> bool {
        self.neighbors.remove(&n)
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.neighbors.contains(&n)
    }

    pub fn is_full(&self) -> bool {
        self.neighbors.len() >= self.max_size
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbors.iter().copied()
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<NodeId> {
        if self.neighbors.is_empty() {
            return None;
        }
        self.neighbors.iter().nth(rng.gen_range(0..self.neighbors.len())).copied()
    }
}

/// Per-node record of message ids already processed.
#[derive(Debug, Clone, Default)]
pub struct SeenTable {
    entries: HashMap<MessageId, (NodeId, f64)>,
    order: VecDeque<(f64, MessageId)>,
    retention: f64,
}

impl SeenTable {
    pub fn new(retention: f64) -> Self {
        Self { retention, ..Default::default() }
    }

    /// Records `msg_id` as arriving first from `from`; `false` for a duplicate.
    pub fn observe(&mut self, msg_id: MessageId, from: NodeId, now: f64) -> bool {
        self.purge(now);
        if self.entries.contains_key(&msg_id) {
            return false;
        }
        self.entries.insert(msg_id, (from, now));
        self.order.push_back((now, msg_id));
        true
    }

    pub fn first_from(&self, msg_id: MessageId) -> Option<NodeId> {
        self.entries.get(&msg_id).map(|e| e.0)
    }

    pub fn purge(&mut self, now: f64) {
        while let Some(&(t, id)) = self.order.front() {
            if now - t <= self.retention {
                break;
            }
            self.order.pop_front();
            self.entries.remove(&id);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn clear(&mut self) {
        self.entries.clear();
        self.order.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapMode {
    PeerCache,
    Mediated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumConfig {
    pub peerview_max: usize,
    pub forward_prob: f64,
    pub seen_retention: f64,
    /// Lifetime of cached query responses; `None` disables response caching.
    pub cache_lifetime: Option<f64>,
    /// Links a (re)joining node tries to establish.
    pub join_degree: usize,
    pub repair_walk_len: usize,
    pub bootstrap: BootstrapMode,
    pub peer_cache_size: usize,
    /// PING cadence; `None` disables peer discovery traffic.
    pub ping_period: Option<f64>,
}

impl Default for DumConfig {
    fn default() -> Self {
        Self {
            peerview_max: 32,
            forward_prob: 1.0,
            seen_retention: 600.0,
            cache_lifetime: None,
            join_degree: 4,
            repair_walk_len: 3,
            bootstrap: BootstrapMode::Mediated,
            peer_cache_size: 16,
            ping_period: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HitRecord {
    pub responder: NodeId,
    /// Nodes the reply traversed after leaving the responder, ending at the origin.
    pub path: Vec<NodeId>,
    pub descriptors: Vec<Descriptor>,
    pub arrived_at: f64,
}

/// Everything observed about one flooded query.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FloodTrace {
    pub origin: Option<NodeId>,
    pub key: Option<ResourceKey>,
    pub ttl: u32,
    /// Hop distance at which each node processed the query (origin = 0).
    pub processed: BTreeMap<NodeId, u32>,
    /// Total process invocations; equals `processed.len()` under dedup.
    pub process_events: u64,
    pub receptions: u64,
    pub duplicates: u64,
    pub copies_sent: u64,
    pub scope_drops: u64,
    pub hits: Vec<HitRecord>,
    pub path_lost: u64,
}

impl FloodTrace {
    /// Nodes reached, the origin included.
    pub fn coverage(&self) -> usize {
        self.processed.len()
    }
}

#[derive(Debug, Clone)]
struct DumNode {
    view: PeerView,
    seen: SeenTable,
    store: DescriptorStore,
    cache: DescriptorStore,
    peer_cache: PeerCache,
}

/// A descriptor returned by [`DumOverlay::local_lookup`].
#[derive(Debug, Clone, PartialEq)]
pub struct LookupEntry {
    pub descriptor: Descriptor,
    /// Served from the response cache rather than the node's own store.
    pub stale: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DumStats {
    pub path_lost: u64,
    pub scope_drops: u64,
    pub repairs: u64,
    pub bootstrap_failed: u64,
    pub pings: u64,
}

pub struct DumOverlay {
    cfg: DumConfig,
    nodes: BTreeMap<NodeId, DumNode>,
    ids: MessageIdGen,
    traces: BTreeMap<MessageId, FloodTrace>,
    in_flight: BTreeMap<(MessageId, NodeId), Vec<NodeId>>,
    group: Option<Group>,
    mediator: Mediator,
    stats: DumStats,
}

impl DumOverlay {
    pub fn new(cfg: DumConfig) -> Self {
        let handout = cfg.join_degree;
        Self {
            cfg,
            nodes: BTreeMap::new(),
            ids: MessageIdGen::new(),
            traces: BTreeMap::new(),
            in_flight: BTreeMap::new(),
            group: None,
            mediator: Mediator::new(handout),
            stats: DumStats::default(),
        }
    }

    /// Overlay whose peer views mirror the snapshot's adjacency.
    pub fn from_snapshot(snapshot: &TopologySnapshot, cfg: DumConfig) -> Self {
        let mut overlay = Self::new(cfg);
        for &n in snapshot.nodes() {
            overlay.add_node(n);
        }
        for &(a, b) in snapshot.edges() {
            overlay.connect(a, b);
        }
        overlay
    }

    pub fn config(&self) -> &DumConfig {
        &self.cfg
    }

    pub fn stats(&self) -> DumStats {
        self.stats
    }

    pub fn set_group(&mut self, group: Option<Group>) {
        self.group = group;
    }

    pub fn add_node(&mut self, n: NodeId) {
        let cfg = &self.cfg;
        self.nodes.entry(n).or_insert_with(|| DumNode {
            view: PeerView::new(n, cfg.peerview_max),
            seen: SeenTable::new(cfg.seen_retention),
            store: DescriptorStore::new(),
            cache: DescriptorStore::new(),
            peer_cache: PeerCache::new(cfg.peer_cache_size),
        });
        self.mediator.register(n);
    }

    /// Links `a` and `b` symmetrically if both views have room.
    pub fn connect(&mut self, a: NodeId, b: NodeId) -> bool {
        if a == b || !self.nodes.contains_key(&a) || !self.nodes.contains_key(&b) {
            return false;
        }
        if self.nodes[&a].view.contains(b) {
            return true;
        }
        if self.nodes[&a].view.is_full() || self.nodes[&b].view.is_full() {
            return false;
        }
        self.nodes.get_mut(&a).expect("a").view.insert(b);
        self.nodes.get_mut(&b).expect("b").view.insert(a);
        true
    }

    pub fn view(&self, n: NodeId) -> Option<&PeerView> {
        self.nodes.get(&n).map(|s| &s.view)
    }

    pub fn publish_local(&mut self, node: NodeId, d: Descriptor) {
        if let Some(state) = self.nodes.get_mut(&node) {
            state.store.insert(d);
        }
    }

    /// Removes every descriptor `node` holds on behalf of `owner`.
    pub fn withdraw(&mut self, node: NodeId, owner: NodeId) -> usize {
        self.nodes.get_mut(&node).map_or(0, |s| s.store.drain_where(|d| d.owner == owner).len())
    }

    pub fn trace(&self, id: MessageId) -> Option<&FloodTrace> {
        self.traces.get(&id)
    }

    pub fn traces(&self) -> &BTreeMap<MessageId, FloodTrace> {
        &self.traces
    }

    /// Descriptors for `key` held by `node`, plus cached responses flagged stale.
    pub fn local_lookup(&self, node: NodeId, key: ResourceKey, now: f64) -> Vec<LookupEntry> {
        let Some(state) = self.nodes.get(&node) else {
            return Vec::new();
        };
        let mut out: Vec<LookupEntry> =
            state.store.get(key, now).into_iter().map(|d| LookupEntry { descriptor: d, stale: false }).collect();
        if self.cfg.cache_lifetime.is_some() {
            out.extend(state.cache.get(key, now).into_iter().map(|d| LookupEntry { descriptor: d, stale: true }));
        }
        out
    }

    /// Live-node topology formed by the current peer views.
    pub fn snapshot(&self, eng: &Engine) -> TopologySnapshot {
        let live: Vec<NodeId> = self.nodes.keys().copied().filter(|&n| eng.is_live(n)).collect();
        let edges: Vec<(NodeId, NodeId)> = live
            .iter()
            .flat_map(|&a| {
                self.nodes[&a].view.iter().filter(move |&b| a < b && eng.is_live(b)).map(move |b| (a, b))
            })
            .collect();
        TopologySnapshot::new(live, edges).expect("views reference known nodes")
    }

    /// Schedules periodic housekeeping timers for every node.
    pub fn start_timers(&self, eng: &mut Engine) {
        for &n in self.nodes.keys() {
            if let Some(p) = self.cfg.ping_period {
                eng.set_timer(n, p, Timer::new(TIMER_PING, 0));
            }
            if let Some(l) = self.cfg.cache_lifetime {
                eng.set_timer(n, l, Timer::new(TIMER_CACHE_SWEEP, 0));
            }
        }
    }

    /// Floods a QUERY for `key` from `origin`.
    pub fn start_query(
        &mut self,
        eng: &mut Engine,
        origin: NodeId,
        key: ResourceKey,
        ttl: u32,
        tag: Option<GroupId>,
    ) -> MessageId {
        let msg_id = self.ids.next_id();
        let now = eng.now();
        let mut trace = FloodTrace { origin: Some(origin), key: Some(key), ttl, ..Default::default() };
        let msg = Message {
            msg_id,
            kind: MessageKind::Query,
            ttl: Some(ttl.saturating_sub(1)),
            group_tag: tag,
            src: origin,
            origin,
            payload: Payload::Key(key),
        };
        if let Some(state) = self.nodes.get_mut(&origin) {
            state.seen.observe(msg_id, origin, now);
            trace.processed.insert(origin, 0);
            trace.process_events += 1;
            // the originator always relays to its full view
            let targets: Vec<NodeId> = state.view.iter().collect();
            for to in targets {
                if eng.send(origin, to, msg.clone()) {
                    trace.copies_sent += 1;
                }
            }
        }
        self.traces.insert(msg_id, trace);
        msg_id
    }

    fn handle_query(&mut self, eng: &mut Engine, at: NodeId, msg: Message) {
        let now = eng.now();
        let Some(trace) = self.traces.get_mut(&msg.msg_id) else { return };
        trace.receptions += 1;
        if scope_check(&msg, self.group.as_ref(), at) == Scope::Drop {
            trace.scope_drops += 1;
            self.stats.scope_drops += 1;
            return;
        }
        let Some(state) = self.nodes.get_mut(&at) else { return };
        if !state.seen.observe(msg.msg_id, msg.src, now) {
            trace.duplicates += 1;
            return;
        }
        let hop = trace.processed.get(&msg.src).map_or(1, |h| h + 1);
        trace.processed.insert(at, hop);
        trace.process_events += 1;

        if let Payload::Key(key) = msg.payload {
            let mut found = state.store.get(key, now);
            if self.cfg.cache_lifetime.is_some() {
                found.extend(state.cache.get(key, now));
            }
            if !found.is_empty() {
                let hit = Message {
                    msg_id: msg.msg_id,
                    kind: MessageKind::QueryHit,
                    ttl: None,
                    group_tag: msg.group_tag,
                    src: at,
                    origin: at,
                    payload: Payload::Descriptors(found),
                };
                self.in_flight.insert((msg.msg_id, at), Vec::new());
                eng.send(at, msg.src, hit);
            }
        }

        let ttl = msg.ttl.unwrap_or(0);
        if ttl == 0 {
            return;
        }
        let relay = msg.relayed(at, Some(ttl - 1));
        let targets: Vec<NodeId> = state.view.iter().filter(|&n| n != msg.src).collect();
        let p = self.cfg.forward_prob;
        for to in targets {
            let forward = if p >= 1.0 {
                true
            } else if p <= 0.0 {
                false
            } else {
                eng.rng().gen_bool(p)
            };
            if forward && eng.send(at, to, relay.clone()) {
                trace.copies_sent += 1;
            }
        }
    }

    fn handle_hit(&mut self, eng: &mut Engine, at: NodeId, msg: Message) {
        let now = eng.now();
        let responder = msg.origin;
        let slot = (msg.msg_id, responder);
        let Some(trace) = self.traces.get_mut(&msg.msg_id) else { return };
        let Some(path) = self.in_flight.get_mut(&slot) else { return };
        path.push(at);
        let descriptors = match &msg.payload {
            Payload::Descriptors(d) => d.clone(),
            _ => Vec::new(),
        };
        let Some(state) = self.nodes.get_mut(&at) else { return };
        if let Some(life) = self.cfg.cache_lifetime {
            for d in &descriptors {
                if d.owner != at {
                    state.cache.insert(Descriptor { published_at: now, lifetime: Some(life), ..d.clone() });
                }
            }
        }
        if trace.origin == Some(at) {
            let path = self.in_flight.remove(&slot).unwrap_or_default();
            trace.hits.push(HitRecord { responder, path, descriptors, arrived_at: now });
            return;
        }
        match state.seen.first_from(msg.msg_id) {
            Some(prev) => {
                eng.send(at, prev, msg.relayed(at, None));
            }
            None => {
                trace.path_lost += 1;
                self.stats.path_lost += 1;
                self.in_flight.remove(&slot);
            }
        }
    }

    fn random_live<R: Rng + ?Sized>(&self, eng_live: &BTreeSet<NodeId>, exclude: NodeId, rng: &mut R) -> Option<NodeId> {
        let pool: Vec<NodeId> = eng_live.iter().copied().filter(|&n| n != exclude && self.nodes.contains_key(&n)).collect();
        if pool.is_empty() {
            None
        } else {
            Some(pool[rng.gen_range(0..pool.len())])
        }
    }

    fn random_walk(&self, start: NodeId, len: usize, rng: &mut SimRng) -> NodeId {
        let mut cur = start;
        for _ in 0..len {
            match self.nodes.get(&cur).and_then(|s| s.view.pick(rng)) {
                Some(next) => cur = next,
                None => break,
            }
        }
        cur
    }

    /// Refills one view slot of `node` from a random walk.
    fn repair(&mut self, eng: &mut Engine, node: NodeId) {
        let start = {
            let state = &self.nodes[&node];
            match state.view.pick(eng.rng()) {
                Some(s) => s,
                None => {
                    let live = eng.live_nodes().clone();
                    match self.random_live(&live, node, eng.rng()) {
                        Some(s) => s,
                        None => return,
                    }
                }
            }
        };
        let len = self.cfg.repair_walk_len;
        for _ in 0..3 {
            let end = self.random_walk(start, len, eng.rng());
            if end != node && eng.is_live(end) && !self.nodes[&node].view.contains(end) && self.connect(node, end) {
                self.stats.repairs += 1;
                return;
            }
        }
    }
}

impl Actor for DumOverlay {
    fn on_deliver(&mut self, eng: &mut Engine, to: NodeId, msg: Message) {
        match msg.kind {
            MessageKind::Query => self.handle_query(eng, to, msg),
            MessageKind::QueryHit => self.handle_hit(eng, to, msg),
            MessageKind::Ping => {
                let now = eng.now();
                if let Some(s) = self.nodes.get_mut(&to) {
                    s.peer_cache.observe(msg.src, now);
                }
                let pong = Message { kind: MessageKind::Pong, src: to, ..msg };
                let back = pong.origin;
                eng.send(to, back, pong);
            }
            MessageKind::Pong => {
                let now = eng.now();
                if let Some(s) = self.nodes.get_mut(&to) {
                    s.peer_cache.observe(msg.src, now);
                }
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, eng: &mut Engine, owner: NodeId, timer: Timer) {
        match timer.kind {
            TIMER_PING => {
                let id = self.ids.next_id();
                let targets: Vec<NodeId> = self.nodes[&owner].view.iter().collect();
                for to in targets {
                    let ping = Message {
                        msg_id: id,
                        kind: MessageKind::Ping,
                        ttl: Some(0),
                        group_tag: None,
                        src: owner,
                        origin: owner,
                        payload: Payload::Empty,
                    };
                    self.stats.pings += 1;
                    eng.send(owner, to, ping);
                }
                if let Some(p) = self.cfg.ping_period {
                    eng.set_timer(owner, p, timer);
                }
            }
            TIMER_CACHE_SWEEP => {
                let now = eng.now();
                if let Some(s) = self.nodes.get_mut(&owner) {
                    s.cache.evict_expired(now);
                }
                if let Some(l) = self.cfg.cache_lifetime {
                    eng.set_timer(owner, l, timer);
                }
            }
            _ => {}
        }
    }

    fn on_join(&mut self, eng: &mut Engine, node: NodeId) {
        self.add_node(node);
        let now = eng.now();
        let latency = eng.link().max_latency();
        let entry_points: Vec<NodeId> = match self.cfg.bootstrap {
            BootstrapMode::PeerCache => {
                let mut cache = self.nodes[&node].peer_cache.clone();
                let outcome = if cache.is_empty() {
                    None
                } else {
                    bootstrap_peer_based(&mut cache, latency, |n| eng.is_live(n)).ok()
                };
                self.nodes.get_mut(&node).expect("node").peer_cache = cache;
                match outcome {
                    Some(o) => {
                        let mut eps = vec![o.entry];
                        // walk from the entry point for the remaining links
                        for _ in 1..self.cfg.join_degree {
                            eps.push(self.random_walk(o.entry, self.cfg.repair_walk_len, eng.rng()));
                        }
                        eps
                    }
                    None => {
                        self.stats.bootstrap_failed += 1;
                        eng.record("bootstrap_failed", node.to_string(), 1.0);
                        self.mediator.bootstrap_mediated(node, eng.rng(), 0.0).unwrap_or_default()
                    }
                }
            }
            BootstrapMode::Mediated => self.mediator.bootstrap_mediated(node, eng.rng(), 0.0).unwrap_or_default(),
        };
        for ep in entry_points {
            if eng.is_live(ep) && self.connect(node, ep) {
                self.nodes.get_mut(&node).expect("node").peer_cache.observe(ep, now);
            }
        }
        if let Some(p) = self.cfg.ping_period {
            eng.set_timer(node, p, Timer::new(TIMER_PING, 0));
        }
        if let Some(l) = self.cfg.cache_lifetime {
            eng.set_timer(node, l, Timer::new(TIMER_CACHE_SWEEP, 0));
        }
    }

    fn on_leave(&mut self, eng: &mut Engine, node: NodeId) {
        self.mediator.leave(node);
        let Some(state) = self.nodes.get_mut(&node) else { return };
        let former: Vec<NodeId> = state.view.iter().collect();
        for &n in &former {
            state.peer_cache.observe(n, eng.now());
        }
        state.view.neighbors.clear();
        state.seen.clear();
        for n in &former {
            if let Some(s) = self.nodes.get_mut(n) {
                s.view.remove(node);
            }
        }
        for n in former {
            if eng.is_live(n) {
                self.repair(eng, n);
            }
        }
    }

    fn on_dropped(&mut self, _eng: &mut Engine, _to: NodeId, msg: &Message) {
        if msg.kind == MessageKind::QueryHit {
            if let Some(trace) = self.traces.get_mut(&msg.msg_id) {
                trace.path_lost += 1;
            }
            self.stats.path_lost += 1;
            self.in_flight.remove(&(msg.msg_id, msg.origin));
        }
    }
}

/// Floods one query over a static snapshot and returns its trace.
///
/// Every snapshot node is live; links have constant `latency`.
pub fn flood_snapshot(
    snapshot: &TopologySnapshot,
    origin: NodeId,
    ttl: u32,
    forward_prob: f64,
    seed: u64,
) -> FloodTrace {
    let cfg = DumConfig { peerview_max: usize::MAX, forward_prob, ..DumConfig::default() };
    let mut overlay = DumOverlay::from_snapshot(snapshot, cfg);
    let mut eng = Engine::new(seed).with_link(LinkModel::constant(0.05)).expect("valid link");
    for &n in snapshot.nodes() {
        eng.add_live(n);
    }
    let id = overlay.start_query(&mut eng, origin, ResourceKey(0), ttl, None);
    let horizon = 0.05 * (ttl as f64 + 2.0) * 2.0 + 1.0;
    eng.run_until(horizon, &mut overlay).expect("forward in time");
    overlay.traces.remove(&id).expect("trace")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KeySpace;
    use crate::sim::Action;
    use crate::topology::{generate_er, ErParams};

    fn path_graph(n: u64) -> TopologySnapshot {
        TopologySnapshot::new((0..n).map(NodeId), (0..n - 1).map(|i| (NodeId(i), NodeId(i + 1)))).unwrap()
    }

    fn setup(snapshot: &TopologySnapshot, cfg: DumConfig, seed: u64) -> (Engine, DumOverlay) {
        let overlay = DumOverlay::from_snapshot(snapshot, cfg);
        let mut eng = Engine::new(seed).with_link(LinkModel::constant(0.1)).unwrap();
        for &n in snapshot.nodes() {
            eng.add_live(n);
        }
        (eng, overlay)
    }

    #[test]
    fn line_ttl_two() {
        // A-B-C-D
        let t = flood_snapshot(&path_graph(4), NodeId(0), 2, 1.0, 1);
        let reached: Vec<u64> = t.processed.keys().map(|n| n.0).collect();
        assert_eq!(reached, vec![0, 1, 2]);
        assert_eq!(t.processed[&NodeId(2)], 2);
    }

    #[test]
    fn ttl_zero_reaches_neighbors_only() {
        let star_plus = TopologySnapshot::new(
            (0..5).map(NodeId),
            [(0, 1), (0, 2), (1, 3), (2, 4)].map(|(a, b)| (NodeId(a), NodeId(b))),
        )
        .unwrap();
        let t = flood_snapshot(&star_plus, NodeId(0), 0, 1.0, 1);
        let reached: Vec<u64> = t.processed.keys().map(|n| n.0).collect();
        assert_eq!(reached, vec![0, 1, 2]);
        assert_eq!(t.copies_sent, 2);
    }

    #[test]
    fn cycle_processes_once() {
        let tri = TopologySnapshot::new(
            (0..3).map(NodeId),
            [(0, 1), (1, 2), (0, 2)].map(|(a, b)| (NodeId(a), NodeId(b))),
        )
        .unwrap();
        let t = flood_snapshot(&tri, NodeId(0), 5, 1.0, 1);
        assert_eq!(t.process_events, 3);
        assert_eq!(t.coverage(), 3);
        assert!(t.duplicates > 0);
        assert!(t.copies_sent <= 2 * 3);
    }

    #[test]
    fn ttl_monotone_coverage() {
        let mut rng = crate::sim::seeded_rng(4);
        let g = generate_er(ErParams { n: 150, alpha: 3.0 }, &mut rng).unwrap();
        let mut prev: BTreeSet<NodeId> = BTreeSet::new();
        for ttl in 0..8 {
            let t = flood_snapshot(&g, NodeId(0), ttl, 1.0, 9);
            let now: BTreeSet<NodeId> = t.processed.keys().copied().collect();
            assert!(prev.is_subset(&now), "coverage shrank at ttl={ttl}");
            prev = now;
        }
    }

    #[test]
    fn probabilistic_flood_degenerate_cases() {
        let mut rng = crate::sim::seeded_rng(5);
        let g = generate_er(ErParams { n: 100, alpha: 5.0 }, &mut rng).unwrap();
        let full = flood_snapshot(&g, NodeId(3), 6, 1.0, 2);
        let full_again = flood_snapshot(&g, NodeId(3), 6, 1.0, 2);
        assert_eq!(full, full_again);
        let none = flood_snapshot(&g, NodeId(3), 6, 0.0, 2);
        let deg = g.neighbors_map()[&NodeId(3)].len();
        assert_eq!(none.coverage(), deg + 1);
    }

    fn ks() -> KeySpace {
        KeySpace::new(16).unwrap()
    }

    #[test]
    fn reverse_path_reply() {
        let g = path_graph(5);
        let (mut eng, mut ov) = setup(&g, DumConfig::default(), 1);
        let d = Descriptor::new(b"file", NodeId(3), ks(), 0.0, None);
        ov.publish_local(NodeId(3), d.clone());
        let id = ov.start_query(&mut eng, NodeId(0), d.key, 5, None);
        eng.run_until(10.0, &mut ov).unwrap();
        let t = ov.trace(id).unwrap();
        assert_eq!(t.hits.len(), 1);
        assert_eq!(t.hits[0].responder, NodeId(3));
        assert_eq!(t.hits[0].path, vec![NodeId(2), NodeId(1), NodeId(0)]);
        assert_eq!(t.hits[0].descriptors, vec![d]);
    }

    #[test]
    fn reply_path_lost_on_departure() {
        let g = path_graph(5);
        let (mut eng, mut ov) = setup(&g, DumConfig::default(), 1);
        let d = Descriptor::new(b"file", NodeId(4), ks(), 0.0, None);
        ov.publish_local(NodeId(4), d.clone());
        let id = ov.start_query(&mut eng, NodeId(0), d.key, 5, None);
        // query reaches node 4 at t=0.4; reply would cross node 2 at t=0.6
        eng.schedule(0.55, Action::Leave(NodeId(2))).unwrap();
        eng.run_until(10.0, &mut ov).unwrap();
        let t = ov.trace(id).unwrap();
        assert!(t.hits.is_empty());
        assert_eq!(t.path_lost, 1);
    }

    #[test]
    fn y_shaped_two_hits() {
        // 0-1, 1-2, 1-3, 2-4, 3-5 ; both leaves 4 and 5 hold the key
        let g = TopologySnapshot::new(
            (0..6).map(NodeId),
            [(0, 1), (1, 2), (1, 3), (2, 4), (3, 5)].map(|(a, b)| (NodeId(a), NodeId(b))),
        )
        .unwrap();
        let (mut eng, mut ov) = setup(&g, DumConfig::default(), 1);
        let a = Descriptor::new(b"shared", NodeId(4), ks(), 0.0, None);
        let b = Descriptor { owner: NodeId(5), ..a.clone() };
        ov.publish_local(NodeId(4), a.clone());
        ov.publish_local(NodeId(5), b);
        let id = ov.start_query(&mut eng, NodeId(0), a.key, 4, None);
        eng.run_until(10.0, &mut ov).unwrap();
        let mut paths: Vec<(NodeId, Vec<NodeId>)> =
            ov.trace(id).unwrap().hits.iter().map(|h| (h.responder, h.path.clone())).collect();
        paths.sort();
        assert_eq!(
            paths,
            vec![
                (NodeId(4), vec![NodeId(2), NodeId(1), NodeId(0)]),
                (NodeId(5), vec![NodeId(3), NodeId(1), NodeId(0)]),
            ]
        );
    }

    #[test]
    fn local_lookup_with_response_cache() {
        let g = path_graph(3);
        let cfg = DumConfig { cache_lifetime: Some(30.0), ..DumConfig::default() };
        let (mut eng, mut ov) = setup(&g, cfg, 1);
        let d = Descriptor::new(b"doc", NodeId(2), ks(), 0.0, None);
        ov.publish_local(NodeId(2), d.clone());
        assert_eq!(ov.local_lookup(NodeId(2), d.key, 0.0).len(), 1);
        assert!(ov.local_lookup(NodeId(0), d.key, 0.0).is_empty());
        // phase 1: discover
        ov.start_query(&mut eng, NodeId(0), d.key, 3, None);
        eng.run_until(5.0, &mut ov).unwrap();
        // phase 2: re-query locally
        let cached = ov.local_lookup(NodeId(0), d.key, 5.0);
        assert_eq!(cached.len(), 1);
        assert!(cached[0].stale);
        assert_eq!(cached[0].descriptor.owner, NodeId(2));
        assert!(ov.local_lookup(NodeId(0), d.key, 40.0).is_empty());
    }

    #[test]
    fn scoped_flood_stays_in_group() {
        let mut rng = crate::sim::seeded_rng(12);
        let g = generate_er(ErParams { n: 80, alpha: 6.0 }, &mut rng).unwrap();
        let (mut eng, mut ov) = setup(&g, DumConfig::default(), 1);
        let members: Vec<NodeId> = (0..80).filter(|i| i % 2 == 0).map(NodeId).collect();
        let group = Group::new(GroupId(1), members.clone(), crate::membership::GroupPolicy::Open).unwrap();
        ov.set_group(Some(group));
        let id = ov.start_query(&mut eng, NodeId(0), ResourceKey(1), 6, Some(GroupId(1)));
        eng.run_until(10.0, &mut ov).unwrap();
        let t = ov.trace(id).unwrap();
        assert!(t.processed.keys().all(|n| n.0 % 2 == 0));
        assert!(t.scope_drops > 0);
    }

    #[test]
    fn departure_triggers_view_repair() {
        let mut rng = crate::sim::seeded_rng(3);
        let g = generate_er(ErParams { n: 60, alpha: 5.0 }, &mut rng).unwrap();
        let (mut eng, mut ov) = setup(&g, DumConfig { peerview_max: 64, ..DumConfig::default() }, 3);
        let victim = NodeId(7);
        let nbrs: Vec<NodeId> = ov.view(victim).unwrap().iter().collect();
        eng.schedule(1.0, Action::Leave(victim)).unwrap();
        eng.run_until(2.0, &mut ov).unwrap();
        for n in nbrs {
            assert!(!ov.view(n).unwrap().contains(victim));
        }
        assert!(ov.stats().repairs > 0);
        let snap = ov.snapshot(&eng);
        assert!(!snap.nodes().contains(&victim));
    }

    #[test]
    fn rejoin_reconnects() {
        let g = path_graph(6);
        let cfg = DumConfig { bootstrap: BootstrapMode::PeerCache, ..DumConfig::default() };
        let (mut eng, mut ov) = setup(&g, cfg, 3);
        eng.schedule(1.0, Action::Leave(NodeId(2))).unwrap();
        eng.schedule(2.0, Action::Join(NodeId(2))).unwrap();
        eng.run_until(3.0, &mut ov).unwrap();
        assert!(!ov.view(NodeId(2)).unwrap().is_empty());
    }

    #[test]
    fn seen_table_retention() {
        let mut s = SeenTable::new(10.0);
        assert!(s.observe(MessageId(1), NodeId(1), 0.0));
        assert!(!s.observe(MessageId(1), NodeId(2), 5.0));
        assert_eq!(s.first_from(MessageId(1)), Some(NodeId(1)));
        s.purge(11.0);
        assert!(s.is_empty());
    }

    #[test]
    fn peer_view_bounds() {
        let mut v = PeerView::new(NodeId(0), 2);
        assert!(!v.insert(NodeId(0)));
        assert!(v.insert(NodeId(1)));
        assert!(v.insert(NodeId(2)));
        assert!(!v.insert(NodeId(3)));
        assert_eq!(v.len(), 2);
    }
}
