//! Swarm transfer simulation.
//!
//! Peers find each other through one tracker announce, then exchange pieces
//! over a fixed tick. On every tick each uploader splits its capacity equally
//! across its active transfers and each downloader splits its capacity across
//! its incoming transfers; a transfer runs at the smaller of the two shares.
//! Uploaders that still download rank neighbours by the rate received from
//! them; complete peers rank by the rate they upload to them.

use std::collections::{BTreeMap, BTreeSet};

use super::choke::{ChokeParams, ChokeState, LinkFlags, RateWindow};
use super::picker::{pick, PickerKind};
use super::protect::verify_piece;
use super::{PieceMap, SwarmError, SyntheticContent, DEFAULT_BLOCK_SIZE, DEFAULT_PIECE_SIZE};
use crate::model::{content_digest, Message, NodeId};
use crate::overlay::hm::Tracker;
use crate::reputation::{priority_weight, CreditLedger, Direction, UploadQueue, MIB};
use crate::sim::{Actor, Engine, MetricsLog, Timer};

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmConfig {
    pub total_size: u64,
    pub piece_size: u64,
    pub block_size: u64,
    pub choke: ChokeParams,
    /// `false` replaces choke rounds with a FIFO (or credit-ordered) upload queue.
    pub choke_enabled: bool,
    pub reputation: bool,
    pub rate_window: f64,
    pub picker: PickerKind,
    pub seed_count: usize,
    pub leecher_count: usize,
    pub freerider_count: usize,
    /// Extra complete peers whose uploads fail verification.
    pub poisoner_count: usize,
    /// Upload capacity of seeds and contributors, bytes/s.
    pub upload: f64,
    /// Download capacity of every leecher, bytes/s.
    pub download: f64,
    pub freerider_upload: f64,
    pub tracker_handout: usize,
    pub tick: f64,
    pub max_time: f64,
    pub content_seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            total_size: 128 * DEFAULT_PIECE_SIZE,
            piece_size: DEFAULT_PIECE_SIZE,
            block_size: DEFAULT_BLOCK_SIZE,
            choke: ChokeParams::default(),
            choke_enabled: true,
            reputation: false,
            rate_window: 20.0,
            picker: PickerKind::RarestFirst,
            seed_count: 1,
            leecher_count: 19,
            freerider_count: 1,
            poisoner_count: 0,
            upload: MIB,
            download: 2.0 * MIB,
            freerider_upload: 0.0,
            tracker_handout: 20,
            tick: 0.5,
            max_time: 3600.0,
            content_seed: 0xC0FFEE,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<(), SwarmError> {
        let bad = |m: &str| Err(SwarmError::InvalidConfig(m.to_string()));
        if self.choke.m == 0 || self.choke.k > self.choke.m {
            return bad("choke requires 0 <= K <= M and M >= 1");
        }
        if !(self.choke.t1 > 0.0 && self.choke.t2 > 0.0 && self.tick > 0.0 && self.rate_window > 0.0) {
            return bad("periods must be positive");
        }
        if self.seed_count + self.poisoner_count == 0 {
            return bad("at least one seed is required");
        }
        if !(self.upload >= 0.0 && self.download > 0.0 && self.freerider_upload >= 0.0) {
            return bad("capacities must be non-negative (download positive)");
        }
        if self.total_size == 0 {
            return bad("total_size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PeerClass {
    Seed,
    Poisoner,
    Contributor,
    FreeRider,
}

#[derive(Debug, Clone)]
struct Download {
    piece: u32,
    received: f64,
}

#[derive(Debug, Clone)]
struct Peer {
    class: PeerClass,
    upload: f64,
    download: f64,
    have: Vec<bool>,
    have_count: u32,
    neighbors: Vec<NodeId>,
    map: PieceMap,
    choke: ChokeState,
    queue_slots: BTreeSet<NodeId>,
    recv_rate: BTreeMap<NodeId, RateWindow>,
    sent_rate: BTreeMap<NodeId, RateWindow>,
    downloads: BTreeMap<NodeId, Download>,
    in_progress: BTreeSet<u32>,
    bad_sources: BTreeMap<u32, BTreeSet<NodeId>>,
    ledger: CreditLedger,
    completed_at: Option<f64>,
}

impl Peer {
    fn complete(&self) -> bool {
        self.have_count as usize == self.have.len()
    }
}

/// Results of one swarm run.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmOutcome {
    pub classes: BTreeMap<NodeId, PeerClass>,
    pub completion: BTreeMap<NodeId, f64>,
    pub contributor_mean: Option<f64>,
    pub freerider_mean: Option<f64>,
    /// Replica-count variance when leechers jointly held half of their target.
    pub variance_at_half: Option<f64>,
    pub corrupt_pieces: u64,
    pub max_unchoked: usize,
    pub regular_rounds: u64,
    pub optimistic_rounds: u64,
    pub pipeline_violations: u64,
    pub end_time: f64,
    pub metrics: MetricsLog,
}

impl SwarmOutcome {
    pub fn all_complete(&self) -> bool {
        self.classes.iter().all(|(n, c)| matches!(c, PeerClass::Seed | PeerClass::Poisoner) || self.completion.contains_key(n))
    }
}

const COORD: NodeId = NodeId(u64::MAX);
const TIMER_TICK: u32 = 60;
const TIMER_REGULAR: u32 = 61;
const TIMER_OPTIMISTIC: u32 = 62;

pub struct SwarmSim {
    cfg: SwarmConfig,
    content: SyntheticContent,
    peers: Vec<Peer>,
    honest_verified: Vec<bool>,
    leecher_target: u64,
    leecher_held: u64,
    variance_at_half: Option<f64>,
    corrupt: u64,
    max_unchoked: usize,
    regular_rounds: u64,
    optimistic_rounds: u64,
    pipeline_violations: u64,
    done: bool,
}

impl SwarmSim {
    pub fn new(cfg: SwarmConfig) -> Result<Self, SwarmError> {
        cfg.validate()?;
        let content = SyntheticContent::new(cfg.content_seed, cfg.total_size, cfg.piece_size, cfg.block_size)?;
        let pieces = content.spec.piece_count();
        let mut classes = Vec::new();
        classes.extend(std::iter::repeat_n(PeerClass::Seed, cfg.seed_count));
        classes.extend(std::iter::repeat_n(PeerClass::Poisoner, cfg.poisoner_count));
        classes.extend(std::iter::repeat_n(PeerClass::Contributor, cfg.leecher_count));
        classes.extend(std::iter::repeat_n(PeerClass::FreeRider, cfg.freerider_count));
        let peers = classes
            .into_iter()
            .map(|class| {
                let full = matches!(class, PeerClass::Seed | PeerClass::Poisoner);
                Peer {
                    class,
                    upload: if class == PeerClass::FreeRider { cfg.freerider_upload } else { cfg.upload },
                    download: cfg.download,
                    have: vec![full; pieces as usize],
                    have_count: if full { pieces } else { 0 },
                    neighbors: Vec::new(),
                    map: PieceMap::new(pieces),
                    choke: ChokeState::new(cfg.choke),
                    queue_slots: BTreeSet::new(),
                    recv_rate: BTreeMap::new(),
                    sent_rate: BTreeMap::new(),
                    downloads: BTreeMap::new(),
                    in_progress: BTreeSet::new(),
                    bad_sources: BTreeMap::new(),
                    ledger: CreditLedger::new(),
                    completed_at: None,
                }
            })
            .collect::<Vec<_>>();
        let leechers = (cfg.leecher_count + cfg.freerider_count) as u64;
        Ok(Self {
            leecher_target: leechers * pieces as u64,
            content,
            peers,
            honest_verified: vec![false; pieces as usize],
            leecher_held: 0,
            variance_at_half: None,
            corrupt: 0,
            max_unchoked: 0,
            regular_rounds: 0,
            optimistic_rounds: 0,
            pipeline_violations: 0,
            done: false,
            cfg,
        })
    }

    pub fn content(&self) -> &SyntheticContent {
        &self.content
    }

    fn idx(n: NodeId) -> usize {
        n.0 as usize
    }

    fn connect(&mut self, a: NodeId, b: NodeId) {
        if a == b || self.peers[Self::idx(a)].neighbors.contains(&b) {
            return;
        }
        for (x, y) in [(a, b), (b, a)] {
            let bf = self.peers[Self::idx(y)].have.clone();
            let window = self.cfg.rate_window;
            let p = &mut self.peers[Self::idx(x)];
            p.neighbors.push(y);
            p.neighbors.sort();
            p.map.add_peer(y, bf);
            p.choke.links.insert(y, LinkFlags::default());
            p.recv_rate.insert(y, RateWindow::new(window));
            p.sent_rate.insert(y, RateWindow::new(window));
        }
    }

    fn form_swarm(&mut self, eng: &mut Engine) {
        let mut tracker = Tracker::new(self.cfg.tracker_handout);
        // the torrent is identified by the digest of its piece digests
        let info: Vec<u8> = self.content.spec.piece_digests.iter().flat_map(|d| d.0).collect();
        let digest = content_digest(&info);
        tracker.publish(digest);
        for i in 0..self.peers.len() {
            let me = NodeId(i as u64);
            eng.add_live(me);
            let handout = tracker.announce(me, digest, eng.rng()).expect("published");
            for other in handout {
                self.connect(me, other);
            }
        }
    }

    /// Pieces `d` could request from `u` right now.
    fn requestable(&self, d: usize, u: NodeId) -> Vec<u32> {
        let p = &self.peers[d];
        (0..p.have.len() as u32)
            .filter(|&i| {
                !p.have[i as usize]
                    && p.map.has(u, i)
                    && !p.in_progress.contains(&i)
                    && !p.bad_sources.get(&i).is_some_and(|s| s.contains(&u))
            })
            .collect()
    }

    fn interested(&self, d: usize, u: NodeId) -> bool {
        let p = &self.peers[d];
        (0..p.have.len()).any(|i| {
            !p.have[i] && p.map.has(u, i as u32) && !p.bad_sources.get(&(i as u32)).is_some_and(|s| s.contains(&u))
        })
    }

    fn refresh_interest(&mut self) {
        for u in 0..self.peers.len() {
            let uid = NodeId(u as u64);
            let flags: Vec<(NodeId, bool)> =
                self.peers[u].neighbors.iter().map(|&d| (d, self.interested(Self::idx(d), uid))).collect();
            for (d, f) in flags {
                if let Some(l) = self.peers[u].choke.links.get_mut(&d) {
                    l.interested_in_us = f;
                }
            }
        }
    }

    fn unchoked(&self, u: usize) -> BTreeSet<NodeId> {
        if self.cfg.choke_enabled {
            self.peers[u].choke.unchoked()
        } else {
            self.peers[u].queue_slots.clone()
        }
    }

    fn regular_round(&mut self, eng: &mut Engine) {
        self.refresh_interest();
        let now = eng.now();
        self.regular_rounds += 1;
        for u in 0..self.peers.len() {
            if self.peers[u].upload <= 0.0 {
                continue;
            }
            if self.cfg.choke_enabled {
                let p = &mut self.peers[u];
                let complete = p.complete();
                let (recv, sent) = (&mut p.recv_rate, &mut p.sent_rate);
                p.choke.regular_round(|n| {
                    let w = if complete { sent.get_mut(&n) } else { recv.get_mut(&n) };
                    w.map_or(0.0, |w| w.rate(now))
                });
            } else {
                let p = &self.peers[u];
                let mut q = UploadQueue::new();
                for d in p.choke.interested() {
                    let w = if self.cfg.reputation { priority_weight(p.ledger.credit_of(d)) } else { 1.0 };
                    q.push(d, w);
                }
                let slots: BTreeSet<NodeId> = std::iter::from_fn(|| q.pop()).take(self.cfg.choke.m).collect();
                self.peers[u].queue_slots = slots;
            }
            self.max_unchoked = self.max_unchoked.max(self.unchoked(u).len());
        }
    }

    fn optimistic_round(&mut self, eng: &mut Engine) {
        if !self.cfg.choke_enabled {
            return;
        }
        self.refresh_interest();
        self.optimistic_rounds += 1;
        for u in 0..self.peers.len() {
            if self.peers[u].upload <= 0.0 {
                continue;
            }
            self.peers[u].choke.optimistic_round(eng.rng());
            self.max_unchoked = self.max_unchoked.max(self.peers[u].choke.unchoked().len());
        }
    }

    fn start_download(&mut self, eng: &mut Engine, d: usize, u: NodeId) -> bool {
        let wanted = self.requestable(d, u);
        if wanted.is_empty() {
            return false;
        }
        let avail = self.peers[d].map.availability().to_vec();
        match pick(self.cfg.picker, &avail, wanted, eng.rng()) {
            Ok(piece) => {
                let p = &mut self.peers[d];
                p.in_progress.insert(piece);
                p.downloads.insert(u, Download { piece, received: 0.0 });
                true
            }
            Err(_) => false,
        }
    }

    fn tick(&mut self, eng: &mut Engine) {
        let now = eng.now();
        let dt = self.cfg.tick;
        self.refresh_interest();

        // requests on every unchoked, interested link
        let mut active: Vec<(usize, usize)> = Vec::new();
        for u in 0..self.peers.len() {
            if self.peers[u].upload <= 0.0 {
                continue;
            }
            let uid = NodeId(u as u64);
            for d in self.unchoked(u) {
                let di = Self::idx(d);
                let has = self.peers[di].downloads.contains_key(&uid) || self.start_download(eng, di, uid);
                if has {
                    active.push((u, di));
                } else if !self.requestable(di, uid).is_empty() {
                    self.pipeline_violations += 1;
                }
            }
        }
        // drop requests to uploaders that choked us
        for d in 0..self.peers.len() {
            let stale: Vec<NodeId> = self.peers[d]
                .downloads
                .keys()
                .copied()
                .filter(|u| !active.contains(&(Self::idx(*u), d)))
                .collect();
            for u in stale {
                let dl = self.peers[d].downloads.remove(&u).expect("listed");
                self.peers[d].in_progress.remove(&dl.piece);
            }
        }

        let mut up_n = vec![0usize; self.peers.len()];
        let mut down_n = vec![0usize; self.peers.len()];
        for &(u, d) in &active {
            up_n[u] += 1;
            down_n[d] += 1;
        }
        for &(u, d) in &active {
            let rate = (self.peers[u].upload / up_n[u] as f64).min(self.peers[d].download / down_n[d] as f64);
            let bytes = rate * dt;
            let (uid, did) = (NodeId(u as u64), NodeId(d as u64));
            self.peers[d].recv_rate.get_mut(&uid).expect("neighbor").record(now, bytes);
            self.peers[u].sent_rate.get_mut(&did).expect("neighbor").record(now, bytes);
            if self.cfg.reputation {
                self.peers[d].ledger.record_transfer(uid, Direction::Received, bytes as u64);
                self.peers[u].ledger.record_transfer(did, Direction::Sent, bytes as u64);
            }
            self.deliver(eng, u, d, bytes);
        }

        if self.leecher_target > 0 && self.variance_at_half.is_none() && 2 * self.leecher_held >= self.leecher_target {
            let v = self.replica_variance();
            self.variance_at_half = Some(v);
            eng.record("replica_variance_half", "swarm", v);
        }
        if self.peers.iter().all(|p| p.complete()) {
            self.done = true;
        }
    }

    fn deliver(&mut self, eng: &mut Engine, u: usize, d: usize, mut bytes: f64) {
        let uid = NodeId(u as u64);
        while bytes > 0.0 {
            let Some(dl) = self.peers[d].downloads.get_mut(&uid) else { return };
            let len = self.content.spec.piece_len(dl.piece) as f64;
            let take = bytes.min(len - dl.received);
            dl.received += take;
            bytes -= take;
            if dl.received + 1e-6 < len {
                return;
            }
            let piece = dl.piece;
            self.peers[d].downloads.remove(&uid);
            self.peers[d].in_progress.remove(&piece);
            self.finish_piece(eng, u, d, piece);
            if !self.start_download(eng, d, uid) {
                return;
            }
        }
    }

    fn finish_piece(&mut self, eng: &mut Engine, u: usize, d: usize, piece: u32) {
        let uid = NodeId(u as u64);
        let did = NodeId(d as u64);
        let ok = if self.peers[u].class == PeerClass::Poisoner {
            let mut data = self.content.piece_data(piece);
            let pos = (u * 7919 + piece as usize) % data.len();
            data[pos] ^= 0x01;
            verify_piece(&data, &self.content.spec, piece).is_ok()
        } else if self.honest_verified[piece as usize] {
            true
        } else {
            let ok = verify_piece(&self.content.piece_data(piece), &self.content.spec, piece).is_ok();
            self.honest_verified[piece as usize] = ok;
            ok
        };
        if !ok {
            self.corrupt += 1;
            self.peers[d].bad_sources.entry(piece).or_default().insert(uid);
            eng.record("corrupt_piece", format!("{did}:{uid}"), piece as f64);
            return;
        }
        let p = &mut self.peers[d];
        if p.have[piece as usize] {
            return;
        }
        p.have[piece as usize] = true;
        p.have_count += 1;
        self.leecher_held += 1;
        for n in p.neighbors.clone() {
            self.peers[Self::idx(n)].map.set_have(did, piece);
        }
        let p = &mut self.peers[d];
        if p.complete() && p.completed_at.is_none() {
            let t = eng.now();
            p.completed_at = Some(t);
            eng.record("complete", did.to_string(), t);
        }
    }

    /// Population variance of per-piece holder counts over all peers.
    pub fn replica_variance(&self) -> f64 {
        let pieces = self.content.spec.piece_count() as usize;
        let counts: Vec<f64> =
            (0..pieces).map(|i| self.peers.iter().filter(|p| p.have[i]).count() as f64).collect();
        let mean = counts.iter().sum::<f64>() / pieces as f64;
        counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / pieces as f64
    }

    /// Runs the swarm on a fresh engine seeded with `seed`.
    pub fn run(mut self, seed: u64) -> SwarmOutcome {
        let mut eng = Engine::new(seed);
        self.form_swarm(&mut eng);
        eng.add_live(COORD);
        self.regular_round(&mut eng);
        self.optimistic_round(&mut eng);
        eng.set_timer(COORD, 0.0, Timer::new(TIMER_TICK, 0));
        eng.set_timer(COORD, self.cfg.choke.t1, Timer::new(TIMER_REGULAR, 0));
        eng.set_timer(COORD, self.cfg.choke.t2, Timer::new(TIMER_OPTIMISTIC, 0));
        let max_time = self.cfg.max_time;
        while !self.done && eng.step(max_time, &mut self) {}
        let end_time = eng.now();
        if self.cfg.reputation {
            for (i, p) in self.peers.iter().enumerate() {
                for (n, e) in p.ledger.iter() {
                    eng.record("credit", format!("{i}:{n}"), e.credit());
                }
            }
        }
        self.outcome(end_time, eng.into_metrics())
    }

    fn outcome(&self, end_time: f64, metrics: MetricsLog) -> SwarmOutcome {
        let mut classes = BTreeMap::new();
        let mut completion = BTreeMap::new();
        for (i, p) in self.peers.iter().enumerate() {
            classes.insert(NodeId(i as u64), p.class);
            if let Some(t) = p.completed_at {
                completion.insert(NodeId(i as u64), t);
            }
        }
        let class_mean = |c: PeerClass| {
            let v: Vec<f64> = self.peers.iter().filter(|p| p.class == c).filter_map(|p| p.completed_at).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        SwarmOutcome {
            contributor_mean: class_mean(PeerClass::Contributor),
            freerider_mean: class_mean(PeerClass::FreeRider),
            classes,
            completion,
            variance_at_half: self.variance_at_half,
            corrupt_pieces: self.corrupt,
            max_unchoked: self.max_unchoked,
            regular_rounds: self.regular_rounds,
            optimistic_rounds: self.optimistic_rounds,
            pipeline_violations: self.pipeline_violations,
            end_time,
            metrics,
        }
    }
}

impl Actor for SwarmSim {
    fn on_deliver(&mut self, _eng: &mut Engine, _to: NodeId, _msg: Message) {}

    fn on_timer(&mut self, eng: &mut Engine, owner: NodeId, timer: Timer) {
        if self.done {
            return;
        }
        match timer.kind {
            TIMER_TICK => {
                self.tick(eng);
                eng.set_timer(owner, self.cfg.tick, timer);
            }
            TIMER_REGULAR => {
                self.regular_round(eng);
                eng.set_timer(owner, self.cfg.choke.t1, timer);
            }
            TIMER_OPTIMISTIC => {
                self.optimistic_round(eng);
                eng.set_timer(owner, self.cfg.choke.t2, timer);
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SwarmConfig {
        SwarmConfig { total_size: 32 * DEFAULT_PIECE_SIZE, leecher_count: 6, freerider_count: 0, ..SwarmConfig::default() }
    }

    #[test]
    fn everyone_completes() {
        let o = SwarmSim::new(small()).unwrap().run(1);
        assert!(o.all_complete());
        assert!(o.max_unchoked <= 5);
        assert_eq!(o.pipeline_violations, 0);
        assert_eq!(o.corrupt_pieces, 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = SwarmSim::new(small()).unwrap().run(5);
        let b = SwarmSim::new(small()).unwrap().run(5);
        assert_eq!(a, b);
    }

    #[test]
    fn poisoned_pieces_refetched() {
        let cfg = SwarmConfig {
            total_size: 8 * DEFAULT_PIECE_SIZE,
            seed_count: 1,
            poisoner_count: 1,
            leecher_count: 1,
            freerider_count: 0,
            ..SwarmConfig::default()
        };
        let o = SwarmSim::new(cfg).unwrap().run(2);
        assert!(o.all_complete());
        assert!(o.corrupt_pieces > 0);
    }

    #[test]
    fn queue_mode_completes() {
        let cfg = SwarmConfig { choke_enabled: false, reputation: true, ..small() };
        let o = SwarmSim::new(cfg).unwrap().run(3);
        assert!(o.all_complete());
        assert!(o.metrics.named("credit").count() > 0);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SwarmConfig { seed_count: 0, ..SwarmConfig::default() };
        assert!(SwarmSim::new(cfg).is_err());
        let cfg = SwarmConfig { block_size: 10_000, ..SwarmConfig::default() };
        assert!(SwarmSim::new(cfg).is_err());
    }
}
