//! Local reputation: each peer keeps its own credit ledger for the peers it
//! traded with (eMule credit rule) and orders its upload queue by credit.
//!
//! Transfer totals are tracked in MiB (2^20 bytes).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Message, NodeId};
use crate::sim::{exp_holding_time, Actor, Engine, Timer};

pub const MIB: f64 = 1_048_576.0;
pub const CREDIT_MIN: f64 = 1.0;
pub const CREDIT_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReputationError {
    #[error("transfer totals must be non-negative (got uploaded={uploaded}, downloaded={downloaded})")]
    NegativeInput { uploaded: f64, downloaded: f64 },
}

/// Credit for a peer that uploaded `uploaded` MiB to us and downloaded
/// `downloaded` MiB from us.
///
/// `min(2·up/down, sqrt(up + 2))` clamped to `[1, 10]`, where the ratio term is
/// 10 when `down = 0` and the root term is 1 when `up < 1`.
pub fn credit(uploaded: f64, downloaded: f64) -> Result<f64, ReputationError> {
    if !(uploaded >= 0.0 && downloaded >= 0.0) {
        return Err(ReputationError::NegativeInput { uploaded, downloaded });
    }
    let ratio = if downloaded == 0.0 { CREDIT_MAX } else { uploaded * 2.0 / downloaded };
    let root = if uploaded < 1.0 { 1.0 } else { (uploaded + 2.0).sqrt() };
    Ok(ratio.min(root).clamp(CREDIT_MIN, CREDIT_MAX))
}

/// Queue weight for a credit value.
pub fn priority_weight(credit: f64) -> f64 {
    credit
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// We received data from the peer.
    Received,
    /// The peer received data from us.
    Sent,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CreditEntry {
    /// MiB the peer uploaded to us.
    pub uploaded_total: f64,
    /// MiB the peer downloaded from us.
    pub downloaded_total: f64,
}

impl CreditEntry {
    pub fn credit(&self) -> f64 {
        credit(self.uploaded_total, self.downloaded_total).expect("totals are non-negative")
    }
}

/// One peer's subjective view of the peers it traded with.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CreditLedger {
    entries: BTreeMap<NodeId, CreditEntry>,
}

impl CreditLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_transfer(&mut self, peer: NodeId, dir: Direction, bytes: u64) {
        let mib = bytes as f64 / MIB;
        let e = self.entries.entry(peer).or_default();
        match dir {
            Direction::Received => e.uploaded_total += mib,
            Direction::Sent => e.downloaded_total += mib,
        }
    }

    pub fn entry(&self, peer: NodeId) -> CreditEntry {
        self.entries.get(&peer).copied().unwrap_or_default()
    }

    pub fn credit_of(&self, peer: NodeId) -> f64 {
        self.entry(peer).credit()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, CreditEntry)> + '_ {
        self.entries.iter().map(|(n, e)| (*n, *e))
    }
}

/// Pending upload requests served by descending weight, FIFO among equals.
#[derive(Debug, Clone, Default)]
pub struct UploadQueue {
    waiting: Vec<(NodeId, f64, u64)>,
    seq: u64,
}

impl UploadQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, peer: NodeId, weight: f64) {
        self.waiting.push((peer, weight, self.seq));
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<NodeId> {
        let best = self
            .waiting
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|(i, _)| i)?;
        Some(self.waiting.remove(best).0)
    }

    /// Recomputes every waiting weight.
    pub fn reweigh(&mut self, mut weight: impl FnMut(NodeId) -> f64) {
        for w in &mut self.waiting {
            w.1 = weight(w.0);
        }
    }

    pub fn contains(&self, peer: NodeId) -> bool {
        self.waiting.iter().any(|w| w.0 == peer)
    }

    pub fn len(&self) -> usize {
        self.waiting.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waiting.is_empty()
    }
}

/// Parameters of a single-server upload queue shared by contributors and free riders.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueScenario {
    pub contributors: usize,
    pub free_riders: usize,
    /// Mean time between requests of one client, seconds.
    pub mean_request_gap: f64,
    /// Data served per request, MiB.
    pub chunk_mib: f64,
    /// Server upload rate, MiB/s.
    pub server_rate: f64,
    /// MiB a contributor uploads to the server with each request.
    pub contribution_mib: f64,
    pub duration: f64,
    /// Order the queue by credit; `false` serves strictly FIFO.
    pub use_credit: bool,
}

impl Default for QueueScenario {
    fn default() -> Self {
        Self {
            contributors: 8,
            free_riders: 8,
            mean_request_gap: 8.0,
            chunk_mib: 1.0,
            server_rate: 2.0,
            contribution_mib: 1.0,
            duration: 2000.0,
            use_credit: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QueueOutcome {
    pub contributor_mean_wait: f64,
    pub free_rider_mean_wait: f64,
    pub served: u64,
}

const TIMER_REQUEST: u32 = 50;
const TIMER_SERVED: u32 = 51;
const SERVER: NodeId = NodeId(0);

struct QueueSim {
    sc: QueueScenario,
    ledger: CreditLedger,
    queue: UploadQueue,
    arrived: BTreeMap<NodeId, f64>,
    busy: bool,
    waits: [Vec<f64>; 2],
}

impl QueueSim {
    fn is_contributor(&self, n: NodeId) -> bool {
        n.0 >= 1 && n.0 <= self.sc.contributors as u64
    }

    fn serve_next(&mut self, eng: &mut Engine) {
        if self.busy {
            return;
        }
        if self.sc.use_credit {
            let ledger = &self.ledger;
            self.queue.reweigh(|n| priority_weight(ledger.credit_of(n)));
        }
        let Some(next) = self.queue.pop() else { return };
        let wait = eng.now() - self.arrived.remove(&next).expect("queued");
        let class = usize::from(!self.is_contributor(next));
        self.waits[class].push(wait);
        self.busy = true;
        eng.set_timer(SERVER, self.sc.chunk_mib / self.sc.server_rate, Timer::new(TIMER_SERVED, next.0));
    }
}

impl Actor for QueueSim {
    fn on_deliver(&mut self, _eng: &mut Engine, _to: NodeId, _msg: Message) {}

    fn on_timer(&mut self, eng: &mut Engine, owner: NodeId, timer: Timer) {
        match timer.kind {
            TIMER_REQUEST => {
                if !self.queue.contains(owner) {
                    if self.is_contributor(owner) {
                        let bytes = (self.sc.contribution_mib * MIB) as u64;
                        self.ledger.record_transfer(owner, Direction::Received, bytes);
                    }
                    let w = priority_weight(self.ledger.credit_of(owner));
                    self.queue.push(owner, if self.sc.use_credit { w } else { 1.0 });
                    self.arrived.insert(owner, eng.now());
                    self.serve_next(eng);
                }
                let gap = exp_holding_time(eng.rng(), self.sc.mean_request_gap).unwrap_or(f64::INFINITY);
                if gap.is_finite() {
                    eng.set_timer(owner, gap, timer);
                }
            }
            TIMER_SERVED => {
                let client = NodeId(timer.arg);
                self.ledger.record_transfer(client, Direction::Sent, (self.sc.chunk_mib * MIB) as u64);
                eng.record("credit", format!("{SERVER}:{client}"), self.ledger.credit_of(client));
                self.busy = false;
                self.serve_next(eng);
            }
            _ => {}
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Runs the queue scenario; clients `1..=contributors` contribute, the rest free-ride.
pub fn simulate_upload_queue(sc: &QueueScenario, seed: u64) -> QueueOutcome {
    let mut eng = Engine::new(seed);
    eng.add_live(SERVER);
    let clients = (sc.contributors + sc.free_riders) as u64;
    for c in 1..=clients {
        eng.add_live(NodeId(c));
        let first = exp_holding_time(eng.rng(), sc.mean_request_gap).unwrap_or(0.0);
        eng.set_timer(NodeId(c), first, Timer::new(TIMER_REQUEST, 0));
    }
    let mut sim = QueueSim {
        sc: sc.clone(),
        ledger: CreditLedger::new(),
        queue: UploadQueue::new(),
        arrived: BTreeMap::new(),
        busy: false,
        waits: [Vec::new(), Vec::new()],
    };
    eng.run_until(sc.duration, &mut sim).expect("forward in time");
    QueueOutcome {
        contributor_mean_wait: mean(&sim.waits[0]),
        free_rider_mean_wait: mean(&sim.waits[1]),
        served: (sim.waits[0].len() + sim.waits[1].len()) as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn credit_rules() {
        assert_eq!(credit(0.0, 0.0), Ok(1.0));
        assert!((credit(8.0, 4.0).unwrap() - 3.1622776601683795).abs() < 1e-9);
        assert_eq!(credit(1000.0, 10.0), Ok(10.0));
        assert!(matches!(credit(-1.0, 0.0), Err(ReputationError::NegativeInput { .. })));
        assert!(credit(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn ledger_bookkeeping() {
        let mut l = CreditLedger::new();
        let p = NodeId(4);
        assert_eq!(l.credit_of(NodeId(99)), 1.0);
        l.record_transfer(p, Direction::Received, 4 * MIB as u64);
        assert_eq!(l.entry(p).uploaded_total, 4.0);
        let mut split = CreditLedger::new();
        split.record_transfer(p, Direction::Received, MIB as u64);
        split.record_transfer(p, Direction::Received, 3 * MIB as u64);
        assert_eq!(split.credit_of(p), l.credit_of(p));
    }

    #[test]
    fn ledgers_are_subjective() {
        let mut a = CreditLedger::new();
        let b = CreditLedger::new();
        a.record_transfer(NodeId(3), Direction::Received, 50 * MIB as u64);
        assert_ne!(a.credit_of(NodeId(3)), b.credit_of(NodeId(3)));
    }

    #[test]
    fn queue_order() {
        let mut q = UploadQueue::new();
        q.push(NodeId(1), 1.0);
        q.push(NodeId(2), 10.0);
        q.push(NodeId(3), 1.0);
        assert_eq!(q.pop(), Some(NodeId(2)));
        assert_eq!(q.pop(), Some(NodeId(1)));
        assert_eq!(q.pop(), Some(NodeId(3)));
        assert_eq!(q.pop(), None);
    }

    #[test]
    fn contributors_wait_less() {
        for seed in 0..10 {
            let o = simulate_upload_queue(&QueueScenario::default(), seed);
            assert!(o.served > 100);
            assert!(o.contributor_mean_wait < o.free_rider_mean_wait, "seed {seed}: {o:?}");
        }
    }
}
