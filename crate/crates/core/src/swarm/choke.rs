//! Choke/unchoke slot scheduling.
//!
//! Every `t1` seconds the `m - k` interested peers with the highest measured
//! rate get the regular slots (ties by ascending id). Every `t2` seconds `k`
//! further interested peers are unchoked uniformly at random.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{Message, NodeId};
use crate::sim::{Actor, Engine, Timer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChokeParams {
    pub m: usize,
    pub k: usize,
    pub t1: f64,
    pub t2: f64,
}

impl Default for ChokeParams {
    fn default() -> Self {
        Self { m: 5, k: 1, t1: 10.0, t2: 30.0 }
    }
}

impl ChokeParams {
    pub fn regular_slots(&self) -> usize {
        self.m.saturating_sub(self.k)
    }
}

/// Top `m - k` peers by rate, ties broken by ascending id.
pub fn choke_round_regular(interested: &[(NodeId, f64)], params: &ChokeParams) -> Vec<NodeId> {
    let mut sorted = interested.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    sorted.into_iter().take(params.regular_slots()).map(|(n, _)| n).collect()
}

/// `k` uniform picks among interested peers outside the regular set.
pub fn choke_round_optimistic<R: Rng + ?Sized>(
    interested: &[NodeId],
    regular: &BTreeSet<NodeId>,
    params: &ChokeParams,
    rng: &mut R,
) -> Vec<NodeId> {
    let mut pool: Vec<NodeId> = interested.iter().copied().filter(|n| !regular.contains(n)).collect();
    pool.sort();
    pool.dedup();
    let take = params.k.min(pool.len());
    let (chosen, _) = pool.partial_shuffle(rng, take);
    let mut out = chosen.to_vec();
    out.sort();
    out
}

/// Sliding-window byte counter.
#[derive(Debug, Clone, PartialEq)]
pub struct RateWindow {
    window: f64,
    samples: VecDeque<(f64, f64)>,
    total: f64,
}

impl RateWindow {
    pub fn new(window: f64) -> Self {
        Self { window, samples: VecDeque::new(), total: 0.0 }
    }

    pub fn record(&mut self, t: f64, bytes: f64) {
        self.samples.push_back((t, bytes));
        self.total += bytes;
    }

    fn trim(&mut self, now: f64) {
        while let Some(&(t, b)) = self.samples.front() {
            if t > now - self.window {
                break;
            }
            self.samples.pop_front();
            self.total -= b;
        }
        if self.samples.is_empty() {
            self.total = 0.0;
        }
    }

    /// Mean bytes/s over `(now - window, now]`.
    pub fn rate(&mut self, now: f64) -> f64 {
        self.trim(now);
        self.total.max(0.0) / self.window
    }
}

/// Per-neighbour choke flags of one peer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkFlags {
    pub interested_in_us: bool,
    pub we_choke_them: bool,
    pub they_choke_us: bool,
}

impl Default for LinkFlags {
    fn default() -> Self {
        Self { interested_in_us: false, we_choke_them: true, they_choke_us: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChokeState {
    pub params: ChokeParams,
    pub links: BTreeMap<NodeId, LinkFlags>,
    regular: BTreeSet<NodeId>,
    optimistic: BTreeSet<NodeId>,
}

impl ChokeState {
    pub fn new(params: ChokeParams) -> Self {
        Self { params, links: BTreeMap::new(), regular: BTreeSet::new(), optimistic: BTreeSet::new() }
    }

    pub fn interested(&self) -> Vec<NodeId> {
        self.links.iter().filter(|(_, f)| f.interested_in_us).map(|(n, _)| *n).collect()
    }

    pub fn regular(&self) -> &BTreeSet<NodeId> {
        &self.regular
    }

    pub fn optimistic(&self) -> &BTreeSet<NodeId> {
        &self.optimistic
    }

    pub fn unchoked(&self) -> BTreeSet<NodeId> {
        self.regular.union(&self.optimistic).copied().collect()
    }

    pub fn is_unchoked(&self, n: NodeId) -> bool {
        self.regular.contains(&n) || self.optimistic.contains(&n)
    }

    fn sync_flags(&mut self) {
        let unchoked = self.unchoked();
        for (n, f) in self.links.iter_mut() {
            f.we_choke_them = !unchoked.contains(n);
        }
    }

    /// Regular round; `rate` gives the measured rate for a neighbour.
    pub fn regular_round(&mut self, mut rate: impl FnMut(NodeId) -> f64) -> &BTreeSet<NodeId> {
        let interested: Vec<(NodeId, f64)> = self.interested().into_iter().map(|n| (n, rate(n))).collect();
        self.regular = choke_round_regular(&interested, &self.params).into_iter().collect();
        self.optimistic.retain(|n| !self.regular.contains(n));
        // the optimistic slot never pushes the total past m
        while self.regular.len() + self.optimistic.len() > self.params.m {
            let last = *self.optimistic.iter().next_back().expect("nonempty");
            self.optimistic.remove(&last);
        }
        self.sync_flags();
        &self.regular
    }

    pub fn optimistic_round<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &BTreeSet<NodeId> {
        let interested = self.interested();
        let picks = choke_round_optimistic(&interested, &self.regular, &self.params, rng);
        self.optimistic = picks.into_iter().collect();
        self.sync_flags();
        &self.optimistic
    }

    /// Drops slots held by peers that stopped being interested.
    pub fn prune_uninterested(&mut self) {
        let links = &self.links;
        let keep = |n: &NodeId| links.get(n).is_some_and(|f| f.interested_in_us);
        self.regular.retain(keep);
        self.optimistic.retain(keep);
        self.sync_flags();
    }
}

/// One recorded round of a [`ChokeTrace`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChokeRound {
    pub time: f64,
    pub rates: BTreeMap<NodeId, f64>,
    pub unchoked: Vec<NodeId>,
}

/// Rounds fired by [`run_choke_trace`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChokeTrace {
    pub regular: Vec<ChokeRound>,
    pub optimistic: Vec<ChokeRound>,
    pub max_unchoked: usize,
}

const TIMER_REGULAR: u32 = 30;
const TIMER_OPTIMISTIC: u32 = 31;

struct ChokeDriver {
    state: ChokeState,
    peers: Vec<NodeId>,
    trace: ChokeTrace,
}

impl ChokeDriver {
    fn draw_rates(&mut self, eng: &mut Engine) -> BTreeMap<NodeId, f64> {
        // integer rates make ties likely, exercising the id tie-break
        self.peers.iter().map(|&n| (n, eng.rng().gen_range(0..8) as f64 * 10.0)).collect()
    }
}

impl Actor for ChokeDriver {
    fn on_deliver(&mut self, _eng: &mut Engine, _to: NodeId, _msg: Message) {}

    fn on_timer(&mut self, eng: &mut Engine, owner: NodeId, timer: Timer) {
        let now = eng.now();
        match timer.kind {
            TIMER_REGULAR => {
                let rates = self.draw_rates(eng);
                let unchoked: Vec<NodeId> = self.state.regular_round(|n| rates[&n]).iter().copied().collect();
                self.trace.regular.push(ChokeRound { time: now, rates, unchoked });
                eng.set_timer(owner, self.state.params.t1, timer);
            }
            TIMER_OPTIMISTIC => {
                let unchoked: Vec<NodeId> = self.state.optimistic_round(eng.rng()).iter().copied().collect();
                self.trace.optimistic.push(ChokeRound { time: now, rates: BTreeMap::new(), unchoked });
                eng.set_timer(owner, self.state.params.t2, timer);
            }
            _ => {}
        }
        self.trace.max_unchoked = self.trace.max_unchoked.max(self.state.unchoked().len());
    }
}

/// Runs the choke timers of one peer with `interested` neighbours for
/// `duration` seconds. Rates are redrawn from the engine RNG each regular round.
pub fn run_choke_trace(params: ChokeParams, interested: &[NodeId], duration: f64, seed: u64) -> ChokeTrace {
    let me = NodeId(u64::MAX);
    let mut state = ChokeState::new(params);
    for &n in interested {
        state.links.insert(n, LinkFlags { interested_in_us: true, ..LinkFlags::default() });
    }
    let mut driver = ChokeDriver { state, peers: interested.to_vec(), trace: ChokeTrace::default() };
    let mut eng = Engine::new(seed);
    eng.add_live(me);
    eng.set_timer(me, params.t1, Timer::new(TIMER_REGULAR, 0));
    eng.set_timer(me, params.t2, Timer::new(TIMER_OPTIMISTIC, 0));
    eng.run_until(duration, &mut driver).expect("forward in time");
    driver.trace
}
