//! Run orchestration: builds the overlay a scenario names, drives its workload
//! from a dedicated driver node, and collects metrics, snapshots and a summary.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use thiserror::Error;

use super::{BootstrapModeKey, ConsistencyModeKey, DsmBootstrap, OverlayKind, Scenario, ScenarioError, TopologyModel};
use crate::membership::Group;
use crate::model::{Descriptor, GroupId, KeySpace, NodeId, NodeIdAllocator};
use crate::overlay::dsm::{DsmConfig, DsmOverlay};
use crate::overlay::dum::{BootstrapMode, DumConfig, DumOverlay};
use crate::overlay::hm::{HmConfig, HmOverlay};
use crate::par;
use crate::sim::{seeded_rng, Action, Actor, ChurnConfig, Engine, Latency, LinkModel, MetricsLog, Timer};
use crate::swarm::SwarmSim;
use crate::topology::{
    fit_power_law, generate_ba, generate_er, generate_ws, metrics, tail_range, BaParams, ErParams,
    TopologySnapshot, WsParams,
};

/// Node that owns workload timers; never part of an overlay.
pub const DRIVER: NodeId = NodeId(u64::MAX - 1);

const T_PUBLISH: u32 = 90;
const T_QUERY: u32 = 91;
const T_LOOKUP: u32 = 92;
const T_GET: u32 = 93;
const T_SNAPSHOT: u32 = 94;

/// Key space for descriptor keys on unstructured and hybrid overlays.
const FLAT_KEY_BITS: u32 = 32;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("no topology snapshot was recorded")]
    NoSnapshot,
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Ordered `key = value` summary lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    fn push_f(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, format!("{value:.6}"));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.0 == key).map(|e| e.1.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

impl Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub scenario: Scenario,
    pub metrics: MetricsLog,
    pub summary: Summary,
    /// Overlay snapshots in time order.
    pub snapshots: Vec<(f64, TopologySnapshot)>,
}

impl RunArtifacts {
    /// Snapshot recorded closest to `t`; ties go to the earlier one.
    pub fn snapshot_near(&self, t: f64) -> Result<(f64, &TopologySnapshot), RunError> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()).then(a.0.total_cmp(&b.0)))
            .map(|(at, s)| (*at, s))
            .ok_or(RunError::NoSnapshot)
    }

    /// Writes `metrics.csv`, `summary.txt` and `scenario.toml` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.display().to_string(), source })?;
        let files = [
            ("metrics.csv", self.metrics.to_text()),
            ("summary.txt", self.summary.to_string()),
            ("scenario.toml", self.scenario.to_toml()),
        ];
        files.iter().map(|(name, body)| write_atomic(&dir.join(name), body)).collect()
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, body: &str) -> Result<PathBuf, RunError> {
    let io = |source| RunError::Io { path: path.display().to_string(), source };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, body).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)?;
    Ok(path.to_path_buf())
}

/// Writes the snapshot nearest to `t` as an edge list; returns its time.
pub fn export_topology(run: &RunArtifacts, t: f64, path: &Path) -> Result<f64, RunError> {
    let (at, snap) = run.snapshot_near(t)?;
    write_atomic(path, &snap.to_edge_list())?;
    Ok(at)
}

/// Runs the scenario once per seed. Runs are independent and fan out when
/// the `parallel` feature is on; results keep the order of `seeds`.
pub fn run_batch(s: &Scenario, seeds: &[u64]) -> Vec<Result<RunArtifacts, RunError>> {
    par::map_slice(seeds, |&seed| run(&Scenario { seed, ..s.clone() }))
}

/// Workload hooks layered over an overlay actor.
trait Driver<O: Actor> {
    fn on_timer(&mut self, ov: &mut O, eng: &mut Engine, timer: Timer);

    fn on_join(&mut self, ov: &mut O, eng: &mut Engine, node: NodeId) {
        ov.on_join(eng, node);
    }

    fn on_leave(&mut self, ov: &mut O, eng: &mut Engine, node: NodeId) {
        ov.on_leave(eng, node);
    }
}

struct Driven<O, D> {
    ov: O,
    drv: D,
}

impl<O: Actor, D: Driver<O>> Actor for Driven<O, D> {
    fn on_deliver(&mut self, eng: &mut Engine, to: NodeId, msg: crate::model::Message) {
        self.ov.on_deliver(eng, to, msg);
    }

    fn on_timer(&mut self, eng: &mut Engine, owner: NodeId, timer: Timer) {
        if owner == DRIVER {
            self.drv.on_timer(&mut self.ov, eng, timer);
        } else {
            self.ov.on_timer(eng, owner, timer);
        }
    }

    fn on_join(&mut self, eng: &mut Engine, node: NodeId) {
        self.drv.on_join(&mut self.ov, eng, node);
    }

    fn on_leave(&mut self, eng: &mut Engine, node: NodeId) {
        self.drv.on_leave(&mut self.ov, eng, node);
    }

    fn on_dropped(&mut self, eng: &mut Engine, to: NodeId, msg: &crate::model::Message) {
        self.ov.on_dropped(eng, to, msg);
    }
}

/// State shared by every driver.
struct Work {
    s: Scenario,
    ks: KeySpace,
    published: Vec<Descriptor>,
    snapshots: Vec<(f64, TopologySnapshot)>,
}

impl Work {
    fn new(s: &Scenario, ks: KeySpace) -> Self {
        Self { s: s.clone(), ks, published: Vec::new(), snapshots: Vec::new() }
    }

    fn lifetime(&self) -> Option<f64> {
        self.s.consistency.mode.map(|_| self.s.consistency.lifetime_s)
    }

    fn descriptor(&self, i: usize, owner: NodeId, now: f64) -> Descriptor {
        let body = format!("{}:item-{i}", self.s.seed);
        Descriptor::new(body.as_bytes(), owner, self.ks, now, self.lifetime())
    }

    /// Schedules the departure of the first publisher, if configured.
    fn after_first_publish(&self, eng: &mut Engine, owner: NodeId) {
        if let Some(t) = self.s.workload.owner_leave_s {
            let at = t.max(eng.now());
            eng.schedule(at, Action::Leave(owner)).expect("not in the past");
        }
    }

    fn snapshot(&mut self, eng: &mut Engine, snap: TopologySnapshot) {
        record_snapshot(eng, &snap);
        self.snapshots.push((eng.now(), snap));
        if let Some(p) = self.s.topology.snapshot_period_s {
            eng.set_timer(DRIVER, p, Timer::new(T_SNAPSHOT, 0));
        }
    }
}

fn pick(eng: &mut Engine, from: &[NodeId]) -> Option<NodeId> {
    if from.is_empty() {
        None
    } else {
        Some(from[eng.rng().gen_range(0..from.len())])
    }
}

fn live_peers(eng: &Engine) -> Vec<NodeId> {
    eng.live_nodes().iter().copied().filter(|&n| n != DRIVER).collect()
}

fn record_snapshot(eng: &mut Engine, snap: &TopologySnapshot) {
    eng.record("snapshot_nodes", "overlay", snap.node_count() as f64);
    eng.record("snapshot_edges", "overlay", snap.edge_count() as f64);
    if let Ok(m) = metrics(snap) {
        eng.record("snapshot_mean_degree", "overlay", m.mean_degree());
        eng.record("snapshot_cc", "overlay", m.clustering_coefficient);
        eng.record("snapshot_avg_distance", "overlay", m.avg_connected_distance);
        eng.record("snapshot_diameter", "overlay", m.diameter as f64);
        eng.record("snapshot_components", "overlay", m.component_count as f64);
    }
}

fn model_name(m: TopologyModel) -> &'static str {
    match m {
        TopologyModel::Er => "er",
        TopologyModel::Ws => "ws",
        TopologyModel::Ba => "ba",
    }
}

fn generate<R: Rng + ?Sized>(s: &Scenario, model: TopologyModel, n: usize, rng: &mut R) -> Result<TopologySnapshot, RunError> {
    let t = &s.topology;
    let g = match model {
        TopologyModel::Er => generate_er(ErParams { n, alpha: t.alpha }, rng),
        TopologyModel::Ws => generate_ws(WsParams { n, k_ring: t.k_ring, p_rewire: t.p_rewire }, rng),
        TopologyModel::Ba => generate_ba(BaParams { n, m_attach: t.m_attach, n0: t.n0 }, rng),
    };
    g.map_err(|e| RunError::Setup(format!("topology.{}: {e}", model_name(model))))
}

/// Generates and measures every model listed in `topology.analyze`.
fn analyze_topologies(s: &Scenario, eng: &mut Engine, summary: &mut Summary) -> Result<(), RunError> {
    for (i, &model) in s.topology.analyze.iter().enumerate() {
        let name = model_name(model);
        let mut rng = seeded_rng(s.seed ^ (0xA11A_0000 + i as u64));
        let g = generate(s, model, s.nodes, &mut rng)?;
        let m = metrics(&g).map_err(|e| RunError::Setup(e.to_string()))?;
        eng.record("topo_mean_degree", name, m.mean_degree());
        eng.record("topo_cc", name, m.clustering_coefficient);
        eng.record("topo_avg_distance", name, m.avg_connected_distance);
        eng.record("topo_diameter", name, m.diameter as f64);
        eng.record("topo_components", name, m.component_count as f64);
        summary.push_f(format!("topology.{name}.mean_degree"), m.mean_degree());
        summary.push_f(format!("topology.{name}.clustering"), m.clustering_coefficient);
        summary.push_f(format!("topology.{name}.avg_distance"), m.avg_connected_distance);
        summary.push(format!("topology.{name}.diameter"), m.diameter);
        summary.push(format!("topology.{name}.components"), m.component_count);
        if model == TopologyModel::Ba {
            let range = tail_range(&m.degree_histogram, s.topology.m_attach, 5);
            if let Ok(fit) = fit_power_law(&m.degree_histogram, range) {
                eng.record("topo_tau", name, fit.tau);
                summary.push_f(format!("topology.{name}.tau"), fit.tau);
            }
        }
    }
    Ok(())
}

fn engine_for(s: &Scenario) -> Result<Engine, RunError> {
    let link = LinkModel { latency: Latency::Constant(s.latency_s), loss_rate: s.loss_rate };
    let mut eng = Engine::new(s.seed).with_link(link).map_err(|e| RunError::Setup(e.to_string()))?;
    eng.add_live(DRIVER);
    Ok(eng)
}

fn start_churn(s: &Scenario, eng: &mut Engine, population: impl IntoIterator<Item = NodeId>) -> Result<(), RunError> {
    if let Some(session) = s.churn.mean_session_s {
        let cfg = ChurnConfig { mean_session: session, mean_offline: s.churn.mean_offline_s.unwrap_or(f64::INFINITY) };
        eng.start_churn(cfg, population).map_err(|e| RunError::Setup(e.to_string()))?;
    }
    Ok(())
}

/// Driver timers for publishing, queries, lookups, periodic GETs and snapshots.
fn schedule_workload(s: &Scenario, eng: &mut Engine) {
    let w = &s.workload;
    eng.set_timer(DRIVER, w.publish_at_s, Timer::new(T_PUBLISH, 0));
    for i in 0..w.query_count {
        eng.set_timer(DRIVER, w.query_start_s + i as f64 * w.query_interval_s, Timer::new(T_QUERY, i as u64));
    }
    for i in 0..w.lookup_count {
        eng.set_timer(DRIVER, w.query_start_s + i as f64 * w.query_interval_s, Timer::new(T_LOOKUP, i as u64));
    }
    eng.set_timer(DRIVER, 0.0, Timer::new(T_SNAPSHOT, 0));
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Nearest-rank quantile of an ascending slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Merges two time-ordered logs; `a` wins ties.
fn merge_logs(a: &MetricsLog, b: &MetricsLog) -> MetricsLog {
    let (ra, rb) = (a.records(), b.records());
    let (mut i, mut j) = (0, 0);
    let mut out = MetricsLog::new();
    while i < ra.len() || j < rb.len() {
        let r = if j >= rb.len() || (i < ra.len() && ra[i].time <= rb[j].time) {
            i += 1;
            &ra[i - 1]
        } else {
            j += 1;
            &rb[j - 1]
        };
        out.record(r.time, &r.name, r.subject.clone(), r.value);
    }
    out
}

/// Runs one scenario end to end.
pub fn run(s: &Scenario) -> Result<RunArtifacts, RunError> {
    s.validate()?;
    let mut eng = engine_for(s)?;
    let mut summary = Summary::default();
    summary.push("seed", s.seed);
    summary.push("overlay", format!("{:?}", s.overlay).to_lowercase());
    summary.push("nodes", s.nodes);
    summary.push("duration_s", s.duration_s);
    analyze_topologies(s, &mut eng, &mut summary)?;

    let snapshots = match s.overlay {
        OverlayKind::Dum => run_dum(s, &mut eng, &mut summary)?,
        OverlayKind::Lm => run_lm(s, &mut eng, &mut summary)?,
        OverlayKind::Dsm => run_dsm(s, &mut eng, &mut summary)?,
        OverlayKind::Hm => run_hm(s, &mut eng, &mut summary)?,
    };
    let counters = eng.counters();
    summary.push("events", counters.events);
    summary.push("messages_sent", counters.sent);
    summary.push("messages_lost", counters.lost);

    let mut log = eng.into_metrics();
    if s.swarm.enabled {
        log = merge_logs(&log, &run_swarm(s, &mut summary)?);
    }
    if log.records().windows(2).any(|w| w[1].time < w[0].time) {
        return Err(RunError::Invariant("metrics time went backwards".into()));
    }
    Ok(RunArtifacts { scenario: s.clone(), metrics: log, summary, snapshots })
}

fn dum_config(s: &Scenario) -> DumConfig {
    let d = &s.dum;
    DumConfig {
        peerview_max: d.peerview_max,
        forward_prob: d.forward_prob,
        join_degree: d.join_degree,
        ping_period: d.ping_period_s,
        cache_lifetime: match s.consistency.mode {
            Some(ConsistencyModeKey::DumCacheExpiry) => Some(s.consistency.lifetime_s),
            _ => None,
        },
        bootstrap: match s.bootstrap.mode {
            BootstrapModeKey::PeerCache => BootstrapMode::PeerCache,
            BootstrapModeKey::Mediated => BootstrapMode::Mediated,
        },
        ..DumConfig::default()
    }
}

fn final_snapshot(work: &mut Work, eng: &mut Engine, snap: TopologySnapshot) {
    if work.snapshots.last().is_none_or(|(t, _)| *t < eng.now()) {
        record_snapshot(eng, &snap);
        work.snapshots.push((eng.now(), snap));
    }
}

/// Records per-query flood results and checks duplicate suppression.
fn flood_summary(s: &Scenario, ov: &DumOverlay, eng: &mut Engine, summary: &mut Summary) -> Result<(), RunError> {
    let mut coverage = Vec::new();
    let mut answered = 0usize;
    for (id, t) in ov.traces() {
        if t.process_events != t.processed.len() as u64 {
            return Err(RunError::Invariant(format!("query {id:?} processed a node twice")));
        }
        eng.record("flood_coverage", format!("{}", id.0), t.coverage() as f64);
        eng.record("flood_hits", format!("{}", id.0), t.hits.len() as f64);
        coverage.push(t.coverage() as f64);
        answered += usize::from(!t.hits.is_empty());
    }
    let stats = ov.stats();
    summary.push("flood.queries", coverage.len());
    summary.push("flood.ttl", s.dum.ttl);
    summary.push_f("flood.mean_coverage", mean(&coverage));
    summary.push_f("flood.max_coverage", coverage.iter().copied().fold(0.0, f64::max));
    summary.push_f("flood.answered_fraction", if coverage.is_empty() { 0.0 } else { answered as f64 / coverage.len() as f64 });
    summary.push("flood.path_lost", stats.path_lost);
    summary.push("flood.scope_drops", stats.scope_drops);
    summary.push("dum.repairs", stats.repairs);
    Ok(())
}

struct DumDriver {
    work: Work,
    tag: Option<GroupId>,
    members: Vec<NodeId>,
}

impl Driver<DumOverlay> for DumDriver {
    fn on_timer(&mut self, ov: &mut DumOverlay, eng: &mut Engine, timer: Timer) {
        let now = eng.now();
        match timer.kind {
            T_PUBLISH => {
                for i in 0..self.work.s.workload.publish_count {
                    let Some(owner) = pick(eng, &live_peers(eng)) else { return };
                    let d = self.work.descriptor(i, owner, now);
                    ov.publish_local(owner, d.clone());
                    self.work.published.push(d);
                    if i == 0 {
                        self.work.after_first_publish(eng, owner);
                    }
                }
            }
            T_QUERY => {
                if self.work.published.is_empty() {
                    return;
                }
                let origins: Vec<NodeId> = match self.tag {
                    Some(_) => self.members.iter().copied().filter(|&n| eng.is_live(n)).collect(),
                    None => live_peers(eng),
                };
                let Some(origin) = pick(eng, &origins) else { return };
                let k = eng.rng().gen_range(0..self.work.published.len());
                let key = self.work.published[k].key;
                ov.start_query(eng, origin, key, self.work.s.dum.ttl, self.tag);
            }
            T_SNAPSHOT => {
                let snap = ov.snapshot(eng);
                self.work.snapshot(eng, snap);
            }
            _ => {}
        }
    }
}

fn run_dum(s: &Scenario, eng: &mut Engine, summary: &mut Summary) -> Result<Vec<(f64, TopologySnapshot)>, RunError> {
    let g = generate(s, s.topology.model, s.nodes, eng.rng())?;
    let mut ov = DumOverlay::from_snapshot(&g, dum_config(s));
    for &n in g.nodes() {
        eng.add_live(n);
    }
    let (tag, members) = if s.group.enabled {
        let count = ((s.nodes as f64 * s.group.member_fraction).round() as usize).max(1);
        let members: Vec<NodeId> = g.nodes().iter().copied().take(count).collect();
        let group = Group::new(GroupId(1), members.iter().copied(), s.group_policy())
            .map_err(|e| RunError::Setup(e.to_string()))?;
        ov.set_group(Some(group));
        (Some(GroupId(1)), members)
    } else {
        (None, Vec::new())
    };
    ov.start_timers(eng);
    start_churn(s, eng, g.nodes().iter().copied())?;
    schedule_workload(s, eng);
    let ks = KeySpace::new(FLAT_KEY_BITS).expect("valid width");
    let mut actor = Driven { ov, drv: DumDriver { work: Work::new(s, ks), tag, members } };
    eng.run_until(s.duration_s, &mut actor).map_err(|e| RunError::Setup(e.to_string()))?;

    let Driven { ov, drv } = actor;
    let mut work = drv.work;
    final_snapshot(&mut work, eng, ov.snapshot(eng));
    summary.push("published", work.published.len());
    flood_summary(s, &ov, eng, summary)?;
    Ok(work.snapshots)
}

/// Supernodes run DUM among themselves; each leaf indexes its descriptors at
/// one supernode and sends its queries through it.
struct LmDriver {
    work: Work,
    supernodes: Vec<NodeId>,
    parent: BTreeMap<NodeId, NodeId>,
    shared: BTreeMap<NodeId, Vec<Descriptor>>,
    withdrawn: usize,
    reattached: u64,
}

impl LmDriver {
    fn is_leaf(&self, n: NodeId) -> bool {
        self.parent.contains_key(&n)
    }

    fn attach(&mut self, ov: &mut DumOverlay, eng: &mut Engine, leaf: NodeId) {
        let live: Vec<NodeId> = self.supernodes.iter().copied().filter(|&n| eng.is_live(n)).collect();
        let Some(sn) = pick(eng, &live) else { return };
        self.parent.insert(leaf, sn);
        for d in self.shared.get(&leaf).into_iter().flatten() {
            ov.publish_local(sn, d.clone());
        }
    }

    fn snapshot(&self, ov: &DumOverlay, eng: &Engine) -> TopologySnapshot {
        let core = ov.snapshot(eng);
        let leaves: Vec<(NodeId, NodeId)> =
            self.parent.iter().filter(|(l, p)| eng.is_live(**l) && eng.is_live(**p)).map(|(l, p)| (*l, *p)).collect();
        let nodes = core.nodes().iter().copied().chain(leaves.iter().map(|e| e.0));
        let edges = core.edges().iter().copied().chain(leaves.iter().copied());
        TopologySnapshot::new(nodes, edges).expect("leaf parents are live supernodes")
    }
}

impl Driver<DumOverlay> for LmDriver {
    fn on_timer(&mut self, ov: &mut DumOverlay, eng: &mut Engine, timer: Timer) {
        let now = eng.now();
        match timer.kind {
            T_PUBLISH => {
                let leaves: Vec<NodeId> = self.parent.keys().copied().filter(|&n| eng.is_live(n)).collect();
                for i in 0..self.work.s.workload.publish_count {
                    let Some(owner) = pick(eng, &leaves) else { return };
                    let d = self.work.descriptor(i, owner, now);
                    ov.publish_local(self.parent[&owner], d.clone());
                    self.shared.entry(owner).or_default().push(d.clone());
                    self.work.published.push(d);
                    if i == 0 {
                        self.work.after_first_publish(eng, owner);
                    }
                }
            }
            T_QUERY => {
                if self.work.published.is_empty() {
                    return;
                }
                let leaves: Vec<NodeId> = self.parent.keys().copied().filter(|&n| eng.is_live(n)).collect();
                let Some(leaf) = pick(eng, &leaves) else { return };
                let k = eng.rng().gen_range(0..self.work.published.len());
                let key = self.work.published[k].key;
                let sn = self.parent[&leaf];
                if eng.is_live(sn) {
                    ov.start_query(eng, sn, key, self.work.s.dum.ttl, None);
                }
            }
            T_SNAPSHOT => {
                let snap = self.snapshot(ov, eng);
                self.work.snapshot(eng, snap);
            }
            _ => {}
        }
    }

    fn on_join(&mut self, ov: &mut DumOverlay, eng: &mut Engine, node: NodeId) {
        if self.is_leaf(node) {
            self.attach(ov, eng, node);
        } else {
            ov.on_join(eng, node);
        }
    }

    fn on_leave(&mut self, ov: &mut DumOverlay, eng: &mut Engine, node: NodeId) {
        if let Some(&sn) = self.parent.get(&node) {
            self.withdrawn += ov.withdraw(sn, node);
            eng.record("leaf_leave", node.to_string(), 1.0);
            return;
        }
        ov.on_leave(eng, node);
        let orphans: Vec<NodeId> =
            self.parent.iter().filter(|(l, p)| **p == node && eng.is_live(**l)).map(|(l, _)| *l).collect();
        for leaf in orphans {
            self.attach(ov, eng, leaf);
            self.reattached += 1;
        }
    }
}

fn run_lm(s: &Scenario, eng: &mut Engine, summary: &mut Summary) -> Result<Vec<(f64, TopologySnapshot)>, RunError> {
    let sn_count = s.lm.supernodes;
    let g = generate(s, s.topology.model, sn_count, eng.rng())?;
    let ov = DumOverlay::from_snapshot(&g, dum_config(s));
    for &n in g.nodes() {
        eng.add_live(n);
    }
    let supernodes: Vec<NodeId> = g.nodes().to_vec();
    let leaves: Vec<NodeId> = (sn_count as u64..s.nodes as u64).map(NodeId).collect();
    let ks = KeySpace::new(FLAT_KEY_BITS).expect("valid width");
    let mut drv = LmDriver {
        work: Work::new(s, ks),
        supernodes,
        parent: BTreeMap::new(),
        shared: BTreeMap::new(),
        withdrawn: 0,
        reattached: 0,
    };
    let mut ov = ov;
    ov.start_timers(eng);
    for &leaf in &leaves {
        eng.add_live(leaf);
        drv.attach(&mut ov, eng, leaf);
    }
    start_churn(s, eng, leaves.iter().copied())?;
    schedule_workload(s, eng);
    let mut actor = Driven { ov, drv };
    eng.run_until(s.duration_s, &mut actor).map_err(|e| RunError::Setup(e.to_string()))?;

    let Driven { ov, mut drv } = actor;
    let snap = drv.snapshot(&ov, eng);
    final_snapshot(&mut drv.work, eng, snap);
    summary.push("lm.supernodes", sn_count);
    summary.push("lm.leaves", leaves.len());
    summary.push("lm.withdrawn", drv.withdrawn);
    summary.push("lm.reattached", drv.reattached);
    summary.push("published", drv.work.published.len());
    flood_summary(s, &ov, eng, summary)?;
    Ok(drv.work.snapshots)
}

struct DsmDriver {
    work: Work,
    /// Lookups are checked against the oracle while the ring is static.
    strict: bool,
    hops: Vec<f64>,
    mismatches: u64,
    lookup_errors: u64,
    gets_ok: u64,
    gets_failed: u64,
}

impl DsmDriver {
    fn members(ov: &DsmOverlay, eng: &Engine) -> Vec<NodeId> {
        ov.ring().ids().into_iter().map(NodeId).filter(|&n| eng.is_live(n)).collect()
    }

    fn do_get(&mut self, ov: &mut DsmOverlay, eng: &mut Engine, from: NodeId, d: &Descriptor) {
        match ov.get(eng, from, d.key) {
            Ok(found) if !found.is_empty() => self.gets_ok += 1,
            _ => self.gets_failed += 1,
        }
    }

    fn snapshot(ov: &DsmOverlay, eng: &Engine) -> TopologySnapshot {
        let nodes = Self::members(ov, eng);
        let edges: Vec<(NodeId, NodeId)> = nodes
            .iter()
            .filter_map(|&n| ov.ring().node(n).map(|c| (n, c.successor)))
            .filter(|&(a, b)| a != b && eng.is_live(b) && ov.ring().contains(b))
            .collect();
        TopologySnapshot::new(nodes, edges).expect("successors are members")
    }
}

impl Driver<DsmOverlay> for DsmDriver {
    fn on_timer(&mut self, ov: &mut DsmOverlay, eng: &mut Engine, timer: Timer) {
        let now = eng.now();
        match timer.kind {
            T_PUBLISH => {
                let members = Self::members(ov, eng);
                for i in 0..self.work.s.workload.publish_count {
                    let Some(owner) = pick(eng, &members) else { return };
                    let d = self.work.descriptor(i, owner, now);
                    if ov.publish(eng, d.clone()).is_err() {
                        eng.record("put_failed", owner.to_string(), 1.0);
                    }
                    self.work.published.push(d);
                    if i == 0 {
                        self.work.after_first_publish(eng, owner);
                    }
                }
                if let (Some(p), Some(_)) = (self.work.s.workload.get_period_s, self.work.published.first()) {
                    eng.set_timer(DRIVER, p, Timer::new(T_GET, 0));
                }
            }
            T_LOOKUP => {
                let Some(from) = pick(eng, &Self::members(ov, eng)) else { return };
                let key = self.work.ks.random_id(eng.rng());
                match ov.lookup(eng, from, key) {
                    Ok(r) => {
                        self.hops.push(r.hops as f64);
                        if self.strict && ov.ring().oracle_successor(key).ok() != Some(r.owner) {
                            self.mismatches += 1;
                        }
                    }
                    Err(_) => self.lookup_errors += 1,
                }
            }
            T_QUERY => {
                if self.work.published.is_empty() {
                    return;
                }
                let Some(from) = pick(eng, &Self::members(ov, eng)) else { return };
                let k = eng.rng().gen_range(0..self.work.published.len());
                let d = self.work.published[k].clone();
                self.do_get(ov, eng, from, &d);
            }
            T_GET => {
                let d = self.work.published[0].clone();
                let others: Vec<NodeId> = Self::members(ov, eng).into_iter().filter(|&n| n != d.owner).collect();
                if let Some(from) = pick(eng, &others) {
                    self.do_get(ov, eng, from, &d);
                }
                if let Some(p) = self.work.s.workload.get_period_s {
                    eng.set_timer(DRIVER, p, timer);
                }
            }
            T_SNAPSHOT => {
                let snap = Self::snapshot(ov, eng);
                self.work.snapshot(eng, snap);
            }
            _ => {}
        }
    }
}

fn run_dsm(s: &Scenario, eng: &mut Engine, summary: &mut Summary) -> Result<Vec<(f64, TopologySnapshot)>, RunError> {
    let cfg = DsmConfig {
        m_bits: s.dsm.m_bits,
        stabilize_period: s.dsm.stabilize_period_s,
        succ_list_len: s.dsm.succ_list_len,
        audit_period: s.dsm.audit_period_s,
        consistency: s.consistency.policy(),
    };
    let mut ov = DsmOverlay::new(cfg).map_err(|e| RunError::Setup(e.to_string()))?;
    let ks = ov.ring().key_space();
    let mut alloc = NodeIdAllocator::new(ks);
    let ids: Vec<NodeId> = (0..s.nodes)
        .map(|_| alloc.random(eng.rng()))
        .collect::<Result<_, _>>()
        .map_err(|e| RunError::Setup(e.to_string()))?;
    match s.dsm.start {
        DsmBootstrap::Quiesced => ov.start_quiesced(eng, ids.iter().copied()),
        DsmBootstrap::Join => {
            for (i, &id) in ids.iter().enumerate() {
                eng.schedule(i as f64 * s.dsm.join_spacing_s, Action::Join(id)).expect("forward");
            }
        }
    }
    start_churn(s, eng, ids.iter().copied())?;
    schedule_workload(s, eng);
    let strict = s.dsm.start == DsmBootstrap::Quiesced && s.churn.mean_session_s.is_none();
    let drv = DsmDriver {
        work: Work::new(s, ks),
        strict,
        hops: Vec::new(),
        mismatches: 0,
        lookup_errors: 0,
        gets_ok: 0,
        gets_failed: 0,
    };
    let mut actor = Driven { ov, drv };
    eng.run_until(s.duration_s, &mut actor).map_err(|e| RunError::Setup(e.to_string()))?;

    let Driven { ov, mut drv } = actor;
    let snap = DsmDriver::snapshot(&ov, eng);
    final_snapshot(&mut drv.work, eng, snap);
    if drv.mismatches > 0 {
        return Err(RunError::Invariant(format!("{} lookups disagreed with the successor oracle", drv.mismatches)));
    }
    let stats = ov.ring().stats();
    summary.push("dsm.ring_size", ov.ring().len());
    summary.push("dsm.successors_correct", ov.ring().successors_correct());
    summary.push("dsm.lookups", drv.hops.len());
    summary.push_f("dsm.lookup_hops_mean", mean(&drv.hops));
    summary.push("dsm.lookup_hops_max", drv.hops.iter().copied().fold(0.0, f64::max));
    summary.push("dsm.lookup_errors", drv.lookup_errors);
    summary.push("dsm.oracle_checked", drv.strict);
    summary.push("dsm.gets_ok", drv.gets_ok);
    summary.push("dsm.gets_failed", drv.gets_failed);
    summary.push("dsm.rpcs", stats.rpcs);
    summary.push("dsm.keys_transferred", stats.keys_transferred);
    summary.push("published", drv.work.published.len());
    Ok(drv.work.snapshots)
}

struct HmDriver {
    work: Work,
    providers: Vec<f64>,
}

impl Driver<HmOverlay> for HmDriver {
    fn on_timer(&mut self, ov: &mut HmOverlay, eng: &mut Engine, timer: Timer) {
        let now = eng.now();
        match timer.kind {
            T_PUBLISH => {
                for i in 0..self.work.s.workload.publish_count {
                    let Some(owner) = pick(eng, &live_peers(eng)) else { return };
                    let d = self.work.descriptor(i, owner, now);
                    ov.share(eng, owner, d.clone());
                    self.work.published.push(d);
                    if i == 0 {
                        self.work.after_first_publish(eng, owner);
                    }
                }
            }
            T_QUERY => {
                if self.work.published.is_empty() {
                    return;
                }
                let Some(peer) = pick(eng, &live_peers(eng)) else { return };
                let k = eng.rng().gen_range(0..self.work.published.len());
                let key = self.work.published[k].key;
                let found = ov.search(eng, peer, key);
                self.providers.push(found.len() as f64);
            }
            T_SNAPSHOT => {
                let snap = TopologySnapshot::new(live_peers(eng), Vec::new()).expect("no edges");
                self.work.snapshot(eng, snap);
            }
            _ => {}
        }
    }
}

fn run_hm(s: &Scenario, eng: &mut Engine, summary: &mut Summary) -> Result<Vec<(f64, TopologySnapshot)>, RunError> {
    let cfg = HmConfig {
        offer_limit: s.hm.offer_limit,
        tracker_handout: s.hm.tracker_handout,
        reannounce_period: s.hm.reannounce_s,
        consistency: s.consistency.policy(),
    };
    let mut ov = HmOverlay::new(cfg);
    let peers: Vec<NodeId> = (0..s.nodes as u64).map(NodeId).collect();
    for &p in &peers {
        ov.connect(eng, p);
    }
    start_churn(s, eng, peers.iter().copied())?;
    schedule_workload(s, eng);
    let ks = KeySpace::new(FLAT_KEY_BITS).expect("valid width");
    let mut actor = Driven { ov, drv: HmDriver { work: Work::new(s, ks), providers: Vec::new() } };
    eng.run_until(s.duration_s, &mut actor).map_err(|e| RunError::Setup(e.to_string()))?;

    let Driven { ov, mut drv } = actor;
    let snap = TopologySnapshot::new(live_peers(eng), Vec::new()).expect("no edges");
    final_snapshot(&mut drv.work, eng, snap);
    summary.push("hm.catalog", ov.server().catalog_len());
    summary.push("hm.searches", drv.providers.len());
    summary.push_f("hm.providers_mean", mean(&drv.providers));
    summary.push("hm.offers_rejected", ov.server().rejected());
    summary.push("published", drv.work.published.len());
    Ok(drv.work.snapshots)
}

fn run_swarm(s: &Scenario, summary: &mut Summary) -> Result<MetricsLog, RunError> {
    let cfg = s.swarm_config();
    let sim = SwarmSim::new(cfg.clone()).map_err(|e| RunError::Setup(format!("swarm: {e}")))?;
    let out = sim.run(s.seed);
    if out.pipeline_violations > 0 {
        return Err(RunError::Invariant(format!("{} blocks requested past the pipeline limit", out.pipeline_violations)));
    }
    if cfg.choke_enabled && out.max_unchoked > cfg.choke.m {
        return Err(RunError::Invariant(format!("{} peers unchoked at once, limit {}", out.max_unchoked, cfg.choke.m)));
    }
    let mut times: Vec<f64> = out.completion.values().copied().collect();
    times.sort_by(f64::total_cmp);
    let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.6}"));
    summary.push("swarm.peers", out.classes.len());
    summary.push("swarm.completed", times.len());
    summary.push("swarm.all_complete", out.all_complete());
    summary.push_f("swarm.completion_p50", quantile(&times, 0.5));
    summary.push_f("swarm.completion_p90", quantile(&times, 0.9));
    summary.push_f("swarm.completion_max", quantile(&times, 1.0));
    summary.push("swarm.contributor_mean", opt(out.contributor_mean));
    summary.push("swarm.freerider_mean", opt(out.freerider_mean));
    summary.push("swarm.variance_at_half", opt(out.variance_at_half));
    summary.push("swarm.corrupt_pieces", out.corrupt_pieces);
    summary.push("swarm.regular_rounds", out.regular_rounds);
    summary.push("swarm.optimistic_rounds", out.optimistic_rounds);
    summary.push("swarm.reputation", cfg.reputation);
    summary.push_f("swarm.end_time", out.end_time);
    Ok(out.metrics)
}
