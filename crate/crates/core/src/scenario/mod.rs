//! Scenario files: INI-style TOML with one section per module.
//!
//! Every key has a default, so a file only lists what it changes. Unknown keys
//! are rejected and every value is range-checked before a run starts.

pub mod presets;
pub mod run;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::membership::{ConsistencyMode, ConsistencyPolicy, GroupPolicy};
use crate::swarm::{ChokeParams, PickerKind, SwarmConfig, DEFAULT_BLOCK_SIZE, DEFAULT_PIECE_SIZE};

pub use run::{export_topology, run, run_batch, RunArtifacts, RunError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl ScenarioError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::InvalidValue { key: key.to_string(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlayKind {
    Dum,
    Dsm,
    Hm,
    Lm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyModel {
    Er,
    Ws,
    Ba,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub seed: u64,
    pub duration_s: f64,
    pub overlay: OverlayKind,
    pub nodes: usize,
    pub latency_s: f64,
    pub loss_rate: f64,
    pub churn: ChurnSection,
    pub bootstrap: BootstrapSection,
    pub group: GroupSection,
    pub consistency: ConsistencySection,
    pub topology: TopologySection,
    pub dum: DumSection,
    pub dsm: DsmSection,
    pub hm: HmSection,
    pub lm: LmSection,
    pub swarm: SwarmSection,
    pub reputation: ReputationSection,
    pub workload: WorkloadSection,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            duration_s: 300.0,
            overlay: OverlayKind::Dum,
            nodes: 100,
            latency_s: 0.05,
            loss_rate: 0.0,
            churn: ChurnSection::default(),
            bootstrap: BootstrapSection::default(),
            group: GroupSection::default(),
            consistency: ConsistencySection::default(),
            topology: TopologySection::default(),
            dum: DumSection::default(),
            dsm: DsmSection::default(),
            hm: HmSection::default(),
            lm: LmSection::default(),
            swarm: SwarmSection::default(),
            reputation: ReputationSection::default(),
            workload: WorkloadSection::default(),
        }
    }
}

/// Exponential on/off churn; no churn when `mean_session_s` is unset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChurnSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_session_s: Option<f64>,
    /// Unset means departed nodes never return.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_offline_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapModeKey {
    PeerCache,
    Mediated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSection {
    pub mode: BootstrapModeKey,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self { mode: BootstrapModeKey::Mediated }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupPolicyKey {
    Open,
    Monarchy,
    Voting,
}

/// Scoped search: the first `member_fraction` of the nodes form one group
/// and every query is tagged with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupSection {
    pub enabled: bool,
    pub policy: GroupPolicyKey,
    pub member_fraction: f64,
    pub quorum: f64,
}

impl Default for GroupSection {
    fn default() -> Self {
        Self { enabled: false, policy: GroupPolicyKey::Open, member_fraction: 0.5, quorum: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyModeKey {
    HmNotify,
    DumCacheExpiry,
    DsmRepublish,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsistencySection {
    /// Unset disables lifetimes: descriptors never expire.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ConsistencyModeKey>,
    pub lifetime_s: f64,
    /// Unset disables republishing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub republish_s: Option<f64>,
}

impl Default for ConsistencySection {
    fn default() -> Self {
        Self { mode: None, lifetime_s: 3600.0, republish_s: None }
    }
}

impl ConsistencySection {
    pub fn policy(&self) -> Option<ConsistencyPolicy> {
        let mode = match self.mode? {
            ConsistencyModeKey::HmNotify => ConsistencyMode::HmNotify,
            ConsistencyModeKey::DumCacheExpiry => ConsistencyMode::DumCacheExpiry,
            ConsistencyModeKey::DsmRepublish => ConsistencyMode::DsmRepublish,
        };
        Some(ConsistencyPolicy { mode, descriptor_lifetime: self.lifetime_s, republish_period: self.republish_s })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    /// Generator for the initial unstructured overlay.
    pub model: TopologyModel,
    pub alpha: f64,
    pub k_ring: usize,
    pub p_rewire: f64,
    pub m_attach: usize,
    pub n0: usize,
    /// Generators analysed at t = 0, each on `nodes` nodes.
    pub analyze: Vec<TopologyModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_period_s: Option<f64>,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            model: TopologyModel::Er,
            alpha: 6.0,
            k_ring: 8,
            p_rewire: 0.1,
            m_attach: 2,
            n0: 3,
            analyze: Vec::new(),
            snapshot_period_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DumSection {
    pub peerview_max: usize,
    pub ttl: u32,
    pub forward_prob: f64,
    pub join_degree: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ping_period_s: Option<f64>,
}

impl Default for DumSection {
    fn default() -> Self {
        Self { peerview_max: 32, ttl: 5, forward_prob: 1.0, join_degree: 4, ping_period_s: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DsmBootstrap {
    /// All nodes start with oracle-correct pointers.
    Quiesced,
    /// Nodes join one by one and converge through stabilization.
    Join,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsmSection {
    pub m_bits: u32,
    pub stabilize_period_s: f64,
    pub succ_list_len: usize,
    pub start: DsmBootstrap,
    pub join_spacing_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit_period_s: Option<f64>,
}

impl Default for DsmSection {
    fn default() -> Self {
        Self {
            m_bits: 16,
            stabilize_period_s: 5.0,
            succ_list_len: 4,
            start: DsmBootstrap::Quiesced,
            join_spacing_s: 1.0,
            audit_period_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmSection {
    pub offer_limit: usize,
    pub tracker_handout: usize,
    pub reannounce_s: f64,
}

impl Default for HmSection {
    fn default() -> Self {
        Self { offer_limit: 200, tracker_handout: 20, reannounce_s: 1800.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmSection {
    pub supernodes: usize,
}

impl Default for LmSection {
    fn default() -> Self {
        Self { supernodes: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickerKey {
    RarestFirst,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwarmSection {
    pub enabled: bool,
    pub file_size: u64,
    pub piece_size: u64,
    pub block_size: u64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T1_s")]
    pub t1_s: f64,
    #[serde(rename = "T2_s")]
    pub t2_s: f64,
    pub rate_window_s: f64,
    pub choke: bool,
    pub picker: PickerKey,
    pub seed_count: usize,
    pub leecher_count: usize,
    pub freerider_count: usize,
    /// Upload capacity of seeds and contributors, bytes/s.
    pub upload_bps: f64,
    pub download_bps: f64,
    pub freerider_upload_bps: f64,
    pub tick_s: f64,
}

impl Default for SwarmSection {
    fn default() -> Self {
        let base = SwarmConfig::default();
        Self {
            enabled: false,
            file_size: base.total_size,
            piece_size: DEFAULT_PIECE_SIZE,
            block_size: DEFAULT_BLOCK_SIZE,
            m: base.choke.m,
            k: base.choke.k,
            t1_s: base.choke.t1,
            t2_s: base.choke.t2,
            rate_window_s: base.rate_window,
            choke: true,
            picker: PickerKey::RarestFirst,
            seed_count: base.seed_count,
            leecher_count: base.leecher_count,
            freerider_count: base.freerider_count,
            upload_bps: base.upload,
            download_bps: base.download,
            freerider_upload_bps: base.freerider_upload,
            tick_s: base.tick,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReputationSection {
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSection {
    pub publish_count: usize,
    pub publish_at_s: f64,
    pub query_count: usize,
    pub query_start_s: f64,
    pub query_interval_s: f64,
    /// Key lookups issued on a structured overlay.
    pub lookup_count: usize,
    /// Periodic GET of the first published descriptor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub get_period_s: Option<f64>,
    /// Departure time of the first publisher.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub owner_leave_s: Option<f64>,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        Self {
            publish_count: 20,
            publish_at_s: 0.0,
            query_count: 50,
            query_start_s: 10.0,
            query_interval_s: 1.0,
            lookup_count: 0,
            get_period_s: None,
            owner_leave_s: None,
        }
    }
}

fn inv(key: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::invalid(key, reason)
}

fn unknown_key(msg: &str) -> Option<String> {
    let rest = msg.split("unknown field `").nth(1)?;
    Some(rest.split('`').next()?.to_string())
}

impl Scenario {
    /// Parses and validates scenario text.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            match unknown_key(&msg) {
                Some(k) => ScenarioError::UnknownKey(k),
                None => ScenarioError::Parse(e.to_string()),
            }
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Range checks; each error names the offending key.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(inv(key, format!("{v} must be positive and finite")))
            }
        };
        let prob = |key: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(inv(key, format!("{v} must lie in [0, 1]")))
            }
        };
        positive("duration_s", self.duration_s)?;
        if self.nodes == 0 {
            return Err(inv("nodes", "at least one node is required"));
        }
        if !(self.latency_s >= 0.0 && self.latency_s.is_finite()) {
            return Err(inv("latency_s", "must be non-negative"));
        }
        prob("loss_rate", self.loss_rate)?;
        if let Some(v) = self.churn.mean_session_s {
            positive("churn.mean_session_s", v)?;
        }
        if let Some(v) = self.churn.mean_offline_s {
            positive("churn.mean_offline_s", v)?;
            if self.churn.mean_session_s.is_none() {
                return Err(inv("churn.mean_offline_s", "requires churn.mean_session_s"));
            }
        }
        prob("group.member_fraction", self.group.member_fraction)?;
        if !(self.group.quorum > 0.0 && self.group.quorum <= 1.0) {
            return Err(inv("group.quorum", "must lie in (0, 1]"));
        }
        positive("consistency.lifetime_s", self.consistency.lifetime_s)?;
        if let Some(r) = self.consistency.republish_s {
            positive("consistency.republish_s", r)?;
        }
        if let Some(p) = self.consistency.policy() {
            p.validate().map_err(|e| inv("consistency.republish_s", e.to_string()))?;
        }
        let t = &self.topology;
        if !(t.alpha >= 0.0) {
            return Err(inv("topology.alpha", "must be non-negative"));
        }
        prob("topology.p_rewire", t.p_rewire)?;
        let n = self.topology_nodes();
        for model in std::iter::once(&t.model).chain(t.analyze.iter()) {
            match model {
                TopologyModel::Er if n > 1 && t.alpha > (n - 1) as f64 => {
                    return Err(inv("topology.alpha", format!("alpha {} exceeds n-1 = {}", t.alpha, n - 1)));
                }
                TopologyModel::Ws if !t.k_ring.is_multiple_of(2) || t.k_ring >= n => {
                    return Err(inv("topology.k_ring", format!("must be even and below n = {n}")));
                }
                TopologyModel::Ba if t.m_attach == 0 || t.m_attach > t.n0 || t.n0 >= n => {
                    return Err(inv("topology.m_attach", format!("need 1 <= m_attach <= n0 < n = {n}")));
                }
                _ => {}
            }
        }
        if let Some(p) = t.snapshot_period_s {
            positive("topology.snapshot_period_s", p)?;
        }
        if self.dum.peerview_max == 0 {
            return Err(inv("dum.peerview_max", "must be at least 1"));
        }
        prob("dum.forward_prob", self.dum.forward_prob)?;
        if let Some(p) = self.dum.ping_period_s {
            positive("dum.ping_period_s", p)?;
        }
        if self.dsm.m_bits == 0 || self.dsm.m_bits > 64 {
            return Err(inv("dsm.m_bits", format!("{} outside 1..=64", self.dsm.m_bits)));
        }
        if self.overlay == OverlayKind::Dsm && self.dsm.m_bits < 64 && (self.nodes as u128) > (1u128 << self.dsm.m_bits) {
            return Err(inv("nodes", format!("{} nodes do not fit a {}-bit ring", self.nodes, self.dsm.m_bits)));
        }
        positive("dsm.stabilize_period_s", self.dsm.stabilize_period_s)?;
        positive("dsm.join_spacing_s", self.dsm.join_spacing_s)?;
        if self.dsm.succ_list_len == 0 {
            return Err(inv("dsm.succ_list_len", "must be at least 1"));
        }
        if let Some(p) = self.dsm.audit_period_s {
            positive("dsm.audit_period_s", p)?;
        }
        positive("hm.reannounce_s", self.hm.reannounce_s)?;
        if self.overlay == OverlayKind::Lm && (self.lm.supernodes == 0 || self.lm.supernodes > self.nodes) {
            return Err(inv("lm.supernodes", format!("must lie in 1..={}", self.nodes)));
        }
        let w = &self.swarm;
        if w.piece_size == 0 || w.block_size == 0 || !w.piece_size.is_multiple_of(w.block_size) {
            return Err(inv("swarm.block_size", "must divide swarm.piece_size"));
        }
        if w.file_size == 0 {
            return Err(inv("swarm.file_size", "must be positive"));
        }
        if w.m == 0 || w.k > w.m {
            return Err(inv("swarm.K", "need 0 <= K <= M and M >= 1"));
        }
        positive("swarm.T1_s", w.t1_s)?;
        positive("swarm.T2_s", w.t2_s)?;
        positive("swarm.rate_window_s", w.rate_window_s)?;
        positive("swarm.tick_s", w.tick_s)?;
        positive("swarm.download_bps", w.download_bps)?;
        if w.seed_count == 0 {
            return Err(inv("swarm.seed_count", "at least one seed is required"));
        }
        for (key, v) in [
            ("swarm.upload_bps", w.upload_bps),
            ("swarm.freerider_upload_bps", w.freerider_upload_bps),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(inv(key, "must be non-negative"));
            }
        }
        if self.workload.query_count > 0 || self.workload.lookup_count > 0 {
            if !(self.workload.query_start_s >= 0.0) {
                return Err(inv("workload.query_start_s", "must be non-negative"));
            }
            if !(self.workload.query_interval_s >= 0.0) {
                return Err(inv("workload.query_interval_s", "must be non-negative"));
            }
        }
        if !(self.workload.publish_at_s >= 0.0) {
            return Err(inv("workload.publish_at_s", "must be non-negative"));
        }
        if let Some(p) = self.workload.get_period_s {
            positive("workload.get_period_s", p)?;
        }
        if let Some(t) = self.workload.owner_leave_s {
            if !(t >= 0.0) {
                return Err(inv("workload.owner_leave_s", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// Node count of the unstructured layer.
    pub fn topology_nodes(&self) -> usize {
        match self.overlay {
            OverlayKind::Lm => self.lm.supernodes,
            _ => self.nodes,
        }
    }

    pub fn group_policy(&self) -> GroupPolicy {
        match self.group.policy {
            GroupPolicyKey::Open => GroupPolicy::Open,
            GroupPolicyKey::Monarchy => GroupPolicy::Monarchy { owners: Default::default() },
            GroupPolicyKey::Voting => GroupPolicy::Voting { quorum: self.group.quorum },
        }
    }

    pub fn swarm_config(&self) -> SwarmConfig {
        let w = &self.swarm;
        SwarmConfig {
            total_size: w.file_size,
            piece_size: w.piece_size,
            block_size: w.block_size,
            choke: ChokeParams { m: w.m, k: w.k, t1: w.t1_s, t2: w.t2_s },
            choke_enabled: w.choke,
            reputation: self.reputation.enabled,
            rate_window: w.rate_window_s,
            picker: match w.picker {
                PickerKey::RarestFirst => PickerKind::RarestFirst,
                PickerKey::Random => PickerKind::Random,
            },
            seed_count: w.seed_count,
            leecher_count: w.leecher_count,
            freerider_count: w.freerider_count,
            poisoner_count: 0,
            upload: w.upload_bps,
            download: w.download_bps,
            freerider_upload: w.freerider_upload_bps,
            tracker_handout: self.hm.tracker_handout,
            tick: w.tick_s,
            max_time: self.duration_s,
            content_seed: self.seed,
        }
    }
}

/// Text for `print-defaults`: every key with its default value. Keys that
/// are unset by default are listed as comments.
pub fn defaults_text() -> String {
    let mut out = Scenario::default().to_toml();
    out.push_str(
        "\n# unset by default:\n\
         # churn.mean_session_s      (no churn)\n\
         # churn.mean_offline_s      (departed nodes stay away)\n\
         # consistency.mode          (hm_notify | dum_cache_expiry | dsm_republish; descriptors never expire)\n\
         # consistency.republish_s   (no republish)\n\
         # topology.snapshot_period_s (no periodic overlay snapshots)\n\
         # dum.ping_period_s         (no ping/pong discovery)\n\
         # dsm.audit_period_s        (no self-lookup audit)\n\
         # workload.get_period_s     (no periodic GET)\n\
         # workload.owner_leave_s    (publishers stay online)\n",
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = Scenario::from_toml("overlay = \"dsm\"\nseed = 1\nduration_s = 300\n").unwrap();
        assert_eq!(s.overlay, OverlayKind::Dsm);
        assert_eq!(s.dsm, DsmSection::default());
        assert_eq!(s.swarm.t1_s, 10.0);
        assert_eq!(s.swarm.t2_s, 30.0);
        assert_eq!((s.swarm.m, s.swarm.k), (5, 1));
        assert_eq!(s.swarm.piece_size, 262_144);
        assert_eq!(s.swarm.block_size, 16_384);
        assert_eq!(s.dsm.succ_list_len, 4);
        assert_eq!(s.hm.offer_limit, 200);
        assert_eq!(s.hm.tracker_handout, 20);
    }

    #[test]
    fn m_bits_cap() {
        match Scenario::from_toml("[dsm]\nm_bits = 70\n") {
            Err(ScenarioError::InvalidValue { key, .. }) => assert_eq!(key, "dsm.m_bits"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        match Scenario::from_toml("[dum]\nttl = 3\nbogus = 1\n") {
            Err(ScenarioError::UnknownKey(k)) => assert_eq!(k, "bogus"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Scenario::from_toml("colour = 1\n"), Err(ScenarioError::UnknownKey(_))));
        assert!(matches!(Scenario::from_toml("seed = \n"), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn republish_must_beat_lifetime() {
        let text = "[consistency]\nmode = \"dsm_republish\"\nlifetime_s = 60\nrepublish_s = 90\n";
        assert!(matches!(Scenario::from_toml(text), Err(ScenarioError::InvalidValue { .. })));
    }

    #[test]
    fn round_trip() {
        let mut s = Scenario { overlay: OverlayKind::Lm, ..Scenario::default() };
        s.churn.mean_session_s = Some(120.0);
        s.topology.analyze = vec![TopologyModel::Er, TopologyModel::Ba];
        s.consistency.mode = Some(ConsistencyModeKey::DumCacheExpiry);
        let again = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn defaults_text_parses() {
        let body: String = defaults_text().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
        assert_eq!(Scenario::from_toml(&body).unwrap(), Scenario::default());
    }
}
