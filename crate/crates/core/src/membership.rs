//! Bootstrapping, group membership with scoped routing, and
//! information-consistency policies for resource descriptors.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::model::{Descriptor, GroupId, Message, NodeId, ResourceKey};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MembershipError {
    #[error("bootstrap failed: no cached peer responded")]
    BootstrapFailed,
    #[error("peer cache is empty")]
    EmptyCache,
    #[error("mediator unavailable")]
    MediatorUnavailable,
    #[error("{0} is already a member")]
    AlreadyMember(NodeId),
    #[error("invalid group policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid consistency policy: {0}")]
    InvalidConsistency(String),
}

/// Bounded list of previously seen peers, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerCache {
    entries: Vec<(NodeId, f64)>,
    capacity: usize,
}

impl PeerCache {
    pub fn new(capacity: usize) -> Self {
        Self { entries: Vec::new(), capacity }
    }

    /// Records that `node` was seen at `t`, moving it to the front.
    pub fn observe(&mut self, node: NodeId, t: f64) {
        self.entries.retain(|(n, _)| *n != node);
        self.entries.insert(0, (node, t));
        self.entries.truncate(self.capacity);
    }

    pub fn entries(&self) -> &[(NodeId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOutcome {
    pub entry: NodeId,
    pub probes: usize,
    pub pruned: Vec<NodeId>,
    /// Virtual time spent probing: one timeout per dead entry plus a round trip.
    pub elapsed: f64,
}

/// Probe timeout for peer-cache bootstrapping: four link latencies.
pub fn probe_timeout(link_latency: f64) -> f64 {
    4.0 * link_latency
}

/// Probes cached peers in order; dead entries are pruned.
pub fn bootstrap_peer_based(
    cache: &mut PeerCache,
    link_latency: f64,
    mut is_live: impl FnMut(NodeId) -> bool,
) -> Result<BootstrapOutcome, MembershipError> {
    if cache.is_empty() {
        return Err(MembershipError::EmptyCache);
    }
    let mut probes = 0;
    let mut pruned = Vec::new();
    let mut elapsed = 0.0;
    while let Some(&(node, _)) = cache.entries.get(pruned.len()) {
        probes += 1;
        if is_live(node) {
            elapsed += 2.0 * link_latency;
            cache.entries.retain(|(n, _)| !pruned.contains(n));
            return Ok(BootstrapOutcome { entry: node, probes, pruned, elapsed });
        }
        elapsed += probe_timeout(link_latency);
        pruned.push(node);
    }
    cache.entries.clear();
    Err(MembershipError::BootstrapFailed)
}

/// Well-known entry point that tracks online peers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mediator {
    online: BTreeSet<NodeId>,
    handout_size: usize,
}

impl Mediator {
    pub fn new(handout_size: usize) -> Self {
        Self { online: BTreeSet::new(), handout_size }
    }

    pub fn online(&self) -> &BTreeSet<NodeId> {
        &self.online
    }

    pub fn leave(&mut self, node: NodeId) {
        self.online.remove(&node);
    }

    /// Registers `node` as online without a handout.
    pub fn register(&mut self, node: NodeId) {
        self.online.insert(node);
    }

    /// Hands `joiner` up to `handout_size` online peers sampled without
    /// replacement, then registers it. `loss_rate` models an unreachable
    /// mediator.
    pub fn bootstrap_mediated<R: Rng + ?Sized>(
        &mut self,
        joiner: NodeId,
        rng: &mut R,
        loss_rate: f64,
    ) -> Result<Vec<NodeId>, MembershipError> {
        if loss_rate > 0.0 && rng.gen::<f64>() < loss_rate {
            return Err(MembershipError::MediatorUnavailable);
        }
        let mut pool: Vec<NodeId> = self.online.iter().copied().filter(|&n| n != joiner).collect();
        let take = self.handout_size.min(pool.len());
        let (chosen, _) = pool.partial_shuffle(rng, take);
        let handout = chosen.to_vec();
        self.online.insert(joiner);
        Ok(handout)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupPolicy {
    Open,
    Monarchy { owners: BTreeSet<NodeId> },
    Voting { quorum: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub group_id: GroupId,
    members: BTreeSet<NodeId>,
    policy: GroupPolicy,
}

/// Yes/no votes keyed by voter.
pub type Ballots = BTreeMap<NodeId, bool>;

impl Group {
    pub fn new(
        group_id: GroupId,
        members: impl IntoIterator<Item = NodeId>,
        policy: GroupPolicy,
    ) -> Result<Self, MembershipError> {
        let members: BTreeSet<NodeId> = members.into_iter().collect();
        match &policy {
            GroupPolicy::Monarchy { owners } if !owners.is_subset(&members) => {
                return Err(MembershipError::InvalidPolicy("monarchy owners must be members".into()))
            }
            GroupPolicy::Voting { quorum } if !(*quorum > 0.0 && *quorum <= 1.0) => {
                return Err(MembershipError::InvalidPolicy(format!("quorum {quorum} outside (0,1]")))
            }
            _ => {}
        }
        Ok(Self { group_id, members, policy })
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn policy(&self) -> &GroupPolicy {
        &self.policy
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.members.contains(&node)
    }

    /// Decides a join request; accepted candidates become members.
    pub fn join_group(&mut self, candidate: NodeId, ballots: &Ballots) -> Result<bool, MembershipError> {
        if self.members.contains(&candidate) {
            return Err(MembershipError::AlreadyMember(candidate));
        }
        let accept = match &self.policy {
            GroupPolicy::Open => true,
            GroupPolicy::Monarchy { owners } => owners.iter().any(|o| ballots.get(o) == Some(&true)),
            GroupPolicy::Voting { quorum } => {
                let yes = ballots.iter().filter(|(v, &y)| y && self.members.contains(v)).count();
                let needed = (quorum * self.members.len() as f64 - 1e-9).ceil() as usize;
                yes >= needed
            }
        };
        if accept {
            self.members.insert(candidate);
        }
        Ok(accept)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Deliver,
    Drop,
}

/// Tagged messages reach only members of the tagged group.
pub fn scope_check(msg: &Message, group: Option<&Group>, receiver: NodeId) -> Scope {
    match (msg.group_tag, group) {
        (None, _) => Scope::Deliver,
        (Some(tag), Some(g)) if tag == g.group_id && g.contains(receiver) => Scope::Deliver,
        _ => Scope::Drop,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsistencyMode {
    HmNotify,
    DumCacheExpiry,
    DsmRepublish,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyPolicy {
    pub mode: ConsistencyMode,
    pub descriptor_lifetime: f64,
    /// `None` disables republishing.
    pub republish_period: Option<f64>,
}

impl ConsistencyPolicy {
    pub fn validate(&self) -> Result<(), MembershipError> {
        if !(self.descriptor_lifetime > 0.0) {
            return Err(MembershipError::InvalidConsistency("lifetime must be positive".into()));
        }
        if let (ConsistencyMode::DsmRepublish, Some(period)) = (self.mode, self.republish_period) {
            if !(period > 0.0 && period < self.descriptor_lifetime) {
                return Err(MembershipError::InvalidConsistency(format!(
                    "republish period {period} must be in (0, lifetime={})",
                    self.descriptor_lifetime
                )));
            }
        }
        Ok(())
    }
}

/// Descriptors held by one node, keyed by resource key. One entry per
/// `(key, owner)`; re-inserting replaces and resets the lifetime.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DescriptorStore {
    entries: BTreeMap<ResourceKey, Vec<Descriptor>>,
}

impl DescriptorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, d: Descriptor) {
        let slot = self.entries.entry(d.key).or_default();
        match slot.iter_mut().find(|e| e.owner == d.owner) {
            Some(existing) => *existing = d,
            None => slot.push(d),
        }
    }

    /// Unexpired descriptors for `key` at time `now`.
    pub fn get(&self, key: ResourceKey, now: f64) -> Vec<Descriptor> {
        self.entries
            .get(&key)
            .map(|v| v.iter().filter(|d| !d.expired(now)).cloned().collect())
            .unwrap_or_default()
    }

    pub fn remove_owner(&mut self, key: ResourceKey, owner: NodeId) -> Option<Descriptor> {
        let slot = self.entries.get_mut(&key)?;
        let pos = slot.iter().position(|d| d.owner == owner)?;
        let d = slot.remove(pos);
        if slot.is_empty() {
            self.entries.remove(&key);
        }
        Some(d)
    }

    pub fn evict_expired(&mut self, now: f64) -> Vec<Descriptor> {
        let mut evicted = Vec::new();
        self.entries.retain(|_, slot| {
            slot.retain(|d| {
                let keep = !d.expired(now);
                if !keep {
                    evicted.push(d.clone());
                }
                keep
            });
            !slot.is_empty()
        });
        evicted
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Descriptor> {
        self.entries.values().flatten()
    }

    /// Removes and returns every descriptor matching `pred`.
    pub fn drain_where(&mut self, mut pred: impl FnMut(&Descriptor) -> bool) -> Vec<Descriptor> {
        let mut out = Vec::new();
        self.entries.retain(|_, slot| {
            slot.retain(|d| {
                if pred(d) {
                    out.push(d.clone());
                    false
                } else {
                    true
                }
            });
            !slot.is_empty()
        });
        out
    }
}

/// Descriptors a node owns and must keep consistent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OwnerState {
    owned: BTreeMap<ResourceKey, Descriptor>,
    dirty: BTreeSet<ResourceKey>,
    last_republish: Option<f64>,
}

impl OwnerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&mut self, d: Descriptor, now: f64) {
        self.owned.insert(d.key, d);
        self.last_republish.get_or_insert(now);
    }

    /// Replaces the owned descriptor for `d.key` and marks it for notification.
    pub fn edit(&mut self, d: Descriptor) {
        self.dirty.insert(d.key);
        self.owned.insert(d.key, d);
    }

    pub fn owned(&self) -> impl Iterator<Item = &Descriptor> {
        self.owned.values()
    }

    pub fn last_republish(&self) -> Option<f64> {
        self.last_republish
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConsistencyAction {
    /// Owner re-issues a PUT with a fresh timestamp.
    Republish(Descriptor),
    /// A held descriptor expired and was dropped.
    Evict(Descriptor),
    /// Owner pushes an updated descriptor to the index server.
    Notify(Descriptor),
}

/// One consistency pass for a node that owns `owner` and holds `store`.
pub fn consistency_tick(
    policy: &ConsistencyPolicy,
    owner: &mut OwnerState,
    store: &mut DescriptorStore,
    now: f64,
) -> Vec<ConsistencyAction> {
    let mut actions = Vec::new();
    match policy.mode {
        ConsistencyMode::DsmRepublish => {
            if let (Some(period), Some(last)) = (policy.republish_period, owner.last_republish) {
                if now - last >= period - 1e-9 {
                    for d in owner.owned.values_mut() {
                        *d = d.refreshed(now);
                        actions.push(ConsistencyAction::Republish(d.clone()));
                    }
                    owner.last_republish = Some(now);
                }
            }
            actions.extend(store.evict_expired(now).into_iter().map(ConsistencyAction::Evict));
        }
        ConsistencyMode::DumCacheExpiry => {
            actions.extend(store.evict_expired(now).into_iter().map(ConsistencyAction::Evict));
        }
        ConsistencyMode::HmNotify => {
            for key in std::mem::take(&mut owner.dirty) {
                if let Some(d) = owner.owned.get(&key) {
                    actions.push(ConsistencyAction::Notify(d.clone()));
                }
            }
        }
    }
    actions
}
