//! Data protection: piece hashing, majority-version choice and active replication.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{ContentSpec, SwarmError};
use crate::model::{content_digest, Digest160, Message, NodeId};
use crate::sim::{Actor, Engine, Timer};

/// Checks `data` against the recorded digest of piece `idx`.
pub fn verify_piece(data: &[u8], spec: &ContentSpec, idx: u32) -> Result<(), SwarmError> {
    match spec.piece_digests.get(idx as usize) {
        Some(want) if content_digest(data) == *want => Ok(()),
        _ => Err(SwarmError::CorruptPiece(idx)),
    }
}

/// The digest with the most replicas; a tie for first place is an error.
pub fn majority_version(observed: &[(Digest160, u32)]) -> Result<Digest160, SwarmError> {
    let best = observed.iter().map(|o| o.1).max().ok_or(SwarmError::NoVersions)?;
    let mut top = observed.iter().filter(|o| o.1 == best).map(|o| o.0).collect::<Vec<_>>();
    top.dedup();
    match top.as_slice() {
        [only] => Ok(*only),
        _ => Err(SwarmError::AmbiguousVersion(best)),
    }
}

/// Picks `k_target` live non-holders uniformly at random.
pub fn replicate_active<R: Rng + ?Sized>(
    holders: &BTreeSet<NodeId>,
    live: &BTreeSet<NodeId>,
    k_target: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>, SwarmError> {
    let mut pool: Vec<NodeId> = live.difference(holders).copied().collect();
    if pool.len() < k_target {
        return Err(SwarmError::InsufficientPeers { wanted: k_target, available: pool.len() });
    }
    let (chosen, _) = pool.partial_shuffle(rng, k_target);
    let mut out = chosen.to_vec();
    out.sort();
    Ok(out)
}

const TIMER_REPAIR: u32 = 40;

/// Keeps `target` live replicas of one item under churn, repairing on a timer.
pub struct ReplicaKeeper {
    pub target: usize,
    pub repair_period: f64,
    holders: BTreeSet<NodeId>,
    coordinator: NodeId,
}

impl ReplicaKeeper {
    pub fn new(target: usize, repair_period: f64, coordinator: NodeId) -> Self {
        Self { target, repair_period, holders: BTreeSet::new(), coordinator }
    }

    pub fn start(&mut self, eng: &mut Engine) -> Result<(), SwarmError> {
        eng.add_live(self.coordinator);
        self.repair(eng)?;
        eng.set_timer(self.coordinator, self.repair_period, Timer::new(TIMER_REPAIR, 0));
        Ok(())
    }

    pub fn live_replicas(&self, eng: &Engine) -> usize {
        self.holders.iter().filter(|&&n| eng.is_live(n)).count()
    }

    fn repair(&mut self, eng: &mut Engine) -> Result<(), SwarmError> {
        self.holders.retain(|&n| eng.is_live(n));
        let missing = self.target.saturating_sub(self.holders.len());
        if missing == 0 {
            return Ok(());
        }
        let mut live = eng.live_nodes().clone();
        live.remove(&self.coordinator);
        let placed = replicate_active(&self.holders, &live, missing, eng.rng())?;
        self.holders.extend(placed);
        let n = self.holders.len() as f64;
        eng.record("replicas", self.coordinator.to_string(), n);
        Ok(())
    }
}

impl Actor for ReplicaKeeper {
    fn on_deliver(&mut self, _eng: &mut Engine, _to: NodeId, _msg: Message) {}

    fn on_timer(&mut self, eng: &mut Engine, owner: NodeId, timer: Timer) {
        if timer.kind == TIMER_REPAIR && owner == self.coordinator {
            let _ = self.repair(eng);
            eng.set_timer(owner, self.repair_period, timer);
        }
    }

    fn on_leave(&mut self, eng: &mut Engine, node: NodeId) {
        if self.holders.contains(&node) {
            let n = self.live_replicas(eng) as f64;
            eng.record("replicas", self.coordinator.to_string(), n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{seeded_rng, Action};
    use crate::swarm::SyntheticContent;

    #[test]
    fn flipped_bit_detected() {
        let c = SyntheticContent::new(3, 512 * 1024, 256 * 1024, 16 * 1024).unwrap();
        let mut data = c.piece_data(1);
        assert_eq!(verify_piece(&data, &c.spec, 1), Ok(()));
        data[1000] ^= 0x01;
        assert_eq!(verify_piece(&data, &c.spec, 1), Err(SwarmError::CorruptPiece(1)));
        assert_eq!(verify_piece(&c.piece_data(0), &c.spec, 1), Err(SwarmError::CorruptPiece(1)));
    }

    #[test]
    fn majority_rules() {
        let h1 = content_digest(b"v1");
        let h2 = content_digest(b"v2");
        assert_eq!(majority_version(&[(h1, 40), (h2, 3)]), Ok(h1));
        assert_eq!(majority_version(&[(h2, 1)]), Ok(h2));
        assert_eq!(majority_version(&[(h1, 5), (h2, 5)]), Err(SwarmError::AmbiguousVersion(5)));
        assert_eq!(majority_version(&[]), Err(SwarmError::NoVersions));
    }

    #[test]
    fn replicate_to_non_holders() {
        let live: BTreeSet<NodeId> = (0..10).map(NodeId).collect();
        let holders: BTreeSet<NodeId> = [NodeId(0)].into();
        let mut rng = seeded_rng(1);
        let placed = replicate_active(&holders, &live, 3, &mut rng).unwrap();
        assert_eq!(placed.len(), 3);
        assert!(placed.iter().all(|n| !holders.contains(n)));
        assert_eq!(
            replicate_active(&holders, &live, 10, &mut rng),
            Err(SwarmError::InsufficientPeers { wanted: 10, available: 9 })
        );
    }

    #[test]
    fn repair_restores_after_churn() {
        let mut eng = Engine::new(8);
        for i in 0..10 {
            eng.add_live(NodeId(i));
        }
        let mut keeper = ReplicaKeeper::new(3, 10.0, NodeId(100));
        keeper.start(&mut eng).unwrap();
        let victims: Vec<NodeId> = keeper.holders.iter().take(2).copied().collect();
        for v in &victims {
            eng.schedule(3.0, Action::Leave(*v)).unwrap();
        }
        eng.run_until(5.0, &mut keeper).unwrap();
        assert_eq!(keeper.live_replicas(&eng), 1);
        eng.run_until(11.0, &mut keeper).unwrap();
        assert_eq!(keeper.live_replicas(&eng), 3);
    }
}
