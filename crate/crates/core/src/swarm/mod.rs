//! Multisource piece transfer: rarest-first piece selection, choke/unchoke
//! slot scheduling and data-protection checks on top of a piece map.

pub mod choke;
pub mod picker;
pub mod protect;
pub mod sim;

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::model::{content_digest, Digest160, NodeId};

pub use choke::{choke_round_optimistic, choke_round_regular, ChokeParams, ChokeState, RateWindow};
pub use picker::{pick, random_pick, rarest_first_pick, PickerKind};
pub use protect::{majority_version, replicate_active, verify_piece};
pub use sim::{SwarmConfig, SwarmOutcome, SwarmSim};

pub const DEFAULT_PIECE_SIZE: u64 = 256 * 1024;
pub const DEFAULT_BLOCK_SIZE: u64 = 16 * 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwarmError {
    #[error("no wanted piece is available")]
    NothingWanted,
    #[error("piece {0} failed digest verification")]
    CorruptPiece(u32),
    #[error("versions tie at {0} replicas")]
    AmbiguousVersion(u32),
    #[error("no versions observed")]
    NoVersions,
    #[error("only {available} live non-holders for {wanted} replicas")]
    InsufficientPeers { wanted: usize, available: usize },
    #[error("invalid content spec: {0}")]
    InvalidSpec(String),
    #[error("invalid swarm config: {0}")]
    InvalidConfig(String),
}

/// Size and per-piece digests of one content item.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentSpec {
    pub total_size: u64,
    pub piece_size: u64,
    pub block_size: u64,
    pub piece_digests: Vec<Digest160>,
}

impl ContentSpec {
    pub fn new(total_size: u64, piece_size: u64, block_size: u64, piece_digests: Vec<Digest160>) -> Result<Self, SwarmError> {
        if piece_size == 0 || block_size == 0 || piece_size % block_size != 0 {
            return Err(SwarmError::InvalidSpec(format!(
                "block_size {block_size} must divide piece_size {piece_size}"
            )));
        }
        let want = total_size.div_ceil(piece_size) as usize;
        if piece_digests.len() != want {
            return Err(SwarmError::InvalidSpec(format!("{} digests for {want} pieces", piece_digests.len())));
        }
        Ok(Self { total_size, piece_size, block_size, piece_digests })
    }

    /// Spec for `data`, digesting each piece.
    pub fn from_bytes(data: &[u8], piece_size: u64, block_size: u64) -> Result<Self, SwarmError> {
        let digests = data.chunks(piece_size.max(1) as usize).map(content_digest).collect();
        Self::new(data.len() as u64, piece_size, block_size, digests)
    }

    pub fn piece_count(&self) -> u32 {
        self.piece_digests.len() as u32
    }

    /// Length of piece `idx`; the last piece may be short.
    pub fn piece_len(&self, idx: u32) -> u64 {
        let start = idx as u64 * self.piece_size;
        self.piece_size.min(self.total_size - start)
    }

    pub fn blocks_in(&self, idx: u32) -> u64 {
        self.piece_len(idx).div_ceil(self.block_size)
    }
}

/// Deterministic pseudo-random content; piece `i` depends only on `(seed, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticContent {
    pub seed: u64,
    pub spec: ContentSpec,
}

impl SyntheticContent {
    pub fn new(seed: u64, total_size: u64, piece_size: u64, block_size: u64) -> Result<Self, SwarmError> {
        if piece_size == 0 {
            return Err(SwarmError::InvalidSpec("piece_size must be positive".into()));
        }
        let pieces = total_size.div_ceil(piece_size) as u32;
        let digests = (0..pieces)
            .map(|i| {
                let len = piece_size.min(total_size - i as u64 * piece_size);
                content_digest(&Self::bytes(seed, i, len))
            })
            .collect();
        Ok(Self { seed, spec: ContentSpec::new(total_size, piece_size, block_size, digests)? })
    }

    fn bytes(seed: u64, idx: u32, len: u64) -> Vec<u8> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ ((idx as u64) << 32 | 0x5eed));
        let mut out = vec![0u8; len as usize];
        rng.fill_bytes(&mut out);
        out
    }

    pub fn piece_data(&self, idx: u32) -> Vec<u8> {
        Self::bytes(self.seed, idx, self.spec.piece_len(idx))
    }

    /// Digest of the whole file.
    pub fn file_digest(&self) -> Digest160 {
        let all: Vec<u8> = (0..self.spec.piece_count()).flat_map(|i| self.piece_data(i)).collect();
        content_digest(&all)
    }
}

/// Verified-piece bitfields of a peer's neighbours and per-piece replica counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PieceMap {
    pieces: u32,
    bitfields: BTreeMap<NodeId, Vec<bool>>,
    availability: Vec<u32>,
}

impl PieceMap {
    pub fn new(pieces: u32) -> Self {
        Self { pieces, bitfields: BTreeMap::new(), availability: vec![0; pieces as usize] }
    }

    pub fn add_peer(&mut self, peer: NodeId, bitfield: Vec<bool>) {
        debug_assert_eq!(bitfield.len(), self.pieces as usize);
        self.remove_peer(peer);
        for (i, &h) in bitfield.iter().enumerate() {
            self.availability[i] += h as u32;
        }
        self.bitfields.insert(peer, bitfield);
    }

    pub fn remove_peer(&mut self, peer: NodeId) {
        if let Some(bf) = self.bitfields.remove(&peer) {
            for (i, &h) in bf.iter().enumerate() {
                self.availability[i] -= h as u32;
            }
        }
    }

    /// Records a HAVE; returns `false` if already known.
    pub fn set_have(&mut self, peer: NodeId, idx: u32) -> bool {
        let pieces = self.pieces as usize;
        let bf = self.bitfields.entry(peer).or_insert_with(|| vec![false; pieces]);
        if bf[idx as usize] {
            return false;
        }
        bf[idx as usize] = true;
        self.availability[idx as usize] += 1;
        true
    }

    pub fn has(&self, peer: NodeId, idx: u32) -> bool {
        self.bitfields.get(&peer).is_some_and(|bf| bf[idx as usize])
    }

    pub fn bitfield(&self, peer: NodeId) -> Option<&[bool]> {
        self.bitfields.get(&peer).map(|v| v.as_slice())
    }

    pub fn availability(&self) -> &[u32] {
        &self.availability
    }

    pub fn peers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.bitfields.keys().copied()
    }

    /// Availability equals the column sums of the known bitfields.
    pub fn is_consistent(&self) -> bool {
        (0..self.pieces as usize).all(|i| {
            self.availability[i] == self.bitfields.values().filter(|bf| bf[i]).count() as u32
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(ContentSpec::new(10, 256 * 1024, 15000, vec![]).is_err());
        let c = SyntheticContent::new(1, 600 * 1024, DEFAULT_PIECE_SIZE, DEFAULT_BLOCK_SIZE).unwrap();
        assert_eq!(c.spec.piece_count(), 3);
        assert_eq!(c.spec.piece_len(2), 88 * 1024);
        assert_eq!(c.spec.blocks_in(0), 16);
        assert_eq!(c.spec.blocks_in(2), 6);
        assert!(ContentSpec::new(600 * 1024, DEFAULT_PIECE_SIZE, DEFAULT_BLOCK_SIZE, vec![]).is_err());
    }

    #[test]
    fn synthetic_content_is_reproducible() {
        let a = SyntheticContent::new(7, 1 << 20, DEFAULT_PIECE_SIZE, DEFAULT_BLOCK_SIZE).unwrap();
        let b = SyntheticContent::new(7, 1 << 20, DEFAULT_PIECE_SIZE, DEFAULT_BLOCK_SIZE).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.piece_data(0), a.piece_data(1));
        let whole: Vec<u8> = (0..4).flat_map(|i| a.piece_data(i)).collect();
        assert_eq!(ContentSpec::from_bytes(&whole, DEFAULT_PIECE_SIZE, DEFAULT_BLOCK_SIZE).unwrap(), a.spec);
    }

    #[test]
    fn piece_map_bookkeeping() {
        let mut m = PieceMap::new(4);
        m.add_peer(NodeId(1), vec![true, false, true, false]);
        m.add_peer(NodeId(2), vec![true, true, false, false]);
        assert_eq!(m.availability(), &[2, 1, 1, 0]);
        assert!(m.set_have(NodeId(2), 3));
        assert!(!m.set_have(NodeId(2), 3));
        m.remove_peer(NodeId(1));
        assert_eq!(m.availability(), &[1, 1, 0, 1]);
        assert!(m.is_consistent());
    }
}
