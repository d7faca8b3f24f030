//! Identifier spaces, resource descriptors and message envelopes shared by
//! every overlay scheme.
//!
//! Identifiers live on a circular space of `2^m_bits` values. Resource keys
//! are derived from the SHA-1 digest of the descriptor body, reduced modulo
//! the key space, so the same body always lands on the same key.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha1::{Digest as _, Sha1};
use thiserror::Error;

/// Upper bound on identifier width; identifiers must fit a machine word.
pub const MAX_M_BITS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("identifier width must be in 1..=64 bits, got {0}")]
    InvalidKeySpace(u32),
    #[error("node id {0} already assigned")]
    DuplicateNodeId(NodeId),
    #[error("identifier {value} outside key space of {m_bits} bits")]
    OutOfRange { value: u64, m_bits: u32 },
    #[error("key space of {m_bits} bits cannot hold {requested} distinct ids")]
    SpaceExhausted { m_bits: u32, requested: usize },
}

/// An `m_bits`-wide circular identifier space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeySpace {
    m_bits: u32,
}

impl KeySpace {
    pub fn new(m_bits: u32) -> Result<Self, ModelError> {
        if m_bits == 0 || m_bits > MAX_M_BITS {
            return Err(ModelError::InvalidKeySpace(m_bits));
        }
        Ok(Self { m_bits })
    }

    pub fn m_bits(&self) -> u32 {
        self.m_bits
    }

    /// Bit mask selecting the low `m_bits` bits.
    pub fn mask(&self) -> u64 {
        if self.m_bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.m_bits) - 1
        }
    }

    /// Number of identifiers, saturating at `u64::MAX` for a 64-bit space.
    pub fn size(&self) -> u64 {
        if self.m_bits == 64 {
            u64::MAX
        } else {
            1u64 << self.m_bits
        }
    }

    pub fn contains(&self, value: u64) -> bool {
        value & !self.mask() == 0
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.mask()
    }

    /// Clockwise distance from `from` to `to`.
    pub fn distance(&self, from: u64, to: u64) -> u64 {
        to.wrapping_sub(from) & self.mask()
    }

    /// `2^(i-1)` for finger index `i` in `1..=m_bits`.
    pub fn finger_offset(&self, i: u32) -> u64 {
        debug_assert!(i >= 1 && i <= self.m_bits);
        1u64 << (i - 1)
    }

    /// Membership in the half-open ring interval `(a, b]`.
    ///
    /// When `a == b` the interval is the whole ring.
    pub fn in_open_closed(&self, x: u64, a: u64, b: u64) -> bool {
        if a == b {
            return true;
        }
        let dx = self.distance(a, x);
        dx != 0 && dx <= self.distance(a, b)
    }

    /// Membership in the open ring interval `(a, b)`.
    ///
    /// When `a == b` the interval is the whole ring minus `a`.
    pub fn in_open(&self, x: u64, a: u64, b: u64) -> bool {
        if a == b {
            return x != a;
        }
        let dx = self.distance(a, x);
        dx != 0 && dx < self.distance(a, b)
    }

    pub fn random_id<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen::<u64>() & self.mask()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceKey(pub u64);

impl fmt::Display for ResourceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// A 160-bit SHA-1 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Digest160(pub [u8; 20]);

impl Digest160 {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Low 64 bits of the digest read as a big-endian integer.
    pub fn low_u64(&self) -> u64 {
        let mut tail = [0u8; 8];
        tail.copy_from_slice(&self.0[12..20]);
        u64::from_be_bytes(tail)
    }

    /// Digest value reduced modulo `2^m_bits`.
    pub fn reduce(&self, ks: KeySpace) -> u64 {
        self.low_u64() & ks.mask()
    }
}

impl fmt::Debug for Digest160 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest160({})", self.to_hex())
    }
}

impl fmt::Display for Digest160 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// SHA-1 digest of `data`.
pub fn content_digest(data: &[u8]) -> Digest160 {
    let out = Sha1::digest(data);
    let mut bytes = [0u8; 20];
    bytes.copy_from_slice(&out);
    Digest160(bytes)
}

/// Key of a descriptor body: its SHA-1 digest modulo `2^m_bits`.
pub fn derive_key(descriptor_body: &[u8], ks: KeySpace) -> ResourceKey {
    ResourceKey(content_digest(descriptor_body).reduce(ks))
}

/// Advertisement of a resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub key: ResourceKey,
    pub owner: NodeId,
    pub content_digest: Digest160,
    pub published_at: f64,
    /// `None` means the descriptor never expires.
    pub lifetime: Option<f64>,
}

impl Descriptor {
    pub fn new(body: &[u8], owner: NodeId, ks: KeySpace, published_at: f64, lifetime: Option<f64>) -> Self {
        Self {
            key: derive_key(body, ks),
            owner,
            content_digest: content_digest(body),
            published_at,
            lifetime,
        }
    }

    pub fn expired(&self, t: f64) -> bool {
        match self.lifetime {
            Some(life) => t >= self.published_at + life,
            None => false,
        }
    }

    /// Same advertisement, re-stamped at `now`.
    pub fn refreshed(&self, now: f64) -> Self {
        Self { published_at: now, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Ping,
    Pong,
    Query,
    QueryHit,
    Put,
    Store,
    Get,
    Lookup,
    Notify,
    ChunkRequest,
    ChunkData,
    Have,
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId(pub u64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Empty,
    Key(ResourceKey),
    Descriptors(Vec<Descriptor>),
    Piece { index: u32, block: u32 },
    Bytes(Vec<u8>),
}

/// Routed envelope. Forwarded copies keep the originating `msg_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub msg_id: MessageId,
    pub kind: MessageKind,
    pub ttl: Option<u32>,
    pub group_tag: Option<GroupId>,
    pub src: NodeId,
    /// Original sender of the request this message belongs to.
    pub origin: NodeId,
    pub payload: Payload,
}

impl Message {
    /// Copy of `self` relayed by `relay` with the given ttl.
    pub fn relayed(&self, relay: NodeId, ttl: Option<u32>) -> Self {
        Self { src: relay, ttl, ..self.clone() }
    }
}

/// Hands out unique message ids for one simulation run.
#[derive(Debug, Clone, Default)]
pub struct MessageIdGen {
    next: u64,
}

impl MessageIdGen {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_id(&mut self) -> MessageId {
        let id = MessageId(self.next);
        self.next += 1;
        id
    }
}

/// Registry of assigned node ids; rejects collisions.
#[derive(Debug, Clone)]
pub struct NodeIdAllocator {
    ks: KeySpace,
    assigned: BTreeSet<NodeId>,
}

impl NodeIdAllocator {
    pub fn new(ks: KeySpace) -> Self {
        Self { ks, assigned: BTreeSet::new() }
    }

    pub fn key_space(&self) -> KeySpace {
        self.ks
    }

    pub fn assign(&mut self, id: NodeId) -> Result<NodeId, ModelError> {
        if !self.ks.contains(id.0) {
            return Err(ModelError::OutOfRange { value: id.0, m_bits: self.ks.m_bits() });
        }
        if !self.assigned.insert(id) {
            return Err(ModelError::DuplicateNodeId(id));
        }
        Ok(id)
    }

    /// Draws a fresh id, rejection-sampling collisions.
    pub fn random<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<NodeId, ModelError> {
        if (self.assigned.len() as u64) >= self.ks.size() {
            return Err(ModelError::SpaceExhausted {
                m_bits: self.ks.m_bits(),
                requested: self.assigned.len() + 1,
            });
        }
        loop {
            let id = NodeId(self.ks.random_id(rng));
            if self.assigned.insert(id) {
                return Ok(id);
            }
        }
    }

    pub fn release(&mut self, id: NodeId) {
        self.assigned.remove(&id);
    }

    pub fn len(&self) -> usize {
        self.assigned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assigned.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    // Frozen from Python's hashlib.sha1.
    const SHA1_EMPTY: &str = "da39a3ee5e6b4b0d3255bfef95601890afd80709";
    const SHA1_ABC: &str = "a9993e364706816aba3e25717850c26c9cd0d89d";
    const SHA1_ZERO_16K: &str = "897256b6709e1a4da9daba92b6bde39ccfccd8c1";

    #[test]
    fn sha1_reference_vectors() {
        assert_eq!(content_digest(b"").to_hex(), SHA1_EMPTY);
        assert_eq!(content_digest(b"abc").to_hex(), SHA1_ABC);
        assert_eq!(content_digest(&vec![0u8; 16384]).to_hex(), SHA1_ZERO_16K);
    }

    #[test]
    fn key_from_one_byte_difference() {
        let ks = KeySpace::new(16).unwrap();
        // low 16 bits of the hashlib digests
        assert_eq!(derive_key(b"descriptor-A", ks), ResourceKey(0x8e50));
        assert_eq!(derive_key(b"descriptor-B", ks), ResourceKey(0xf5f3));
        let ks64 = KeySpace::new(64).unwrap();
        assert_eq!(derive_key(b"hello world", ks64), ResourceKey(0x408b9ce91ee846ed));
    }

    #[test]
    fn modulo_reduction() {
        let mut raw = [0u8; 20];
        raw[18] = 0x01;
        raw[19] = 0xF3;
        let d = Digest160(raw);
        assert_eq!(d.reduce(KeySpace::new(8).unwrap()), 0xF3);
        assert_eq!(d.reduce(KeySpace::new(12).unwrap()), 0x1F3);
    }

    #[test]
    fn key_space_bounds() {
        assert!(KeySpace::new(0).is_err());
        assert!(KeySpace::new(65).is_err());
        let ks = KeySpace::new(64).unwrap();
        assert_eq!(ks.mask(), u64::MAX);
        assert_eq!(ks.add(u64::MAX, 2), 1);
    }

    #[test]
    fn ring_intervals() {
        let ks = KeySpace::new(3).unwrap();
        assert!(ks.in_open_closed(6, 3, 0));
        assert!(ks.in_open_closed(0, 3, 0));
        assert!(!ks.in_open_closed(3, 3, 0));
        assert!(ks.in_open(1, 7, 2));
        assert!(!ks.in_open(2, 7, 2));
        assert!(ks.in_open_closed(5, 4, 4));
        assert!(!ks.in_open(4, 4, 4));
    }

    #[test]
    fn descriptor_expiry() {
        let ks = KeySpace::new(16).unwrap();
        let d = Descriptor::new(b"x", NodeId(1), ks, 10.0, Some(60.0));
        assert!(!d.expired(69.9));
        assert!(d.expired(70.0));
        let forever = Descriptor { lifetime: None, ..d };
        assert!(!forever.expired(1e12));
    }

    #[test]
    fn allocator_rejects_collisions() {
        let ks = KeySpace::new(4).unwrap();
        let mut alloc = NodeIdAllocator::new(ks);
        alloc.assign(NodeId(3)).unwrap();
        assert_eq!(alloc.assign(NodeId(3)), Err(ModelError::DuplicateNodeId(NodeId(3))));
        assert!(alloc.assign(NodeId(16)).is_err());
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        for _ in 0..15 {
            alloc.random(&mut rng).unwrap();
        }
        assert_eq!(alloc.len(), 16);
        assert!(matches!(alloc.random(&mut rng), Err(ModelError::SpaceExhausted { .. })));
    }

    #[test]
    fn message_ids_unique() {
        let mut gen = MessageIdGen::new();
        let ids: BTreeSet<_> = (0..1000).map(|_| gen.next_id()).collect();
        assert_eq!(ids.len(), 1000);
    }

    proptest! {
        #[test]
        fn derive_key_deterministic(body in proptest::collection::vec(any::<u8>(), 0..256), m in 1u32..=64) {
            let ks = KeySpace::new(m).unwrap();
            let a = derive_key(&body, ks);
            let b = derive_key(&body, ks);
            prop_assert_eq!(a, b);
            prop_assert!(ks.contains(a.0));
        }
    }
}
