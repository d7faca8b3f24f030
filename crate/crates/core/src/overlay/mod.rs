//! Overlay patterns: unstructured (flooding), structured (Chord DHT) and
//! hybrid (central index / tracker).

pub mod dum;
pub mod dsm;
pub mod hm;
