//! Composable peer-to-peer overlay patterns on top of a deterministic
//! discrete-event simulator.

pub mod model;
pub mod par;
pub mod sim;
pub mod topology;
pub mod membership;
pub mod overlay;
pub mod reputation;
pub mod swarm;
pub mod scenario;
