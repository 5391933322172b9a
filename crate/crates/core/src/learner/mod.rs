//! Imitation learning: state encoding, the MLP policy, behaviour cloning,
//! DAgger and the demonstration graph.
pub mod state;
pub mod net;
pub mod policy;
pub mod train;
pub mod dagger;
pub mod graph;
