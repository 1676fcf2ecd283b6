//! Decentralized discovery of interfering radio devices and SINR-driven
//! channel allocation, with the simulators used to evaluate both.
//!
//! Nodes gossip over a Newscast peer-sampling layer ([`peer_sampling`]) and
//! keep a utility-sorted table of nearby devices ([`discovery`]). The
//! resulting knowledge feeds a best-response channel and power allocation
//! game ([`alloc`]). [`sim`] drives both protocols over generated
//! [`topology`] instances and [`metrics`] checks them against ground truth.

pub mod alloc;
pub mod config;
pub mod discovery;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod geo;
pub mod metrics;
pub mod peer_sampling;
pub mod rng;
pub mod sim;
pub mod time;
pub mod topology;

pub use error::{Error, Result};
pub use geo::{Address, Directory, NodeDescriptor, NodeId, Position};
pub use time::SimTime;
