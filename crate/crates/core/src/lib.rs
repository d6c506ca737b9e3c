//! Simulator and bound toolkit for slotted SINR networks on Poisson point
//! processes. Nodes forward packets to their nearest neighbor inside the cone
//! containing the destination; the transmit power inverts the path loss to
//! that neighbor while the transmit probability keeps the average power
//! fixed. The crate measures per-hop exit delays and the end-to-end
//! information velocity, checks them against the closed-form bounds in
//! `analysis`, and contrasts the policy with a fixed-power ALOHA baseline
//! whose mean exit delay diverges.
//!
//! Everything is driven by one master seed: every random stream derives from
//! it, replications are order-deterministic under any worker count, and a
//! repeated run reproduces its outputs byte for byte.

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod engine;
pub mod error;
pub mod protocol;
pub mod rng;
pub mod spatial;

pub use error::{Result, SimError};
