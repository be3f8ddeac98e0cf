//! Coordination protocols.
//!
//! A coordinator who sees an entire instance broadcasts one short bit string;
//! each agent then computes its own action from that string and its private
//! data alone. The length of the string is the cost being studied.
//!
//! Protocol families:
//! - [`convex`]: rounded prices of a regularized convex relaxation
//!   (many-to-one matching).
//! - [`routing`]: compressed best-response dynamics for atomic routing games,
//!   built on the approximate counters in [`counters`].
//! - [`stable`]: admission thresholds for many-to-one stable matching.
//! - [`privacy`]: exponential-mechanism selection over a candidate message
//!   space, giving joint differential privacy.
//!
//! [`lowerbound`] holds the hard-instance generators and matching oracles used
//! to probe message length against welfare empirically.

pub mod convex;
pub mod counters;
pub mod error;
pub mod flow;
pub mod lowerbound;
pub mod message;
pub mod privacy;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod routing;
pub mod stable;

pub use error::{Error, Result};
pub use message::{message_bits, Message};
pub use protocol::{run_protocol, Evaluation, Protocol, ProtocolReport, ProtocolRun};
