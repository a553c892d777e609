//! Partial-information multiple access (PIMA) simulation and scheduling.
//!
//! Time is split into frames. Each frame opens with a short enumeration
//! sub-frame of `L1` slots in which the base station learns how many users
//! hold buffered packets, followed by a data sub-frame of `L2` unit slots in
//! which every user is assigned one slot and slots may be shared. Colliding
//! packets are retransmitted, so user activity is correlated across frames;
//! the [`belief`] module tracks that correlation and the [`schedulers`] use it
//! to maximise the expected frame efficiency.
//!
//! The crate is organised bottom-up:
//!
//! - [`types`]: shared domain types (time, packets, queues, assignments).
//! - [`traffic`]: reproducible Poisson arrivals, one stream per user.
//! - [`channel`]: collision-channel frame and slot executors.
//! - [`belief`]: buffer-state belief filter and the compatible-class model.
//! - [`schedulers`]: TDMA, stabilized slotted ALOHA, PIMA, GFEO and S-GFEO.
//! - [`metrics`]: per-run accounting and cross-seed aggregation.
//! - [`oracle`]: brute-force reference implementations.
//! - [`sim`]: end-to-end single-run simulation.

pub mod belief;
pub mod channel;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod schedulers;
pub mod sim;
pub mod traffic;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    frame_length, to_ms, Assignment, EfficiencyMode, LatencyReference, Observation, Packet,
    PimaUserOrder, SchedulerKind, SimConfig, SimTime, SlotOutcome, UserQueue,
};
