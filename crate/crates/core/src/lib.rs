//! Stabilizing an unstable scalar plant over a timing channel.
//!
//! The crate is split into the plant model, the timing channel, its
//! capacity, the tree quantizer, the anytime codec, controller logic and
//! an experiment harness. Commonly used types are re-exported here.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod channel;
pub mod codec;
pub mod control;
pub mod dist;
pub mod error;
pub mod harness;
pub mod plant;
pub mod quantizer;
pub mod rng;

pub use capacity::{CapacityOptions, CapacityResult};
pub use channel::{ChannelTrace, DelayModel, MixtureWaitingTime};
pub use codec::{Codebook, CodebookMode, DecodeSchedule, ErrorRate, ErrorRateSpec, Layout};
pub use control::{ControlStatus, ErrorBehavior, EstimatorState};
pub use dist::DiscretizedDist;
pub use error::{Error, Result};
pub use harness::{EstimationConfig, EstimationRow, ExperimentConfig, Mode, SimTrace, SweepResult, SweepRow};
pub use plant::{InputSignal, PlantParams, PlantState, Segment, TimeBase};
pub use quantizer::{BitPath, InitialCondition, Offset};
