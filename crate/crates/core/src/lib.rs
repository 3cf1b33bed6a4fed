//! Path-consistent safety filtering for action-chunked robot policies.
//!
//! Action chunks of delta joint positions are integrated into waypoints
//! ([`chunk`]), turned into time-optimal jerk-limited trajectories along a
//! fixed geometric path ([`otg`]), and executed through a shield ([`shield`])
//! that verifies a one-step-ahead monitored trajectory against reachable
//! obstacle occupancies ([`reach`]) and brakes along the same path when
//! verification fails. [`sim`] provides a deterministic simulator with
//! scripted obstacles, the unshielded and control-barrier-function baselines
//! ([`baseline`]), metrics and traces.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod baseline;
pub mod bench;
pub mod chunk;
pub mod error;
pub mod model;
pub mod otg;
pub mod reach;
pub mod robots;
pub mod shield;
pub mod sim;

pub use error::{Error, Result};
pub use model::{Capsule, JointState, JointVector, KinematicLimits, RobotDescription, RobotModel, Vec3};
