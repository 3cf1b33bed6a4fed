//! Intended-trajectory generation: a fixed geometric path through the chunk's
//! waypoints plus a jerk-limited time-optimal scalar profile along it, and
//! path-consistent braking along the same path.

mod path;
mod profile;
mod trajectory;

pub use path::{build_path, DerivBounds, GeometricPath, PathPoint, DUPLICATE_TOL};
pub use profile::{
    brake_profile, consistent_start, time_optimal_profile, JerkSegment, PlannedProfile, ScalarLimits, ScalarProfile,
    ScalarSample, ScalarState,
};
pub use trajectory::{
    joint_state_on, project_onto_start, scalar_limits, FailsafeProfile, IntendedTrajectory, TrajectoryKind,
};
