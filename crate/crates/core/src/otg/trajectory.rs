use std::sync::Arc;

use super::path::GeometricPath;
use super::profile::{
    brake_profile, consistent_start, time_optimal_profile, ScalarLimits, ScalarProfile, ScalarSample, ScalarState,
};
use crate::error::{Error, Result};
use crate::model::{JointState, JointVector, KinematicLimits};

/// Conservative path-parameter limits that keep every joint within its
/// velocity, acceleration and jerk bounds anywhere on the path.
///
/// Uses the exact per-segment extrema of |γ'|, |γ''| and |γ'''|. The speed
/// limit is additionally capped so the centripetal terms γ''ṡ² and γ'''ṡ³
/// never take more than half of the acceleration or a third of the jerk
/// budget, which keeps the remaining acceleration and jerk bounds positive.
pub fn scalar_limits(path: &GeometricPath, limits: &KinematicLimits) -> Result<ScalarLimits> {
    if path.is_stationary() {
        return Err(Error::DegeneratePath);
    }
    let n = path.dof();
    let mut v = f64::INFINITY;
    for seg in 0..path.segment_count() {
        for (j, b) in path.segment_bounds(seg).iter().enumerate().take(n) {
            if b.d1 > 1e-12 {
                v = v.min(limits.v_max[j] / b.d1);
            }
            if b.d2 > 0.0 {
                v = v.min((limits.a_max[j] / (2.0 * b.d2)).sqrt());
            }
            if b.d3 > 0.0 {
                v = v.min((limits.j_max[j] / (3.0 * b.d3)).cbrt());
            }
        }
    }
    let mut a = f64::INFINITY;
    for seg in 0..path.segment_count() {
        for (j, b) in path.segment_bounds(seg).iter().enumerate() {
            if b.d1 > 1e-12 {
                a = a.min((limits.a_max[j] - b.d2 * v * v) / b.d1);
            }
            if b.d2 > 0.0 {
                a = a.min(limits.j_max[j] / (9.0 * b.d2 * v));
            }
        }
    }
    let mut jk = f64::INFINITY;
    for seg in 0..path.segment_count() {
        for (j, b) in path.segment_bounds(seg).iter().enumerate() {
            if b.d1 > 1e-12 {
                jk = jk.min((limits.j_max[j] - 3.0 * b.d2 * v * a - b.d3 * v * v * v) / b.d1);
            }
        }
    }
    ScalarLimits::new(v, a.max(1e-6), jk.max(1e-3))
}

/// Maps a scalar sample on the path to a joint state by the chain rule.
pub fn joint_state_on(path: &GeometricPath, x: &ScalarSample) -> JointState {
    let p = path.point(x.s);
    let (v, a, j) = (x.v, x.a, x.j);
    let dq = p.d1.iter().map(|d| d * v).collect();
    let ddq = p.d2.iter().zip(&p.d1).map(|(d2, d1)| d2 * v * v + d1 * a).collect();
    let dddq = p
        .d3
        .iter()
        .zip(p.d2.iter().zip(&p.d1))
        .map(|(d3, (d2, d1))| d3 * v * v * v + 3.0 * d2 * v * a + d1 * j)
        .collect();
    JointState {
        q: JointVector::from_vec_unchecked(p.q),
        dq: JointVector::from_vec_unchecked(dq),
        ddq: JointVector::from_vec_unchecked(ddq),
        dddq: JointVector::from_vec_unchecked(dddq),
    }
}

/// Projects a joint-space state onto the path start: ṡ from the velocity
/// component along γ'(0), s̈ from the residual acceleration likewise, then
/// made consistent with the scalar limits.
pub fn project_onto_start(path: &GeometricPath, state: &JointState, lim: &ScalarLimits) -> ScalarState {
    let p = path.point(0.0);
    let t2: f64 = p.d1.iter().map(|x| x * x).sum();
    if t2 <= 0.0 {
        return ScalarState::at_rest(0.0);
    }
    let v = (state.dq.iter().zip(&p.d1).map(|(a, b)| a * b).sum::<f64>() / t2).max(0.0).min(lim.v);
    let a = state
        .ddq
        .iter()
        .zip(p.d2.iter().zip(&p.d1))
        .map(|(qdd, (d2, d1))| (qdd - d2 * v * v) * d1)
        .sum::<f64>()
        / t2;
    consistent_start(ScalarState::new(0.0, v, a), lim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// Reaches the last waypoint at rest.
    Reaching,
    /// The start could not stop before the path end; this is a stop profile.
    Braked,
    /// Stationary hold for a fixed duration.
    Hold,
}

/// Time-parameterized motion along a fixed path starting at `t0`.
#[derive(Debug, Clone)]
pub struct IntendedTrajectory {
    path: Arc<GeometricPath>,
    limits: Option<ScalarLimits>,
    profile: Arc<ScalarProfile>,
    t0: f64,
    kind: TrajectoryKind,
    hold: f64,
}

impl IntendedTrajectory {
    /// Time-optimal trajectory over `path` starting from `current` at time `t0`.
    pub fn plan(path: Arc<GeometricPath>, limits: &KinematicLimits, current: &JointState, t0: f64) -> Result<Self> {
        let lim = scalar_limits(&path, limits)?;
        let start = project_onto_start(&path, current, &lim);
        Ok(Self::from_start(path, lim, start, t0))
    }

    /// Time-optimal trajectory along `path` from an arbitrary scalar state.
    pub fn from_start(path: Arc<GeometricPath>, lim: ScalarLimits, start: ScalarState, t0: f64) -> Self {
        let planned = time_optimal_profile(path.length(), consistent_start(start, &lim), &lim);
        let kind = if planned.braked { TrajectoryKind::Braked } else { TrajectoryKind::Reaching };
        Self { path, limits: Some(lim), profile: Arc::new(planned.profile), t0, kind, hold: 0.0 }
    }

    /// Holds `q` from `t0` for `duration` seconds.
    pub fn hold(q: JointVector, t0: f64, duration: f64) -> Self {
        Self {
            path: Arc::new(GeometricPath::stationary(q)),
            limits: None,
            profile: Arc::new(ScalarProfile::at_rest(0.0)),
            t0,
            kind: TrajectoryKind::Hold,
            hold: duration.max(0.0),
        }
    }

    /// Same motion shifted to start at `t0`.
    pub fn retimed(&self, t0: f64) -> Self {
        Self { t0, ..self.clone() }
    }

    pub fn path(&self) -> &Arc<GeometricPath> {
        &self.path
    }

    pub fn profile(&self) -> &Arc<ScalarProfile> {
        &self.profile
    }

    pub fn scalar_limits(&self) -> Option<ScalarLimits> {
        self.limits
    }

    pub fn start_time(&self) -> f64 {
        self.t0
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn duration(&self) -> f64 {
        match self.kind {
            TrajectoryKind::Hold => self.hold,
            _ => self.profile.duration(),
        }
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.duration()
    }

    pub fn scalar_sample(&self, tau: f64) -> ScalarSample {
        self.profile.sample(tau - self.t0)
    }

    pub fn scalar_state(&self, tau: f64) -> ScalarState {
        self.profile.state_at(tau - self.t0)
    }

    /// Joint state at absolute time `tau`, clamped to the trajectory's domain.
    pub fn sample(&self, tau: f64) -> JointState {
        joint_state_on(&self.path, &self.scalar_sample(tau))
    }

    /// Brake from the state at `tau` along the same path.
    pub fn failsafe_from(&self, tau: f64) -> FailsafeProfile {
        let start = self.scalar_state(tau);
        let profile = match self.limits {
            Some(lim) => {
                let brake = brake_profile(start, &lim);
                let end = self.path.length();
                // a stop planned inside the path can only pass its end by rounding
                if brake.end_position() > end && brake.end_position() - end <= 1e-9 * (1.0 + end) {
                    ScalarProfile::from_segments(brake.start(), brake.segments().to_vec(), Some(end))
                } else {
                    brake
                }
            }
            None => ScalarProfile::at_rest(start.s),
        };
        FailsafeProfile { profile: Arc::new(profile), start: tau }
    }
}

/// Stopping motion along a path, starting at absolute time `start`.
#[derive(Debug, Clone)]
pub struct FailsafeProfile {
    pub profile: Arc<ScalarProfile>,
    pub start: f64,
}

impl FailsafeProfile {
    pub fn end_time(&self) -> f64 {
        self.start + self.profile.duration()
    }

    pub fn stop_position(&self) -> f64 {
        self.profile.end_position()
    }

    pub fn sample(&self, path: &GeometricPath, tau: f64) -> JointState {
        joint_state_on(path, &self.profile.sample(tau - self.start))
    }
}
