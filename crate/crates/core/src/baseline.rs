//! Reactive control-barrier-function velocity filter used as a baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Capsule, JointState, JointVector, RobotModel};
use crate::reach::{distance, Ball};

/// Joint step of the central-difference barrier gradient (rad).
pub const GRADIENT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbfParams {
    /// Barrier offset (m).
    pub d_min: f64,
    /// Class-K gain (1/s).
    pub gamma: f64,
    /// Largest velocity correction (rad/s).
    pub max_correction: f64,
    /// Feedback gain pulling the robot back onto the reference (1/s).
    #[serde(default = "default_tracking_gain")]
    pub tracking_gain: f64,
}

fn default_tracking_gain() -> f64 {
    10.0
}

impl Default for CbfParams {
    fn default() -> Self {
        Self { d_min: 0.05, gamma: 5.0, max_correction: 10.0, tracking_gain: default_tracking_gain() }
    }
}

impl CbfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.gamma > 0.0 && self.max_correction > 0.0 && self.tracking_gain > 0.0) {
            return Err(Error::Config("CBF parameters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbfOutput {
    pub dq: JointVector,
    /// Barrier value h(q) (m).
    pub h: f64,
    /// The constraint modified the desired velocity.
    pub active: bool,
    /// The correction or the joint velocity limits were clamped.
    pub clamped: bool,
    /// Degenerate gradient with an active constraint: zero velocity commanded.
    pub emergency: bool,
}

/// Barrier h(q) = min over link capsules and obstacles of the signed distance minus `d_min`.
pub fn barrier(model: &RobotModel, q: &[f64], obstacles: &[Ball], d_min: f64) -> f64 {
    let mut frames = Vec::with_capacity(model.dof());
    let mut caps: Vec<Capsule> = Vec::with_capacity(model.link_capsules().len());
    barrier_with(model, q, obstacles, d_min, &mut frames, &mut caps)
}

fn barrier_with(
    model: &RobotModel,
    q: &[f64],
    obstacles: &[Ball],
    d_min: f64,
    frames: &mut Vec<nalgebra::Isometry3<f64>>,
    caps: &mut Vec<Capsule>,
) -> f64 {
    model.capsules_into(q, frames, caps);
    let mut h = f64::INFINITY;
    for c in caps.iter() {
        for b in obstacles {
            h = h.min(distance(c, b));
        }
    }
    h - d_min
}

/// Velocity tracking `reference` from `q`: the reference velocity plus
/// proportional feedback, uniformly scaled into the joint velocity limits.
pub fn tracking_velocity(model: &RobotModel, q: &[f64], reference: &JointState, gain: f64) -> JointVector {
    let mut v: Vec<f64> = reference.dq.iter().zip(reference.q.iter().zip(q)).map(|(v, (r, q))| v + gain * (r - q)).collect();
    scale_into_limits(&mut v, &model.limits().v_max);
    JointVector::from_vec_unchecked(v)
}

/// Uniformly scales `v` into the box `|v_j| <= v_max_j`; returns whether it scaled.
fn scale_into_limits(v: &mut [f64], v_max: &[f64]) -> bool {
    let k = v.iter().zip(v_max).map(|(x, l)| x.abs() / l).fold(1.0, f64::max);
    if k > 1.0 {
        v.iter_mut().for_each(|x| *x /= k);
    }
    k > 1.0
}

/// One filter step: the minimal correction of `desired_dq` that satisfies
/// ∇h·dq ≥ −γh, followed by the correction clamp and a uniform scaling into
/// the velocity limits. For h ≥ 0 the scaling keeps the constraint satisfied.
pub fn cbf_filter_step(
    model: &RobotModel,
    q: &JointVector,
    desired_dq: &JointVector,
    obstacles: &[Ball],
    params: &CbfParams,
) -> Result<CbfOutput> {
    let n = model.dof();
    q.check_len(n)?;
    desired_dq.check_len(n)?;
    let mut frames = Vec::with_capacity(n);
    let mut caps = Vec::with_capacity(model.link_capsules().len());
    let h = barrier_with(model, q, obstacles, params.d_min, &mut frames, &mut caps);
    let unchanged = CbfOutput { dq: desired_dq.clone(), h, active: false, clamped: false, emergency: false };
    if !h.is_finite() {
        return Ok(unchanged);
    }
    let mut grad = vec![0.0; n];
    let mut qq = q.to_vec();
    for j in 0..n {
        qq[j] = q[j] + GRADIENT_STEP;
        let hp = barrier_with(model, &qq, obstacles, params.d_min, &mut frames, &mut caps);
        qq[j] = q[j] - GRADIENT_STEP;
        let hm = barrier_with(model, &qq, obstacles, params.d_min, &mut frames, &mut caps);
        qq[j] = q[j];
        grad[j] = (hp - hm) / (2.0 * GRADIENT_STEP);
    }
    let lie: f64 = grad.iter().zip(desired_dq.iter()).map(|(g, v)| g * v).sum();
    if lie >= -params.gamma * h {
        return Ok(unchanged);
    }
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    if g2.sqrt() < 1e-9 {
        return Ok(CbfOutput { dq: JointVector::zeros(n), h, active: true, clamped: false, emergency: true });
    }
    let k = (-params.gamma * h - lie) / g2;
    let mut corr: Vec<f64> = grad.iter().map(|g| k * g).collect();
    let cn = corr.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut clamped = false;
    if cn > params.max_correction {
        corr.iter_mut().for_each(|c| *c *= params.max_correction / cn);
        clamped = true;
    }
    let mut dq: Vec<f64> = desired_dq.iter().zip(&corr).map(|(d, c)| d + c).collect();
    clamped |= scale_into_limits(&mut dq, &model.limits().v_max);
    Ok(CbfOutput { dq: JointVector::from_vec_unchecked(dq), h, active: true, clamped, emergency: false })
}
