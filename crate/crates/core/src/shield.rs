//! The safety shield: verifies a one-step-ahead monitored trajectory every
//! safety step and falls back to the last verified path-consistent brake.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JointState, RobotModel};
use crate::otg::{project_onto_start, FailsafeProfile, IntendedTrajectory, TrajectoryKind};
use crate::reach::{distance, obstacle_ball, sweep, ObstacleState, SweepScratch, SweptMotion, TimeInterval};

/// Upper bound on the number of verification subintervals per step.
pub const MAX_SUBINTERVALS: usize = 64;

/// Position tolerance for accepting a new trajectory (rad).
pub const HANDOFF_POSITION_TOL: f64 = 1e-6;
/// Path-speed tolerance for accepting a new trajectory.
pub const HANDOFF_SPEED_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SafetyMode {
    /// Speed and separation monitoring: no contact unless stopped.
    Ssm,
    /// Power and force limiting: contact only below an energy threshold.
    Pfl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOverride {
    pub obstacle: usize,
    pub t_safe: f64,
}

fn default_energy_factor() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetySpec {
    pub mode: SafetyMode,
    /// Admissible kinetic energy at contact (J); zero under SSM.
    #[serde(default)]
    pub t_safe: f64,
    /// Subtracted from the threshold during verification (J).
    #[serde(default)]
    pub energy_margin: f64,
    /// Relative safety factor on the interval energy bound.
    #[serde(default = "default_energy_factor")]
    pub energy_factor: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<ThresholdOverride>,
}

impl SafetySpec {
    pub fn ssm() -> Self {
        Self { mode: SafetyMode::Ssm, t_safe: 0.0, energy_margin: 0.0, energy_factor: default_energy_factor(), overrides: vec![] }
    }

    pub fn pfl(t_safe: f64) -> Self {
        Self { mode: SafetyMode::Pfl, t_safe, ..Self::ssm() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.mode == SafetyMode::Ssm && (self.t_safe != 0.0 || !self.overrides.is_empty()) {
            return bad("SSM requires t_safe = 0 and no threshold overrides");
        }
        if !(self.t_safe >= 0.0) || !(self.energy_margin >= 0.0) || !(self.energy_factor >= 0.0) {
            return bad("energy thresholds and margins must be >= 0");
        }
        if self.overrides.iter().any(|o| !(o.t_safe >= 0.0)) {
            return bad("threshold overrides must be >= 0");
        }
        Ok(())
    }

    /// Energy threshold for the obstacle with index `obstacle`.
    pub fn threshold(&self, obstacle: usize) -> f64 {
        self.overrides.iter().rev().find(|o| o.obstacle == obstacle).map_or(self.t_safe, |o| o.t_safe)
    }
}

/// One step of an intended trajectory followed by braking along its path.
#[derive(Debug, Clone)]
pub struct MonitoredTrajectory {
    intended: IntendedTrajectory,
    t0: f64,
    t_i: f64,
    failsafe: FailsafeProfile,
}

impl MonitoredTrajectory {
    /// Monitors `intended` from `t0`, switching to braking at `t_i`.
    pub fn new(intended: IntendedTrajectory, t0: f64, t_i: f64) -> Self {
        let failsafe = intended.failsafe_from(t_i);
        Self { intended, t0, t_i, failsafe }
    }

    pub fn intended(&self) -> &IntendedTrajectory {
        &self.intended
    }

    pub fn failsafe(&self) -> &FailsafeProfile {
        &self.failsafe
    }

    pub fn start_time(&self) -> f64 {
        self.t0
    }

    pub fn t_i(&self) -> f64 {
        self.t_i
    }

    /// End of braking.
    pub fn t_f(&self) -> f64 {
        self.failsafe.end_time().max(self.t_i)
    }

    pub fn path_position(&self, tau: f64) -> f64 {
        if tau <= self.t_i {
            self.intended.scalar_state(tau).s
        } else {
            self.failsafe.profile.sample(tau - self.t_i).s
        }
    }

    pub fn sample(&self, tau: f64) -> JointState {
        if tau <= self.t_i {
            self.intended.sample(tau)
        } else {
            self.failsafe.sample(self.intended.path(), tau)
        }
    }

    /// Exact maximum path speed over `[t_a, t_b]`.
    pub fn max_speed_in(&self, t_a: f64, t_b: f64) -> f64 {
        let mut v = 0.0f64;
        if t_a <= self.t_i {
            let t0 = self.intended.start_time();
            v = v.max(self.intended.profile().max_velocity_in(t_a - t0, t_b.min(self.t_i) - t0));
        }
        if t_b > self.t_i {
            v = v.max(self.failsafe.profile.max_velocity_in(t_a.max(self.t_i) - self.t_i, t_b - self.t_i));
        }
        v
    }

    /// Kinetic energy per unit squared path speed at path parameter `s`.
    fn energy_coefficient(&self, model: &RobotModel, s: f64, q: &mut Vec<f64>) -> f64 {
        let path = self.intended.path();
        if path.is_stationary() {
            return 0.0;
        }
        path.position_into(s, q);
        let d1 = path.tangent(s);
        model.kinetic_energy_unchecked(q, &d1)
    }
}

impl SweptMotion for MonitoredTrajectory {
    fn configuration_into(&self, t: f64, out: &mut Vec<f64>) {
        self.intended.path().position_into(self.path_position(t), out);
    }

    fn travel_bound(&self, t_a: f64, t_b: f64) -> f64 {
        self.intended.path().travel_bound(self.path_position(t_a), self.path_position(t_b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalMargin {
    pub interval: TimeInterval,
    /// Smallest signed distance between robot and obstacle occupancies (m).
    pub min_distance: f64,
    /// Energy bound (J); only evaluated where contact is possible under PFL.
    pub max_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub safe: bool,
    pub margins: Vec<IntervalMargin>,
    pub first_violation: Option<usize>,
}

impl Verdict {
    pub fn min_distance(&self) -> f64 {
        self.margins.iter().map(|m| m.min_distance).fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy(&self) -> f64 {
        self.margins.iter().map(|m| m.max_energy).fold(0.0, f64::max)
    }

    pub fn violating_interval(&self) -> Option<TimeInterval> {
        self.first_violation.map(|k| self.margins[k].interval)
    }
}

/// Number of verification subintervals for a horizon of length `span`.
pub fn subinterval_count(span: f64, alpha_s: f64) -> usize {
    ((span / alpha_s).ceil() as usize).clamp(1, MAX_SUBINTERVALS)
}

/// Checks `mon` over `[start, t_F]` against every obstacle's reachable ball.
///
/// SSM rejects any possible contact. PFL accepts a possible contact when the
/// interval's energy bound plus the margin stays within the obstacle's
/// threshold; the bound is `(1 + energy_factor)` times the larger endpoint
/// energy coefficient times the exact squared maximum path speed.
pub fn verify(mon: &MonitoredTrajectory, obstacles: &[ObstacleState], spec: &SafetySpec, model: &RobotModel) -> Verdict {
    let mut scratch = SweepScratch::default();
    verify_with(mon, obstacles, spec, model, &mut scratch)
}

pub(crate) fn verify_with(
    mon: &MonitoredTrajectory,
    obstacles: &[ObstacleState],
    spec: &SafetySpec,
    model: &RobotModel,
    scratch: &mut SweepScratch,
) -> Verdict {
    let start = mon.t0;
    let end = mon.t_f();
    let n_sub = subinterval_count(end - start, mon.t_i - mon.t0);
    let mut margins = Vec::with_capacity(n_sub);
    let mut first_violation = None;
    let mut q = Vec::with_capacity(model.dof());
    sweep(model, mon, TimeInterval { t_a: start, t_b: end }, n_sub, scratch, |k, sub, caps| {
        let mut min_d = f64::INFINITY;
        let mut energy: Option<f64> = None;
        let mut ok = true;
        for (i, obs) in obstacles.iter().enumerate() {
            let ball = obstacle_ball(obs, sub.t_b);
            let d = caps.iter().map(|c| distance(c, &ball)).fold(f64::INFINITY, f64::min);
            min_d = min_d.min(d);
            if d > 0.0 {
                continue;
            }
            match spec.mode {
                SafetyMode::Ssm => ok = false,
                SafetyMode::Pfl => {
                    let e = *energy.get_or_insert_with(|| {
                        let v = mon.max_speed_in(sub.t_a, sub.t_b);
                        if v == 0.0 {
                            return 0.0;
                        }
                        let ka = mon.energy_coefficient(model, mon.path_position(sub.t_a), &mut q);
                        let kb = mon.energy_coefficient(model, mon.path_position(sub.t_b), &mut q);
                        (1.0 + spec.energy_factor) * ka.max(kb) * v * v
                    });
                    if e + spec.energy_margin > spec.threshold(i) {
                        ok = false;
                    }
                }
            }
        }
        if !ok && first_violation.is_none() {
            first_violation = Some(k);
        }
        margins.push(IntervalMargin { interval: sub, min_distance: min_d, max_energy: energy.unwrap_or(0.0) });
    });
    Verdict { safe: first_violation.is_none(), margins, first_violation }
}

/// Accepts `intended` as a continuation of `current` or says why not.
pub fn check_handoff(current: &JointState, intended: &IntendedTrajectory) -> Result<()> {
    let first = intended.sample(intended.start_time());
    let gap = first.q.sub(&current.q).norm_inf();
    if !(gap <= HANDOFF_POSITION_TOL) {
        return Err(Error::HandoffRejected(format!("start position off by {gap:.3e} rad")));
    }
    match intended.kind() {
        TrajectoryKind::Braked => Err(Error::HandoffRejected("cannot stop before the final waypoint".into())),
        TrajectoryKind::Hold => {
            if current.dq.norm_inf() > 0.0 {
                Err(Error::HandoffRejected("hold requested while moving".into()))
            } else {
                Ok(())
            }
        }
        TrajectoryKind::Reaching => {
            let lim = intended.scalar_limits().ok_or_else(|| Error::HandoffRejected("missing limits".into()))?;
            let projected = project_onto_start(intended.path(), current, &lim).v;
            let planned = intended.profile().start().v;
            if (projected - planned).abs() > HANDOFF_SPEED_TOL {
                return Err(Error::HandoffRejected(format!("start speed {planned} != projected {projected}")));
            }
            Ok(())
        }
    }
}

/// Number of safety steps per chunk, `h·Δt/α_s`, which must be an integer.
pub fn steps_per_chunk(h: usize, dt: f64, alpha_s: f64) -> Result<usize> {
    if h == 0 || !(dt > 0.0) || !(alpha_s > 0.0) {
        return Err(Error::Config("h, dt and alpha_s must be positive".into()));
    }
    let ratio = dt / alpha_s;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio {
        return Err(Error::Config(format!("dt = {dt} s is not an integer multiple of alpha_s = {alpha_s} s")));
    }
    Ok(h * k as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Intended,
    Failsafe,
}

/// Result of one shield step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Time the command is for (`t + α_s`).
    pub time: f64,
    pub command: JointState,
    pub phase: Phase,
    pub verdict: Verdict,
    /// Stopped on a completed failsafe with no verifiable way to continue.
    pub stalled: bool,
}

#[derive(Debug, Clone)]
struct Staged {
    trajectory: IntendedTrajectory,
    at: JointState,
}

/// Shield state owned by one control loop.
#[derive(Debug)]
pub struct ShieldState {
    model: Arc<RobotModel>,
    spec: SafetySpec,
    alpha_s: f64,
    t: f64,
    command: JointState,
    active: IntendedTrajectory,
    committed: MonitoredTrajectory,
    staged: Option<Staged>,
    phase: Phase,
    stalled: bool,
    rejected: usize,
    scratch: SweepScratch,
}

impl ShieldState {
    /// Shield holding `start` (at rest) from time `t0`.
    pub fn new(model: Arc<RobotModel>, spec: SafetySpec, alpha_s: f64, start: JointState, t0: f64) -> Result<Self> {
        spec.validate()?;
        if !(alpha_s > 0.0) {
            return Err(Error::Config("alpha_s must be positive".into()));
        }
        start.q.check_len(model.dof())?;
        if !start.is_at_rest() {
            return Err(Error::Config("the shield must start at rest".into()));
        }
        let active = IntendedTrajectory::hold(start.q.clone(), t0, 0.0);
        let committed = MonitoredTrajectory::new(active.clone(), t0, t0);
        Ok(Self {
            model,
            spec,
            alpha_s,
            t: t0,
            command: start,
            active,
            committed,
            staged: None,
            phase: Phase::Intended,
            stalled: false,
            rejected: 0,
            scratch: SweepScratch::default(),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn alpha_s(&self) -> f64 {
        self.alpha_s
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn command(&self) -> &JointState {
        &self.command
    }

    pub fn committed(&self) -> &MonitoredTrajectory {
        &self.committed
    }

    pub fn active(&self) -> &IntendedTrajectory {
        &self.active
    }

    pub fn stalled(&self) -> bool {
        self.stalled
    }

    pub fn rejected_handoffs(&self) -> usize {
        self.rejected
    }

    pub fn spec(&self) -> &SafetySpec {
        &self.spec
    }

    /// Stages `intended` for verification at the next step. A rejected
    /// trajectory leaves the committed motion untouched.
    pub fn set_trajectory(&mut self, intended: IntendedTrajectory) -> Result<()> {
        if let Err(e) = check_handoff(&self.command, &intended) {
            self.rejected += 1;
            return Err(e);
        }
        self.staged = Some(Staged { trajectory: intended, at: self.command.clone() });
        Ok(())
    }

    fn candidate(&mut self) -> IntendedTrajectory {
        if let Some(st) = self.staged.take() {
            if st.at == self.command {
                let traj = if st.trajectory.start_time() == self.t { st.trajectory.clone() } else { st.trajectory.retimed(self.t) };
                // keep it while the robot stays put, so it can start once clear
                self.staged = Some(st);
                return traj;
            }
        }
        match self.phase {
            Phase::Intended => self.active.clone(),
            Phase::Failsafe => {
                let base = self.committed.intended();
                match base.scalar_limits() {
                    Some(lim) if !base.path().is_stationary() => {
                        let tau = self.t - self.committed.t_i();
                        let start = self.committed.failsafe().profile.state_at(tau);
                        IntendedTrajectory::from_start(base.path().clone(), lim, start, self.t)
                    }
                    _ => IntendedTrajectory::hold(self.command.q.clone(), self.t, 0.0),
                }
            }
        }
    }

    /// Verifies the candidate monitored trajectory for `[t, t + α_s]` plus
    /// braking and returns the command for `t + α_s`.
    pub fn shield_step(&mut self, measurements: &[ObstacleState]) -> StepOutput {
        let t = self.t;
        let t_next = t + self.alpha_s;
        let candidate = self.candidate();
        let mon = MonitoredTrajectory::new(candidate, t, t_next);
        let verdict = verify_with(&mon, measurements, &self.spec, &self.model, &mut self.scratch);
        let command;
        if verdict.safe {
            command = mon.intended().sample(t_next);
            self.active = mon.intended().clone();
            self.committed = mon;
            self.phase = Phase::Intended;
            self.staged = None;
            self.stalled = false;
        } else {
            command = self.committed.sample(t_next);
            self.phase = Phase::Failsafe;
            self.stalled = t >= self.committed.t_f();
        }
        self.t = t_next;
        self.command = command.clone();
        StepOutput { time: t_next, command, phase: self.phase, verdict, stalled: self.stalled }
    }

    /// Runs `n_steps` shield steps, measuring obstacles at each step's start time.
    pub fn shield_run_chunk<F>(&mut self, n_steps: usize, mut measure: F) -> Vec<StepOutput>
    where
        F: FnMut(f64) -> Vec<ObstacleState>,
    {
        (0..n_steps)
            .map(|_| {
                let m = measure(self.t);
                self.shield_step(&m)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::WaypointPath;
    use crate::model::{JointVector, Vec3};
    use crate::otg::build_path;
    use crate::robots::planar1;

    const ALPHA: f64 = 0.001;

    fn jv(v: &[f64]) -> JointVector {
        JointVector::new(v.to_vec()).unwrap()
    }

    fn planar(v_max: f64) -> Arc<RobotModel> {
        let mut d = planar1();
        d.joints[0].v_max = v_max;
        Arc::new(RobotModel::from_description(d).unwrap())
    }

    fn plan(model: &RobotModel, from: &JointState, to: f64, t0: f64) -> IntendedTrajectory {
        let wp = WaypointPath::new(vec![from.q.clone(), jv(&[to])], t0);
        let path = Arc::new(build_path(&wp, model.limits()).unwrap());
        IntendedTrajectory::plan(path, model.limits(), from, t0).unwrap()
    }

    fn ball_at(x: f64, y: f64, r: f64) -> ObstacleState {
        ObstacleState { measured_center: Vec3::new(x, y, 0.0), shape_radius: r, v_max_obj: 0.0, meas_error: 0.0, meas_time: 0.0 }
    }

    /// Smallest distance between the robot at `q` and the obstacle's true ball.
    fn clearance(model: &RobotModel, q: &JointVector, obs: &ObstacleState) -> f64 {
        let ball = obstacle_ball(obs, obs.meas_time);
        model.forward_kinematics(q).unwrap().iter().map(|c| distance(c, &ball)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn steps_per_chunk_requires_an_integer_ratio() {
        assert_eq!(steps_per_chunk(2, 0.1, 0.001).unwrap(), 200);
        assert_eq!(steps_per_chunk(6, 0.033, 0.001).unwrap(), 198);
        assert!(steps_per_chunk(6, 0.1, 0.003).is_err());
        assert!(steps_per_chunk(0, 0.1, 0.001).is_err());
    }

    #[test]
    fn threshold_overrides_apply_per_obstacle() {
        let mut spec = SafetySpec::pfl(0.265);
        spec.overrides.push(ThresholdOverride { obstacle: 1, t_safe: 0.014 });
        assert_eq!(spec.threshold(0), 0.265);
        assert_eq!(spec.threshold(1), 0.014);
        assert!(spec.validate().is_ok());
        spec.mode = SafetyMode::Ssm;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn without_obstacles_the_shield_is_transparent() {
        let model = planar(2.0);
        let start = JointState::at_rest(jv(&[0.0]));
        let mut shield = ShieldState::new(model.clone(), SafetySpec::ssm(), ALPHA, start.clone(), 0.0).unwrap();
        let traj = plan(&model, &start, 1.0, 0.0);
        shield.set_trajectory(traj.clone()).unwrap();
        let n = (traj.duration() / ALPHA).ceil() as usize + 5;
        for out in shield.shield_run_chunk(n, |_| Vec::new()) {
            assert!(out.verdict.safe);
            assert_eq!(out.phase, Phase::Intended);
            assert_eq!(out.command.q, traj.sample(out.time).q);
        }
        assert!((shield.command().q[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stopped_pose_touching_an_obstacle_is_unsafe_under_ssm() {
        let model = planar(2.0);
        let hold = IntendedTrajectory::hold(jv(&[0.0]), 0.0, 0.0);
        let mon = MonitoredTrajectory::new(hold, 0.0, ALPHA);
        let touching = [ball_at(0.5, 0.1, 0.1)];
        let v = verify(&mon, &touching, &SafetySpec::ssm(), &model);
        assert!(!v.safe);
        assert_eq!(v.first_violation, Some(v.margins.len() - 1));
        // the same contact at rest carries no energy
        assert!(verify(&mon, &touching, &SafetySpec::pfl(0.014), &model).safe);
        assert!(verify(&mon, &[ball_at(0.5, 0.5, 0.1)], &SafetySpec::ssm(), &model).safe);
    }

    /// Monitored step at cruise speed on a long path, with an obstacle at the
    /// shoulder that is always in contact.
    fn cruising_contact(v_max: f64, spec: &SafetySpec) -> Verdict {
        let model = planar(v_max);
        let traj = plan(&model, &JointState::at_rest(jv(&[-3.0])), 3.0, 0.0);
        let t = 0.5 * traj.duration();
        assert!((traj.scalar_sample(t).v - v_max).abs() < 1e-9);
        let mon = MonitoredTrajectory::new(traj, t, t + ALPHA);
        verify(&mon, &[ball_at(0.0, 0.0, 0.1)], spec, &model)
    }

    #[test]
    fn pfl_admits_contact_below_the_energy_threshold() {
        // 1 kg at 1 m: K = v^2 / 2, so 0.447 rad/s carries 0.1 J
        let slow = cruising_contact(0.447, &SafetySpec::pfl(0.265));
        assert!(slow.safe);
        let e = slow.max_energy();
        assert!(e >= 0.5 * 0.447f64.powi(2) && e <= 1.05 * 0.5 * 0.447f64.powi(2) + 1e-12);
        assert!(!cruising_contact(0.9, &SafetySpec::pfl(0.265)).safe);
        assert!(!cruising_contact(0.447, &SafetySpec::ssm()).safe);
        assert!(!cruising_contact(0.447, &SafetySpec::pfl(0.014)).safe);
    }

    #[test]
    fn handoff_needs_a_matching_start() {
        let model = planar(2.0);
        let start = JointState::at_rest(jv(&[0.0]));
        let mut shield = ShieldState::new(model.clone(), SafetySpec::ssm(), ALPHA, start.clone(), 0.0).unwrap();
        let far = plan(&model, &JointState::at_rest(jv(&[0.1])), 1.0, 0.0);
        assert!(matches!(shield.set_trajectory(far), Err(Error::HandoffRejected(_))));
        assert_eq!(shield.rejected_handoffs(), 1);
        shield.set_trajectory(plan(&model, &start, 1.0, 0.0)).unwrap();
        for _ in 0..100 {
            shield.shield_step(&[]);
        }
        // mid-motion continuation from the current command is accepted
        let here = shield.command().clone();
        assert!(here.dq[0] > 0.0);
        let next = plan(&model, &here, 1.5, shield.time());
        check_handoff(&here, &next).unwrap();
        assert!(check_handoff(&here, &IntendedTrajectory::hold(here.q.clone(), shield.time(), 1.0)).is_err());
    }

    #[test]
    fn failsafe_brakes_on_the_path_and_recovers() {
        let model = planar(2.0);
        let start = JointState::at_rest(jv(&[0.0]));
        let mut shield = ShieldState::new(model.clone(), SafetySpec::ssm(), ALPHA, start.clone(), 0.0).unwrap();
        let traj = plan(&model, &start, 1.5, 0.0);
        let path = traj.path().clone();
        shield.set_trajectory(traj).unwrap();
        // blocks the arm somewhere around q = 1
        let obs = ball_at(0.8 * 1.0f64.cos(), 0.8 * 1.0f64.sin(), 0.05);
        let mut braked = false;
        let mut steps = 0;
        while shield.command().q[0] < 1.5 - 1e-9 && steps < 20_000 {
            let present = steps < 3000;
            let m: Vec<_> = if present { vec![obs] } else { vec![] };
            let out = shield.shield_step(&m);
            assert!(path.distance_to(out.command.q.as_slice()) < 1e-9);
            if present {
                assert!(clearance(&model, &out.command.q, &obs) > 0.0);
                braked |= out.phase == Phase::Failsafe;
            }
            steps += 1;
        }
        assert!(braked);
        assert!(steps < 20_000, "did not resume after the obstacle left");
        assert_eq!(shield.phase(), Phase::Intended);
    }
}
