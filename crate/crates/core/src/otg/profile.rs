//! Jerk-limited scalar motion along the path parameter.
//!
//! A profile is a list of constant-jerk segments from an initial
//! (s, ṡ, s̈). Full profiles end at rest at the path end; brake profiles end
//! at rest wherever the limits allow.

use crate::error::{Error, Result};

/// Bounds on path speed, acceleration and jerk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLimits {
    pub v: f64,
    pub a: f64,
    pub j: f64,
}

impl ScalarLimits {
    pub fn new(v: f64, a: f64, j: f64) -> Result<Self> {
        for x in [v, a, j] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::InvalidLimits(format!("scalar limits must be positive, got ({v}, {a}, {j})")));
            }
        }
        Ok(Self { v, a, j })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarState {
    pub s: f64,
    pub v: f64,
    pub a: f64,
}

impl ScalarState {
    pub fn new(s: f64, v: f64, a: f64) -> Self {
        Self { s, v, a }
    }

    pub fn at_rest(s: f64) -> Self {
        Self { s, v: 0.0, a: 0.0 }
    }

    fn advance(&self, jerk: f64, t: f64) -> ScalarState {
        ScalarState {
            s: self.s + t * (self.v + t * (self.a / 2.0 + t * jerk / 6.0)),
            v: self.v + t * (self.a + t * jerk / 2.0),
            a: self.a + t * jerk,
        }
    }
}

/// Sampled profile state including the jerk in force.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarSample {
    pub s: f64,
    pub v: f64,
    pub a: f64,
    pub j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JerkSegment {
    pub duration: f64,
    pub jerk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProfile {
    start: ScalarState,
    segments: Vec<JerkSegment>,
    t_starts: Vec<f64>,
    states: Vec<ScalarState>,
    duration: f64,
    terminal: ScalarState,
}

impl ScalarProfile {
    /// Builds a profile that comes to rest; the terminal position is pinned to
    /// `end_s` when given (absorbing rounding), otherwise integrated.
    pub fn from_segments(start: ScalarState, segments: Vec<JerkSegment>, end_s: Option<f64>) -> Self {
        let segments: Vec<JerkSegment> = segments.into_iter().filter(|g| g.duration > 0.0).collect();
        let mut t_starts = Vec::with_capacity(segments.len());
        let mut states = Vec::with_capacity(segments.len());
        let mut t = 0.0;
        let mut st = start;
        for g in &segments {
            t_starts.push(t);
            states.push(st);
            st = st.advance(g.jerk, g.duration);
            t += g.duration;
        }
        let s_end = end_s.unwrap_or(st.s);
        // the integrated end state differs from (s_end, 0, 0) only by rounding
        let terminal = ScalarState::at_rest(s_end);
        Self { start, segments, t_starts, states, duration: t, terminal }
    }

    pub fn at_rest(s: f64) -> Self {
        Self::from_segments(ScalarState::at_rest(s), Vec::new(), Some(s))
    }

    pub fn start(&self) -> ScalarState {
        self.start
    }

    pub fn segments(&self) -> &[JerkSegment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn terminal(&self) -> ScalarState {
        self.terminal
    }

    /// Stop position of the profile.
    pub fn end_position(&self) -> f64 {
        self.terminal.s
    }

    /// State at time `t` after the profile start; clamped to the start and terminal states.
    pub fn sample(&self, t: f64) -> ScalarSample {
        if self.segments.is_empty() || t <= 0.0 {
            let st = if self.segments.is_empty() { self.terminal } else { self.start };
            let j = if t <= 0.0 && !self.segments.is_empty() { self.segments[0].jerk } else { 0.0 };
            return ScalarSample { s: st.s, v: st.v, a: st.a, j };
        }
        if t >= self.duration {
            let st = self.terminal;
            return ScalarSample { s: st.s, v: 0.0, a: 0.0, j: 0.0 };
        }
        let idx = self.t_starts.partition_point(|ts| *ts <= t) - 1;
        let g = self.segments[idx];
        let st = self.states[idx].advance(g.jerk, t - self.t_starts[idx]);
        // rounding can push the position a hair past the pinned terminal
        let s = if self.terminal.s >= self.start.s { st.s.min(self.terminal.s) } else { st.s };
        ScalarSample { s, v: st.v.max(0.0), a: st.a, j: g.jerk }
    }

    pub fn state_at(&self, t: f64) -> ScalarState {
        let x = self.sample(t);
        ScalarState { s: x.s, v: x.v, a: x.a }
    }

    /// Exact maximum of ṡ over [t_a, t_b] (times relative to the profile start).
    pub fn max_velocity_in(&self, t_a: f64, t_b: f64) -> f64 {
        let mut best = self.sample(t_a).v.max(self.sample(t_b).v);
        for (i, g) in self.segments.iter().enumerate() {
            let t0 = self.t_starts[i];
            let t1 = t0 + g.duration;
            if t1 < t_a || t0 > t_b {
                continue;
            }
            let st = self.states[i];
            if t1 <= t_b {
                best = best.max(st.advance(g.jerk, g.duration).v);
            }
            if g.jerk == 0.0 {
                continue;
            }
            let tc = t0 - st.a / g.jerk;
            if tc > t0.max(t_a) && tc < t1.min(t_b) {
                best = best.max(st.advance(g.jerk, tc - t0).v);
            }
        }
        best
    }
}

/// Minimum-time constant-jerk segments taking (v0, a0) to (vt, 0).
fn velocity_change(v0: f64, a0: f64, vt: f64, lim: &ScalarLimits) -> ([JerkSegment; 3], f64) {
    let (amax, jmax) = (lim.a, lim.j);
    let a0 = a0.clamp(-amax, amax);
    let vr = v0 + a0 * a0.abs() / (2.0 * jmax);
    let none = JerkSegment { duration: 0.0, jerk: 0.0 };
    if (vt - vr).abs() <= 1e-15 * (1.0 + vt.abs()) {
        let seg = JerkSegment { duration: a0.abs() / jmax, jerk: -a0.signum() * jmax };
        return ([seg, none, none], seg.duration);
    }
    let sigma = if vt > vr { 1.0 } else { -1.0 };
    let a0p = sigma * a0;
    let dv = sigma * (vt - v0);
    let ap2 = jmax * dv + a0p * a0p / 2.0;
    let mut ap = ap2.max(0.0).sqrt();
    let mut t2 = 0.0;
    if ap > amax {
        ap = amax;
        t2 = ((dv - (2.0 * amax * amax - a0p * a0p) / (2.0 * jmax)) / amax).max(0.0);
    }
    let t1 = ((ap - a0p) / jmax).max(0.0);
    let t3 = ap / jmax;
    let segs = [
        JerkSegment { duration: t1, jerk: sigma * jmax },
        JerkSegment { duration: t2, jerk: 0.0 },
        JerkSegment { duration: t3, jerk: -sigma * jmax },
    ];
    (segs, t1 + t2 + t3)
}

fn distance_of(start: ScalarState, segs: &[JerkSegment]) -> f64 {
    let mut st = start;
    for g in segs {
        if g.duration > 0.0 {
            st = st.advance(g.jerk, g.duration);
        }
    }
    st.s - start.s
}

/// Distance covered by: change speed to `w`, then stop from (w, 0).
fn plateau_distance(start: ScalarState, w: f64, lim: &ScalarLimits) -> f64 {
    let (up, _) = velocity_change(start.v, start.a, w, lim);
    let (down, _) = velocity_change(w, 0.0, 0.0, lim);
    let local = ScalarState { s: 0.0, ..start };
    distance_of(local, &up) + distance_of(ScalarState::new(0.0, w, 0.0), &down)
}

/// Normalizes a start state against the limits: velocity in [0, v_max],
/// acceleration in [-a_max, a_max], and no forced excursion below zero speed
/// or above v_max while the acceleration is ramped out.
pub fn consistent_start(start: ScalarState, lim: &ScalarLimits) -> ScalarState {
    let v = start.v.clamp(0.0, lim.v);
    let mut a = start.a.clamp(-lim.a, lim.a);
    if a < 0.0 && v - a * a / (2.0 * lim.j) < 0.0 {
        a = -(2.0 * lim.j * v).sqrt();
    }
    if a > 0.0 && v + a * a / (2.0 * lim.j) > lim.v {
        a = (2.0 * lim.j * (lim.v - v).max(0.0)).sqrt();
    }
    ScalarState { s: start.s, v, a }
}

/// Time-optimal jerk-limited stop from `start`.
pub fn brake_profile(start: ScalarState, lim: &ScalarLimits) -> ScalarProfile {
    if start.v == 0.0 && start.a == 0.0 {
        return ScalarProfile::at_rest(start.s);
    }
    let (segs, _) = velocity_change(start.v, start.a, 0.0, lim);
    ScalarProfile::from_segments(start, segs.to_vec(), None)
}

/// Outcome of [`time_optimal_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedProfile {
    pub profile: ScalarProfile,
    /// The target could not be reached without overshoot; `profile` is a brake.
    pub braked: bool,
}

/// Minimum-time profile from `start` to rest at `target`.
///
/// The profile changes speed to a plateau `w`, cruises, then stops. The
/// covered distance grows with `w`, so the fastest admissible plateau is
/// found by bisection; when even an immediate stop overshoots, the stop is
/// returned and flagged.
pub fn time_optimal_profile(target: f64, start: ScalarState, lim: &ScalarLimits) -> PlannedProfile {
    let remaining = target - start.s;
    if start.v == 0.0 && start.a == 0.0 && remaining.abs() <= 1e-15 {
        return PlannedProfile { profile: ScalarProfile::at_rest(start.s), braked: false };
    }
    let tol = 1e-12 * (1.0 + target.abs());
    let stop_dist = plateau_distance(start, 0.0, lim);
    if stop_dist > remaining + tol {
        return PlannedProfile { profile: brake_profile(start, lim), braked: true };
    }
    let w = if plateau_distance(start, lim.v, lim) <= remaining {
        lim.v
    } else {
        let (mut lo, mut hi) = (0.0, lim.v);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if plateau_distance(start, mid, lim) <= remaining {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * lim.v {
                break;
            }
        }
        lo
    };
    let (up, _) = velocity_change(start.v, start.a, w, lim);
    let (down, _) = velocity_change(w, 0.0, 0.0, lim);
    let covered = plateau_distance(start, w, lim);
    let cruise = if w > 1e-9 { ((remaining - covered) / w).max(0.0) } else { 0.0 };
    let mut segs = up.to_vec();
    segs.push(JerkSegment { duration: cruise, jerk: 0.0 });
    segs.extend_from_slice(&down);
    PlannedProfile { profile: ScalarProfile::from_segments(start, segs, Some(target)), braked: false }
}
