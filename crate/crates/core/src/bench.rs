//! Micro-benchmarks of the shield step and of intended-trajectory construction.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chunk::{integrate_chunk, ActionChunk, PlannerParams, ScriptedPlanner};
use crate::error::{Error, Result};
use crate::model::{JointState, JointVector, RobotModel};
use crate::otg::{build_path, IntendedTrajectory};
use crate::shield::ShieldState;
use crate::sim::{ObstacleWorld, ScenarioConfig, SourceSpec};

/// Summary of wall-clock samples (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
    pub max: f64,
}

impl TimingStats {
    pub fn of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self { count: 0, mean: 0.0, median: 0.0, p99: 0.0, max: 0.0 };
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let rank = |p: f64| v[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Self { count: n, mean: v.iter().sum::<f64>() / n as f64, median, p99: rank(0.99), max: v[n - 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: String,
    pub dof: usize,
    pub obstacles: usize,
    pub exec_steps: usize,
    pub shield_step: TimingStats,
    pub trajectory_build: TimingStats,
    /// Steps whose verification failed.
    pub failsafe_steps: usize,
}

/// Waypoint integration, path construction and time-optimal planning of the
/// first `h` actions of `chunk` from `state`.
fn build(model: &RobotModel, state: &JointState, chunk: &ActionChunk, h: usize, t: f64) -> Result<Option<IntendedTrajectory>> {
    let wp = integrate_chunk(&state.q, chunk, h, model.limits())?;
    match build_path(&wp, model.limits()) {
        Ok(path) => Ok(Some(IntendedTrajectory::plan(Arc::new(path), model.limits(), state, t)?)),
        Err(Error::DegeneratePath) | Err(Error::PathOutsideLimits) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs `iters` shield steps of the scenario's shielded control loop and
/// times each step. Every step also times one trajectory build from the
/// current command state, so both samples have `iters` entries. The goal
/// sequence is cycled back to the start so the robot keeps moving.
pub fn bench_shield(cfg: &ScenarioConfig, iters: usize) -> Result<BenchReport> {
    cfg.validate()?;
    if iters == 0 {
        return Err(Error::Config("bench needs at least one iteration".into()));
    }
    let model = Arc::new(cfg.robot_model()?);
    let timing = cfg.timing;
    let h = timing.exec_steps;
    let steps_chunk = timing.steps_per_chunk()?;
    let step_cap = match &cfg.source {
        SourceSpec::Scripted { step_cap, .. } => *step_cap,
        SourceSpec::Replay { .. } => return Err(Error::Config("bench needs a scripted chunk source".into())),
    };
    let start = JointVector::new(cfg.task.start.clone())?;
    let mut cycle: Vec<JointVector> = cfg.task.goals.iter().map(|g| JointVector::new(g.clone())).collect::<Result<_>>()?;
    cycle.push(start.clone());
    let params = PlannerParams {
        chunk_len: timing.chunk_len,
        dt: timing.dt,
        step_cap,
        goal_tol: cfg.task.goal_tol,
        perturbation: 0.0,
        seed: cfg.seed,
    };
    let mut planner = ScriptedPlanner::new(cycle.clone(), params.clone())?;
    let mut world = ObstacleWorld::new(&cfg.obstacles, cfg.seed);
    let mut shield = ShieldState::new(model.clone(), cfg.safety.clone(), timing.alpha_s, JointState::at_rest(start), 0.0)?;
    let mut frames = Vec::new();
    let mut caps = Vec::new();
    let mut step_times = Vec::with_capacity(iters);
    let mut build_times = Vec::with_capacity(iters);
    let mut failsafe_steps = 0;
    let mut chunk = planner.plan(0.0, shield.command())?;

    for k in 0..iters {
        let t = shield.time();
        let state = shield.command().clone();
        if k % steps_chunk == 0 {
            let last = cycle.len() - 1;
            if planner.active_goal() == last && cycle[last].sub(&state.q).norm_inf() <= cfg.task.goal_tol {
                planner = ScriptedPlanner::new(cycle.clone(), params.clone())?;
            }
            chunk = planner.plan(t, &state)?;
        }
        let clock = Instant::now();
        let built = build(&model, &state, &chunk, h, t)?;
        build_times.push(clock.elapsed().as_secs_f64());
        if k % steps_chunk == 0 {
            if let Some(traj) = built {
                // a rejected handoff keeps the current motion
                let _ = shield.set_trajectory(traj);
            }
        }

        let measurements = world.measure()?;
        let clock = Instant::now();
        let out = shield.shield_step(&measurements);
        step_times.push(clock.elapsed().as_secs_f64());
        if !out.verdict.safe {
            failsafe_steps += 1;
        }
        model.capsules_into(&out.command.q, &mut frames, &mut caps);
        world.advance(out.time, &caps)?;
    }

    Ok(BenchReport {
        scenario: cfg.name.clone(),
        dof: model.dof(),
        obstacles: cfg.obstacles.len(),
        exec_steps: h,
        shield_step: TimingStats::of(&step_times),
        trajectory_build: TimingStats::of(&build_times),
        failsafe_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_known_samples() {
        let s = TimingStats::of(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(s.count, 4);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.p99, 4.0);
        assert_eq!(s.max, 4.0);
        assert_eq!(TimingStats::of(&[]).count, 0);
    }
}
