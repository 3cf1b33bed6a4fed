//! The rollout loop: chunks every `h·Δt`, one executor step every `α_s`,
//! ground-truth safety evaluation on every tick.

use std::collections::VecDeque;
use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::obstacles::ObstacleWorld;
use super::scenario::{FilterKind, ScenarioConfig, SourceSpec};
use super::trace::{ChunkEvent, Mode, RolloutTrace, Termination, TickRecord, TraceHeader, TRACE_FORMAT};
use crate::baseline::{cbf_filter_step, tracking_velocity};
use crate::chunk::{integrate_chunk, ActionChunk, ChunkReader, ChunkSource, PlannerParams, ReplaySource, ScriptedPlanner};
use crate::error::{Error, Result};
use crate::model::{Capsule, JointState, JointVector, RobotDescription, RobotModel};
use crate::otg::{build_path, GeometricPath, IntendedTrajectory};
use crate::reach::{distance, Ball};
use crate::shield::{check_handoff, Phase, SafetySpec, ShieldState};

/// Recently followed paths kept for the path-deviation measure.
pub const DEVIATION_HISTORY: usize = 8;

/// Summary of one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub success: bool,
    pub safe_success: bool,
    pub safety_violation_fraction: f64,
    pub violation_ticks: usize,
    pub ticks: usize,
    /// Executed time, ticks × α_s (s).
    pub duration: f64,
    pub max_path_deviation: f64,
    /// Smallest ground-truth robot-obstacle distance (m); absent without obstacles.
    pub min_distance: Option<f64>,
    pub failsafe_ticks: usize,
    pub stalled_ticks: usize,
    pub rejected_handoffs: usize,
    pub clamped_chunks: usize,
    pub step_time_mean: f64,
    pub step_time_median: f64,
    pub step_time_max: f64,
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

impl Metrics {
    pub fn from_trace(trace: &RolloutTrace) -> Self {
        let ticks = trace.ticks.len();
        let violation_ticks = trace.ticks.iter().filter(|t| t.violation).count();
        let success = trace.termination == Termination::Success;
        let st = &trace.step_times;
        let min_distance = trace.ticks.iter().filter_map(|t| t.min_distance).reduce(f64::min);
        Self {
            success,
            safe_success: success && violation_ticks == 0,
            safety_violation_fraction: if ticks == 0 { 0.0 } else { violation_ticks as f64 / ticks as f64 },
            violation_ticks,
            ticks,
            duration: ticks as f64 * trace.header.alpha_s,
            max_path_deviation: trace.ticks.iter().map(|t| t.path_deviation).fold(0.0, f64::max),
            min_distance,
            failsafe_ticks: trace.ticks.iter().filter(|t| t.mode == Mode::Failsafe).count(),
            stalled_ticks: trace.ticks.iter().filter(|t| t.stalled).count(),
            rejected_handoffs: trace.chunks.iter().map(|c| c.rejected.len()).sum(),
            clamped_chunks: trace.chunks.iter().filter(|c| c.clamped).count(),
            step_time_mean: if st.is_empty() { 0.0 } else { st.iter().sum::<f64>() / st.len() as f64 },
            step_time_median: median(st),
            step_time_max: st.iter().cloned().fold(0.0, f64::max),
        }
    }
}

/// Ticks at which the ground truth violates the safety specification:
/// a robot capsule touches an obstacle while the kinetic energy exceeds the
/// obstacle's threshold (zero under SSM, so only a moving robot violates it).
pub fn ground_truth_check(trace: &RolloutTrace, spec: &SafetySpec, model: &RobotModel) -> Result<Vec<usize>> {
    let radii = &trace.header.obstacle_radii;
    let mut out = Vec::new();
    for rec in &trace.ticks {
        let q = JointVector::new(rec.q.clone())?;
        let dq = JointVector::new(rec.dq.clone())?;
        let caps = model.forward_kinematics(&q)?;
        let energy = model.kinetic_energy(&q, &dq)?;
        let violated = rec.obstacles.iter().zip(radii).enumerate().any(|(i, (p, r))| {
            let ball = Ball::new(crate::model::Vec3::new(p[0], p[1], p[2]), *r);
            caps.iter().any(|c| distance(c, &ball) <= 0.0) && energy > spec.threshold(i)
        });
        if violated {
            out.push(rec.tick);
        }
    }
    Ok(out)
}

enum Executor {
    Shield(Box<ShieldState>),
    Open { active: IntendedTrajectory },
    Cbf { active: IntendedTrajectory },
}

struct GroundTruth<'a> {
    model: &'a RobotModel,
    frames: Vec<nalgebra::Isometry3<f64>>,
    caps: Vec<Capsule>,
}

impl GroundTruth<'_> {
    fn capsules(&mut self, q: &[f64]) -> &[Capsule] {
        self.model.capsules_into(q, &mut self.frames, &mut self.caps);
        &self.caps
    }
}

fn chunk_source(cfg: &ScenarioConfig, seed: u64) -> Result<Box<dyn ChunkSource>> {
    match &cfg.source {
        SourceSpec::Scripted { step_cap, perturbation } => {
            let goals = cfg.task.goals.iter().map(|g| JointVector::new(g.clone())).collect::<Result<Vec<_>>>()?;
            let params = PlannerParams {
                chunk_len: cfg.timing.chunk_len,
                dt: cfg.timing.dt,
                step_cap: *step_cap,
                goal_tol: cfg.task.goal_tol,
                perturbation: *perturbation,
                seed,
            };
            Ok(Box::new(ScriptedPlanner::new(goals, params)?))
        }
        SourceSpec::Replay { path } => {
            let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let reader = ChunkReader::new(BufReader::new(file))?;
            let h = reader.header();
            if h.chunk_len != cfg.timing.chunk_len || (h.dt - cfg.timing.dt).abs() > 1e-12 {
                return Err(Error::Config("replay file chunk length or dt differs from the scenario timing".into()));
            }
            Ok(Box::new(ReplaySource::new(reader)))
        }
    }
}

/// Intended trajectory through `chunk`'s first `h` actions from `state`.
fn plan_chunk(
    model: &RobotModel,
    state: &JointState,
    chunk: &ActionChunk,
    h: usize,
    t: f64,
    hold_for: f64,
) -> Result<(IntendedTrajectory, bool)> {
    let wp = integrate_chunk(&state.q, chunk, h, model.limits())?;
    match build_path(&wp, model.limits()) {
        Ok(path) => {
            let traj = IntendedTrajectory::plan(Arc::new(path), model.limits(), state, t)?;
            Ok((traj, wp.clamped()))
        }
        Err(Error::DegeneratePath) => Ok((IntendedTrajectory::hold(state.q.clone(), t, hold_for), wp.clamped())),
        Err(e) => Err(e),
    }
}

/// Runs one rollout of `cfg` with its own seed.
pub fn run_rollout(cfg: &ScenarioConfig) -> Result<(RolloutTrace, Metrics)> {
    cfg.validate()?;
    let desc: RobotDescription = cfg.robot.description()?;
    let model = Arc::new(RobotModel::from_description(desc.clone())?);
    let n = model.dof();
    let timing = cfg.timing;
    let alpha = timing.alpha_s;
    let h = timing.exec_steps;
    let steps_chunk = timing.steps_per_chunk()?;
    let steps_action = steps_chunk / h;
    let horizon_ticks = (cfg.horizon / alpha).round() as usize;
    let single = cfg.filter == FilterKind::PacsSingle;

    let start_q = JointVector::new(cfg.task.start.clone())?;
    start_q.check_len(n)?;
    if !model.limits().contains(&start_q) {
        return Err(Error::Config("start configuration outside joint limits".into()));
    }
    let goals = cfg.task.goals.iter().map(|g| JointVector::new(g.clone())).collect::<Result<Vec<_>>>()?;
    for g in &goals {
        g.check_len(n)?;
    }

    let mut source = chunk_source(cfg, cfg.seed)?;
    if source.chunk_len() != timing.chunk_len {
        return Err(Error::Config("chunk source length differs from the scenario timing".into()));
    }
    let mut world = ObstacleWorld::new(&cfg.obstacles, cfg.seed);
    let mut disturbance = ChaCha8Rng::seed_from_u64(cfg.seed);
    disturbance.set_stream(3);
    let joint_disturbance =
        if cfg.disturbance && model.max_lipschitz() > 0.0 { model.tracking_error() / model.max_lipschitz() } else { 0.0 };

    let mut state = JointState::at_rest(start_q.clone());
    let mut executor = match cfg.filter {
        FilterKind::Pacs | FilterKind::PacsSingle => {
            Executor::Shield(Box::new(ShieldState::new(model.clone(), cfg.safety.clone(), alpha, state.clone(), 0.0)?))
        }
        FilterKind::Off => Executor::Open { active: IntendedTrajectory::hold(start_q.clone(), 0.0, 0.0) },
        FilterKind::Cbf => Executor::Cbf { active: IntendedTrajectory::hold(start_q.clone(), 0.0, 0.0) },
    };

    let header = TraceHeader {
        format: TRACE_FORMAT.into(),
        version: 1,
        scenario: cfg.name.clone(),
        filter: cfg.filter,
        seed: cfg.seed,
        alpha_s: alpha,
        robot: desc,
        safety: cfg.safety.clone(),
        obstacle_radii: world.shape_radii(),
        goals: cfg.task.goals.clone(),
        goal_tol: cfg.task.goal_tol,
    };
    let mut gt = GroundTruth { model: &model, frames: Vec::with_capacity(n), caps: Vec::new() };
    let mut ticks: Vec<TickRecord> = Vec::with_capacity(horizon_ticks);
    let mut chunks: Vec<ChunkEvent> = Vec::new();
    let mut step_times = Vec::with_capacity(horizon_ticks);
    let mut paths: VecDeque<Arc<GeometricPath>> = VecDeque::with_capacity(DEVIATION_HISTORY);
    let mut visited = 0usize;
    let mut chunk: Option<ActionChunk> = None;
    let mut termination = Termination::Horizon;
    let mut exec_q = start_q.to_vec();

    'outer: for k in 0..horizon_ticks {
        let t = k as f64 * alpha;
        if k % steps_action == 0 {
            let action = (k / steps_action) % h;
            if k % steps_chunk == 0 {
                if visited == goals.len() {
                    termination = Termination::Success;
                    break 'outer;
                }
                match source.next_chunk(t, &state) {
                    Ok(c) => {
                        chunks.push(ChunkEvent {
                            tick: k,
                            issued_at: c.issued_at,
                            deltas: c.deltas.iter().map(|d| d.to_vec()).collect(),
                            clamped: false,
                            trajectories: 0,
                            rejected: Vec::new(),
                        });
                        chunk = Some(c);
                    }
                    Err(Error::EndOfRecording) => {
                        termination = Termination::EndOfRecording;
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                }
            }
            if single || action == 0 {
                let c = chunk.as_ref().expect("a chunk is drawn at every chunk boundary");
                let (piece, steps, hold_for) = if single {
                    (c.single_action(action), 1, timing.dt)
                } else {
                    (c.clone(), h, h as f64 * timing.dt)
                };
                let ev = chunks.last_mut().expect("chunk event recorded");
                ev.trajectories += 1;
                let planned = match plan_chunk(&model, &state, &piece, steps, t, hold_for) {
                    Ok(x) => Some(x),
                    Err(Error::PathOutsideLimits) => {
                        ev.rejected.push(Error::PathOutsideLimits.to_string());
                        None
                    }
                    Err(e) => return Err(e),
                };
                if let Some((traj, clamped)) = planned {
                    ev.clamped |= clamped;
                    let outcome = match &mut executor {
                        Executor::Shield(shield) => shield.set_trajectory(traj),
                        Executor::Open { active } => check_handoff(&state, &traj).map(|_| *active = traj),
                        Executor::Cbf { active } => {
                            *active = traj;
                            Ok(())
                        }
                    };
                    if let Err(e) = outcome {
                        ev.rejected.push(e.to_string());
                    }
                }
            }
        }

        let t_next = (k + 1) as f64 * alpha;
        let measurements = world.measure()?;
        let mut verified = None;
        let mut stalled = false;
        let clock = Instant::now();
        let (command, mode) = match &mut executor {
            Executor::Shield(shield) => {
                let out = shield.shield_step(&measurements);
                verified = Some(out.verdict.safe);
                stalled = out.stalled;
                let mode = if out.phase == Phase::Intended { Mode::Nominal } else { Mode::Failsafe };
                (out.command, mode)
            }
            Executor::Open { active } => (active.sample(t_next), Mode::Nominal),
            Executor::Cbf { active } => {
                let reference = active.sample(t_next);
                let desired = tracking_velocity(&model, &state.q, &reference, cfg.cbf.tracking_gain);
                let balls: Vec<Ball> =
                    measurements.iter().map(|m| Ball::new(m.measured_center, m.shape_radius + m.meas_error)).collect();
                let out = cbf_filter_step(&model, &state.q, &desired, &balls, &cfg.cbf)?;
                let mut q: Vec<f64> = state.q.iter().zip(out.dq.iter()).map(|(q, v)| q + v * alpha).collect();
                model.limits().clamp(&mut q);
                let dq: Vec<f64> = q.iter().zip(state.q.iter()).map(|(a, b)| (a - b) / alpha).collect();
                let ddq: Vec<f64> = dq.iter().zip(state.dq.iter()).map(|(a, b)| (a - b) / alpha).collect();
                let mode = if out.emergency {
                    Mode::Emergency
                } else if out.active {
                    Mode::Corrected
                } else {
                    Mode::Nominal
                };
                let cmd = JointState {
                    q: JointVector::from_vec_unchecked(q),
                    dq: JointVector::from_vec_unchecked(dq),
                    ddq: JointVector::from_vec_unchecked(ddq),
                    dddq: JointVector::zeros(n),
                };
                (cmd, mode)
            }
        };
        step_times.push(clock.elapsed().as_secs_f64());

        let robot_now = gt.capsules(&exec_q).to_vec();
        world.advance(t_next, &robot_now)?;

        exec_q.clear();
        exec_q.extend_from_slice(&command.q);
        if joint_disturbance > 0.0 {
            for v in exec_q.iter_mut() {
                *v += disturbance.random_range(-joint_disturbance..=joint_disturbance);
            }
        }
        let energy = model.kinetic_energy_unchecked(&exec_q, &command.dq);
        let obstacles = world.positions();
        let caps = gt.capsules(&exec_q);
        let mut min_distance: Option<f64> = None;
        let mut violation = false;
        for (i, (p, r)) in obstacles.iter().zip(world.shape_radii()).enumerate() {
            let ball = Ball::new(*p, r);
            let d = caps.iter().map(|c| distance(c, &ball)).fold(f64::INFINITY, f64::min);
            min_distance = Some(min_distance.map_or(d, |m: f64| m.min(d)));
            if d <= 0.0 && energy > cfg.safety.threshold(i) {
                violation = true;
            }
        }
        while visited < goals.len() && goals[visited].iter().zip(&exec_q).all(|(g, q)| (g - q).abs() <= cfg.task.goal_tol) {
            visited += 1;
        }
        let followed = match &executor {
            Executor::Shield(shield) => shield.active().path(),
            Executor::Open { active } | Executor::Cbf { active } => active.path(),
        };
        if paths.front().is_none_or(|p| !Arc::ptr_eq(p, followed)) {
            if paths.len() == DEVIATION_HISTORY {
                paths.pop_back();
            }
            paths.push_front(followed.clone());
        }
        let mut deviation = f64::INFINITY;
        for p in &paths {
            deviation = deviation.min(p.distance_to(&command.q));
            if deviation < 1e-9 {
                break;
            }
        }
        if !deviation.is_finite() {
            deviation = 0.0;
        }
        ticks.push(TickRecord {
            tick: k + 1,
            time: t_next,
            q: exec_q.clone(),
            dq: command.dq.to_vec(),
            command: command.q.to_vec(),
            obstacles: obstacles.iter().map(|p| [p.x, p.y, p.z]).collect(),
            mode,
            verified,
            stalled,
            min_distance,
            kinetic_energy: energy,
            path_deviation: deviation,
            violation,
        });
        state = command;
    }
    if termination == Termination::Horizon && visited == goals.len() {
        termination = Termination::Success;
    }
    let trace = RolloutTrace { header, chunks, ticks, termination, step_times };
    let metrics = Metrics::from_trace(&trace);
    Ok((trace, metrics))
}
