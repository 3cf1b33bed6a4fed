//! Action chunks of delta joint positions, their integration into waypoint
//! paths, and the chunk sources standing in for a learned policy.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JointState, JointVector, KinematicLimits};

/// H consecutive delta-joint actions sampled at period `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    pub deltas: Vec<JointVector>,
    pub dt: f64,
    pub issued_at: f64,
}

impl ActionChunk {
    pub fn new(deltas: Vec<JointVector>, dt: f64, issued_at: f64) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::Config("action chunk must hold at least one action".into()));
        }
        if !(dt > 0.0) || !issued_at.is_finite() {
            return Err(Error::Config("chunk dt must be positive".into()));
        }
        let n = deltas[0].len();
        for d in &deltas {
            d.check_len(n)?;
        }
        Ok(Self { deltas, dt, issued_at })
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// The `i`-th action as a one-action chunk issued `i·dt` after this one.
    pub fn single_action(&self, i: usize) -> ActionChunk {
        ActionChunk { deltas: vec![self.deltas[i].clone()], dt: self.dt, issued_at: self.issued_at + i as f64 * self.dt }
    }
}

/// Desired path q̂_0 … q̂_h of one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    waypoints: Vec<JointVector>,
    source_chunk_time: f64,
    clamped: bool,
}

impl WaypointPath {
    pub fn new(waypoints: Vec<JointVector>, source_chunk_time: f64) -> Self {
        Self { waypoints, source_chunk_time, clamped: false }
    }

    pub fn waypoints(&self) -> &[JointVector] {
        &self.waypoints
    }

    pub fn source_chunk_time(&self) -> f64 {
        self.source_chunk_time
    }

    /// True if any waypoint had to be clamped into the joint limits.
    pub fn clamped(&self) -> bool {
        self.clamped
    }
}

/// Integrates the first `h` deltas from `q0`: q̂_k = q0 + Σ_{i<k} Δq̂_i,
/// clamped into the position limits.
pub fn integrate_chunk(q0: &JointVector, chunk: &ActionChunk, h: usize, limits: &KinematicLimits) -> Result<WaypointPath> {
    if h == 0 || h > chunk.len() {
        return Err(Error::ExecStepsOutOfRange { h, chunk_len: chunk.len() });
    }
    let n = q0.len();
    limits.q_min.check_len(n)?;
    let mut waypoints = Vec::with_capacity(h + 1);
    let mut acc = q0.as_slice().to_vec();
    waypoints.push(q0.clone());
    let mut clamped = false;
    for d in &chunk.deltas[..h] {
        d.check_len(n)?;
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("chunk delta"));
        }
        for (a, v) in acc.iter_mut().zip(d.iter()) {
            *a += v;
        }
        let mut w = acc.clone();
        clamped |= limits.clamp(&mut w);
        waypoints.push(JointVector::from_vec_unchecked(w));
    }
    Ok(WaypointPath { waypoints, source_chunk_time: chunk.issued_at, clamped })
}

/// Produces one action chunk per policy step.
pub trait ChunkSource {
    fn next_chunk(&mut self, t: f64, state: &JointState) -> Result<ActionChunk>;
    fn chunk_len(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub chunk_len: usize,
    pub dt: f64,
    /// Maximum Euclidean norm of one delta (rad).
    pub step_cap: f64,
    /// A goal counts as reached within this max-norm distance (rad).
    pub goal_tol: f64,
    /// Half-width of the uniform per-joint perturbation added to every delta (rad).
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Steers straight toward a sequence of goals with capped steps.
#[derive(Debug, Clone)]
pub struct ScriptedPlanner {
    goals: Vec<JointVector>,
    params: PlannerParams,
    active: usize,
    rng: ChaCha8Rng,
}

impl ScriptedPlanner {
    pub fn new(goals: Vec<JointVector>, params: PlannerParams) -> Result<Self> {
        if goals.is_empty() {
            return Err(Error::NoGoals);
        }
        if params.chunk_len == 0 || !(params.step_cap > 0.0) || !(params.dt > 0.0) || params.goal_tol < 0.0 {
            return Err(Error::Config("planner needs chunk_len >= 1, step_cap > 0, dt > 0".into()));
        }
        let rng = ChaCha8Rng::seed_from_u64(params.seed);
        Ok(Self { goals, params, active: 0, rng })
    }

    pub fn active_goal(&self) -> usize {
        self.active
    }

    pub fn goals(&self) -> &[JointVector] {
        &self.goals
    }

    /// Chunk steering from `state` toward the active goal.
    pub fn plan(&mut self, t: f64, state: &JointState) -> Result<ActionChunk> {
        let q = &state.q;
        let n = q.len();
        for g in &self.goals {
            g.check_len(n)?;
        }
        while self.active + 1 < self.goals.len() && self.goals[self.active].sub(q).norm_inf() <= self.params.goal_tol {
            self.active += 1;
        }
        let goal = &self.goals[self.active];
        let mut virt = q.as_slice().to_vec();
        let mut deltas = Vec::with_capacity(self.params.chunk_len);
        for _ in 0..self.params.chunk_len {
            let mut d: Vec<f64> = goal.iter().zip(&virt).map(|(g, v)| g - v).collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > self.params.step_cap {
                d.iter_mut().for_each(|x| *x *= self.params.step_cap / norm);
            }
            if self.params.perturbation > 0.0 && norm > 0.0 {
                let p = self.params.perturbation;
                d.iter_mut().for_each(|x| *x += self.rng.random_range(-p..=p));
                let pn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                if pn > self.params.step_cap {
                    d.iter_mut().for_each(|x| *x *= self.params.step_cap / pn);
                }
            }
            virt.iter_mut().zip(&d).for_each(|(v, x)| *v += x);
            deltas.push(JointVector::new(d)?);
        }
        ActionChunk::new(deltas, self.params.dt, t)
    }
}

impl ChunkSource for ScriptedPlanner {
    fn next_chunk(&mut self, t: f64, state: &JointState) -> Result<ActionChunk> {
        self.plan(t, state)
    }

    fn chunk_len(&self) -> usize {
        self.params.chunk_len
    }
}

/// Header line of a chunk recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkFileHeader {
    pub format: String,
    pub version: u32,
    pub n_joints: usize,
    pub chunk_len: usize,
    pub dt: f64,
}

pub const CHUNK_FORMAT: &str = "pacs-chunks";

#[derive(Serialize, Deserialize)]
struct ChunkRecord {
    issued_at: f64,
    deltas: Vec<Vec<f64>>,
}

/// Writes chunks as newline-delimited JSON after a header line.
pub struct ChunkWriter<W: Write> {
    out: W,
    header: ChunkFileHeader,
}

impl<W: Write> ChunkWriter<W> {
    pub fn new(mut out: W, n_joints: usize, chunk_len: usize, dt: f64) -> Result<Self> {
        let header = ChunkFileHeader { format: CHUNK_FORMAT.into(), version: 1, n_joints, chunk_len, dt };
        let line = serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out, "{line}")?;
        Ok(Self { out, header })
    }

    pub fn write(&mut self, chunk: &ActionChunk) -> Result<()> {
        if chunk.len() != self.header.chunk_len {
            return Err(Error::Config(format!("chunk length {} != {}", chunk.len(), self.header.chunk_len)));
        }
        let rec = ChunkRecord { issued_at: chunk.issued_at, deltas: chunk.deltas.iter().map(|d| d.to_vec()).collect() };
        let line = serde_json::to_string(&rec).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads a chunk recording in write order.
pub struct ChunkReader<R: BufRead> {
    input: R,
    header: ChunkFileHeader,
    line_no: usize,
}

impl<R: BufRead> ChunkReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::MalformedRecord { line: 1, reason: "missing header".into() });
        }
        let header: ChunkFileHeader =
            serde_json::from_str(line.trim()).map_err(|e| Error::MalformedRecord { line: 1, reason: e.to_string() })?;
        if header.format != CHUNK_FORMAT {
            return Err(Error::MalformedRecord { line: 1, reason: format!("unexpected format {:?}", header.format) });
        }
        Ok(Self { input, header, line_no: 1 })
    }

    pub fn header(&self) -> &ChunkFileHeader {
        &self.header
    }

    /// Next recorded chunk, or [`Error::EndOfRecording`].
    pub fn next_chunk(&mut self) -> Result<ActionChunk> {
        let mut line = String::new();
        loop {
            line.clear();
            self.line_no += 1;
            if self.input.read_line(&mut line)? == 0 {
                return Err(Error::EndOfRecording);
            }
            if !line.trim().is_empty() {
                break;
            }
        }
        let bad = |reason: String| Error::MalformedRecord { line: self.line_no, reason };
        let rec: ChunkRecord = serde_json::from_str(line.trim()).map_err(|e| bad(e.to_string()))?;
        if rec.deltas.len() != self.header.chunk_len {
            return Err(bad(format!("expected {} deltas, got {}", self.header.chunk_len, rec.deltas.len())));
        }
        let deltas = rec
            .deltas
            .into_iter()
            .map(|d| {
                if d.len() != self.header.n_joints {
                    return Err(bad(format!("expected {} joints", self.header.n_joints)));
                }
                JointVector::new(d).map_err(|e| bad(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        ActionChunk::new(deltas, self.header.dt, rec.issued_at).map_err(|e| bad(e.to_string()))
    }
}

/// Chunk source replaying a recording verbatim.
pub struct ReplaySource<R: BufRead> {
    reader: ChunkReader<R>,
}

impl<R: BufRead> ReplaySource<R> {
    pub fn new(reader: ChunkReader<R>) -> Self {
        Self { reader }
    }
}

impl<R: BufRead> ChunkSource for ReplaySource<R> {
    fn next_chunk(&mut self, _t: f64, _state: &JointState) -> Result<ActionChunk> {
        self.reader.next_chunk()
    }

    fn chunk_len(&self) -> usize {
        self.reader.header().chunk_len
    }
}
