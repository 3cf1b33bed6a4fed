//! Rollout traces and their newline-delimited JSON form.
//!
//! A trace file starts with a header record, followed by chunk and tick
//! records in execution order, and ends with a single end record. Wall-clock
//! timings are not part of the file so that equal rollouts give equal bytes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::scenario::FilterKind;
use crate::error::{Error, Result};
use crate::model::RobotDescription;
use crate::shield::SafetySpec;

pub const TRACE_FORMAT: &str = "pacs-trace";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub filter: FilterKind,
    pub seed: u64,
    pub alpha_s: f64,
    pub robot: RobotDescription,
    pub safety: SafetySpec,
    pub obstacle_radii: Vec<f64>,
    pub goals: Vec<Vec<f64>>,
    pub goal_tol: f64,
}

/// What the executor did during a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Following the intended trajectory.
    Nominal,
    /// Braking or stopped on the last verified failsafe.
    Failsafe,
    /// Velocity modified by the barrier filter.
    Corrected,
    /// Barrier filter emergency stop.
    Emergency,
}

/// One safety step: state at `time`, reached by the command issued at `time - α_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub time: f64,
    /// Executed configuration (rad), including any tracking disturbance.
    pub q: Vec<f64>,
    /// Executed velocity (rad/s).
    pub dq: Vec<f64>,
    /// Commanded configuration (rad).
    pub command: Vec<f64>,
    pub obstacles: Vec<[f64; 3]>,
    pub mode: Mode,
    /// Shield verdict of the step, for shielded filters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified: Option<bool>,
    #[serde(default)]
    pub stalled: bool,
    /// Smallest signed robot-obstacle distance (m); absent without obstacles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<f64>,
    pub kinetic_energy: f64,
    /// Distance of the command to the recent intended paths (rad).
    pub path_deviation: f64,
    pub violation: bool,
}

/// A chunk drawn from the source and how its trajectory was handled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkEvent {
    pub tick: usize,
    pub issued_at: f64,
    pub deltas: Vec<Vec<f64>>,
    /// Some waypoint was clamped into the joint limits.
    pub clamped: bool,
    /// Trajectories built from this chunk (one, or h in single-action mode).
    pub trajectories: usize,
    /// Trajectories not accepted as a continuation, with reasons.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// All goals visited; checked at chunk boundaries.
    Success,
    Horizon,
    EndOfRecording,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace {
    pub header: TraceHeader,
    pub chunks: Vec<ChunkEvent>,
    pub ticks: Vec<TickRecord>,
    pub termination: Termination,
    /// Wall-clock time of each executor step (s); not serialized.
    pub step_times: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header(TraceHeader),
    Chunk(ChunkEvent),
    Tick(TickRecord),
    End { termination: Termination, ticks: usize },
}

fn encode(line: &Line) -> Result<String> {
    serde_json::to_string(line).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes `trace` as NDJSON, chunk records placed before the tick they start at.
pub fn write_trace<W: Write>(trace: &RolloutTrace, mut out: W) -> Result<()> {
    writeln!(out, "{}", encode(&Line::Header(trace.header.clone()))?)?;
    let mut chunks = trace.chunks.iter().peekable();
    for tick in &trace.ticks {
        while let Some(c) = chunks.next_if(|c| c.tick < tick.tick) {
            writeln!(out, "{}", encode(&Line::Chunk(c.clone()))?)?;
        }
        writeln!(out, "{}", encode(&Line::Tick(tick.clone()))?)?;
    }
    for c in chunks {
        writeln!(out, "{}", encode(&Line::Chunk(c.clone()))?)?;
    }
    writeln!(out, "{}", encode(&Line::End { termination: trace.termination, ticks: trace.ticks.len() })?)?;
    out.flush()?;
    Ok(())
}

pub fn trace_to_string(trace: &RolloutTrace) -> Result<String> {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_trace<R: BufRead>(input: R) -> Result<RolloutTrace> {
    let mut header = None;
    let mut chunks = Vec::new();
    let mut ticks = Vec::new();
    let mut termination = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::MalformedRecord { line: i + 1, reason };
        let rec: Line = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        match rec {
            Line::Header(h) => {
                if header.is_some() || i != 0 {
                    return Err(bad("header must be the first record".into()));
                }
                if h.format != TRACE_FORMAT {
                    return Err(bad(format!("unexpected format {:?}", h.format)));
                }
                header = Some(h);
            }
            _ if header.is_none() => return Err(bad("missing header".into())),
            Line::Chunk(c) => chunks.push(c),
            Line::Tick(t) => {
                if t.tick != ticks.len() + 1 {
                    return Err(bad(format!("tick {} out of order", t.tick)));
                }
                ticks.push(t);
            }
            Line::End { termination: term, ticks: n } => {
                if n != ticks.len() {
                    return Err(bad(format!("end record announces {n} ticks, found {}", ticks.len())));
                }
                termination = Some(term);
            }
        }
    }
    let header = header.ok_or(Error::MalformedRecord { line: 1, reason: "empty trace".into() })?;
    let termination = termination.ok_or(Error::MalformedRecord { line: ticks.len() + 2, reason: "missing end record".into() })?;
    Ok(RolloutTrace { header, chunks, ticks, termination, step_times: Vec::new() })
}
