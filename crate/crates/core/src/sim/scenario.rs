use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::CbfParams;
use crate::error::{Error, Result};
use crate::model::{RobotDescription, RobotModel};
use crate::robots;
use crate::shield::{steps_per_chunk, SafetySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    /// Shielded chunk execution.
    Pacs,
    /// Shielded execution replanning after every single action.
    PacsSingle,
    /// Reactive control-barrier-function filter tracking the intended trajectory.
    Cbf,
    /// Unshielded intended trajectories.
    Off,
}

impl FilterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterKind::Pacs => "pacs",
            FilterKind::PacsSingle => "pacs-single",
            FilterKind::Cbf => "cbf",
            FilterKind::Off => "off",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pacs" => Ok(FilterKind::Pacs),
            "pacs-single" => Ok(FilterKind::PacsSingle),
            "cbf" => Ok(FilterKind::Cbf),
            "off" => Ok(FilterKind::Off),
            other => Err(Error::Config(format!("unknown filter {other:?}"))),
        }
    }
}

/// Where the robot description comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RobotRef {
    Builtin { builtin: String },
    File { file: PathBuf },
    Inline(RobotDescription),
}

impl RobotRef {
    pub fn description(&self) -> Result<RobotDescription> {
        match self {
            RobotRef::Builtin { builtin } => robots::builtin(builtin).ok_or_else(|| {
                Error::Config(format!("unknown builtin robot {builtin:?} (known: {:?})", robots::BUILTIN_NAMES))
            }),
            RobotRef::File { file } => {
                let text = std::fs::read_to_string(file).map_err(|e| Error::Io(format!("{}: {e}", file.display())))?;
                toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", file.display())))
            }
            RobotRef::Inline(d) => Ok(d.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Actions per chunk, H.
    pub chunk_len: usize,
    /// Actions executed per chunk, h.
    pub exec_steps: usize,
    /// Policy sampling time Δt (s).
    pub dt: f64,
    /// Safety step α_s (s).
    pub alpha_s: f64,
}

impl Timing {
    pub fn steps_per_chunk(&self) -> Result<usize> {
        steps_per_chunk(self.exec_steps, self.dt, self.alpha_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    /// Initial configuration (rad), at rest.
    pub start: Vec<f64>,
    /// Goals to visit in order (rad).
    pub goals: Vec<Vec<f64>>,
    /// Max-norm reach tolerance (rad).
    pub goal_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Scripted {
        /// Largest Euclidean norm of one action (rad).
        step_cap: f64,
        #[serde(default)]
        perturbation: f64,
    },
    Replay {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pattern {
    Static { center: [f64; 3] },
    /// Back and forth between `a` and `b`.
    LinearPatrol { a: [f64; 3], b: [f64; 3] },
    /// Horizontal circle.
    Circle { center: [f64; 3], radius: f64 },
    /// Heads for the nearest robot capsule at the declared maximum speed.
    AdversarialChase { start: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleScript {
    pub pattern: Pattern,
    /// Ball radius (m).
    pub shape_radius: f64,
    /// Realized speed (m/s); the chase pattern always moves at `v_max`.
    #[serde(default)]
    pub speed: f64,
    /// Declared speed bound given to the shield (m/s).
    pub v_max: f64,
    /// Declared measurement error bound (m).
    #[serde(default)]
    pub meas_error: f64,
    /// Seeded horizontal offset of the whole pattern, up to this distance (m).
    #[serde(default)]
    pub jitter: f64,
    /// Seeded start phase for periodic patterns.
    #[serde(default = "default_true")]
    pub random_phase: bool,
}

fn default_true() -> bool {
    true
}

impl ObstacleScript {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [("shape_radius", self.shape_radius), ("speed", self.speed), ("v_max", self.v_max), ("meas_error", self.meas_error), ("jitter", self.jitter)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("obstacle {name} must be finite and >= 0"));
            }
        }
        if self.speed > self.v_max {
            return bad(format!("obstacle speed {} exceeds declared v_max {}", self.speed, self.v_max));
        }
        match &self.pattern {
            Pattern::Circle { radius, .. } if !(*radius > 0.0) => bad("circle radius must be > 0".into()),
            _ => Ok(()),
        }
    }
}

/// One simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Rollout horizon (s).
    pub horizon: f64,
    pub filter: FilterKind,
    /// Perturb the executed joints within the model's tracking error.
    #[serde(default)]
    pub disturbance: bool,
    pub robot: RobotRef,
    pub timing: Timing,
    pub safety: SafetySpec,
    pub task: Task,
    pub source: SourceSpec,
    #[serde(default)]
    pub cbf: CbfParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleScript>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Loads and validates a scenario file. Relative robot and replay paths
    /// are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if let RobotRef::File { file } = &mut cfg.robot {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        if let SourceSpec::Replay { path } = &mut cfg.source {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn robot_model(&self) -> Result<RobotModel> {
        RobotModel::from_description(self.robot.description()?)
    }

    /// Checks everything that does not need the robot description.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad("horizon must be positive".into());
        }
        let t = &self.timing;
        if t.chunk_len == 0 || t.exec_steps == 0 || t.exec_steps > t.chunk_len {
            return Err(Error::ExecStepsOutOfRange { h: t.exec_steps, chunk_len: t.chunk_len });
        }
        t.steps_per_chunk()?;
        self.safety.validate()?;
        self.cbf.validate()?;
        if self.task.goals.is_empty() {
            return Err(Error::NoGoals);
        }
        if !(self.task.goal_tol >= 0.0) {
            return bad("goal_tol must be >= 0".into());
        }
        let n = self.task.start.len();
        if self.task.goals.iter().any(|g| g.len() != n) {
            return bad("goals and start must have the same length".into());
        }
        if let SourceSpec::Scripted { step_cap, perturbation } = &self.source {
            if !(*step_cap > 0.0) || !(*perturbation >= 0.0) {
                return bad("step_cap must be > 0 and perturbation >= 0".into());
            }
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        Ok(())
    }
}
