//! Scenario runner, benchmark and plot-data export behind the `pacs` binary.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use pacs_core::bench::{bench_shield, BenchReport};
use pacs_core::sim::{
    ground_truth_check, read_trace, run_suite_with, trace_to_string, Aggregate, FilterKind, Mode, RolloutReport,
    RolloutTrace, ScenarioConfig,
};
use pacs_core::{JointVector, RobotModel};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const TRACE_DIR: &str = "traces";
pub const PLOTDATA_FILE: &str = "plotdata.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] pacs_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{rollouts} rollout(s) violated the safety specification")]
    Unsafe { rollouts: usize },
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Unsafe { .. } => 1,
            CliError::Io { .. } | CliError::Core(pacs_core::Error::Io(_)) => 3,
            CliError::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// What to write besides the metrics table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmitFlags {
    /// One NDJSON trace per rollout under `traces/`.
    pub trace: bool,
    /// `plotdata.csv` over all rollouts.
    pub plotdata: bool,
    /// Fail with exit status 1 when any rollout violates its safety specification.
    pub assert_safe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub scenarios: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub reps: usize,
    pub seed_base: u64,
    /// Replaces the filter of every scenario.
    pub filter: Option<FilterKind>,
    pub emit: EmitFlags,
}

/// Outcome of a completed run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rollouts: Vec<RolloutReport>,
    pub aggregates: Vec<Aggregate>,
    /// Ground-truth violating ticks of each rollout, in rollout order.
    pub violations: Vec<usize>,
}

impl RunSummary {
    pub fn unsafe_rollouts(&self) -> usize {
        self.violations.iter().filter(|&&v| v > 0).count()
    }
}

fn trace_name(cfg: &ScenarioConfig) -> String {
    format!("{}-{}-{}.ndjson", cfg.name, cfg.filter, cfg.seed)
}

/// Runs every scenario `reps` times and writes `metrics.jsonl` (one rollout
/// record per rollout, then one aggregate record per scenario) plus the
/// requested extras into `out_dir`.
pub fn cmd_run(manifest: &RunManifest) -> Result<RunSummary> {
    if manifest.scenarios.is_empty() || manifest.reps == 0 {
        return Err(pacs_core::Error::Config("run needs at least one scenario and one repetition".into()).into());
    }
    let mut cfgs = Vec::with_capacity(manifest.scenarios.len());
    let mut models = Vec::with_capacity(manifest.scenarios.len());
    for path in &manifest.scenarios {
        let mut cfg = ScenarioConfig::load(path)?;
        if let Some(f) = manifest.filter {
            cfg.filter = f;
        }
        models.push(cfg.robot_model()?);
        cfgs.push(cfg);
    }
    let out = &manifest.out_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let trace_dir = out.join(TRACE_DIR);
    if manifest.emit.trace {
        fs::create_dir_all(&trace_dir).map_err(io_err(&trace_dir))?;
    }

    let results = run_suite_with(&cfgs, manifest.reps, manifest.seed_base, |cfg, trace, metrics| -> Result<_> {
        let i = cfgs.iter().position(|c| c.name == cfg.name && c.filter == cfg.filter).unwrap_or(0);
        let violations = ground_truth_check(trace, &cfg.safety, &models[i])?.len();
        if manifest.emit.trace {
            let path = trace_dir.join(trace_name(cfg));
            fs::write(&path, trace_to_string(trace)?).map_err(io_err(&path))?;
        }
        let rows = if manifest.emit.plotdata { plot_rows(trace, &models[i])? } else { Vec::new() };
        let report = RolloutReport { scenario: cfg.name.clone(), filter: cfg.filter, seed: cfg.seed, metrics: metrics.clone() };
        Ok((report, violations, rows))
    })?;

    let mut rollouts = Vec::with_capacity(results.len());
    let mut violations = Vec::with_capacity(results.len());
    let mut plot = Vec::new();
    for r in results {
        let (report, v, rows) = r?;
        rollouts.push(report);
        violations.push(v);
        plot.extend(rows);
    }
    let aggregates: Vec<Aggregate> = rollouts
        .chunks(manifest.reps)
        .map(|group| {
            let ms: Vec<_> = group.iter().map(|r| &r.metrics).collect();
            Aggregate::of(&group[0].scenario, group[0].filter, &ms)
        })
        .collect();

    let path = out.join(METRICS_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    let line = |w: &mut BufWriter<File>, v: serde_json::Value| writeln!(w, "{v}").map_err(io_err(&path));
    for (r, v) in rollouts.iter().zip(&violations) {
        line(&mut w, json!({ "type": "rollout", "ground_truth_violations": v, "rollout": r }))?;
    }
    for a in &aggregates {
        line(&mut w, json!({ "type": "aggregate", "aggregate": a }))?;
    }
    w.flush().map_err(io_err(&path))?;

    if manifest.emit.plotdata {
        let dof = plot.iter().map(|r| r.q.len()).max().unwrap_or(0);
        let path = out.join(PLOTDATA_FILE);
        write_plot(File::create(&path).map_err(io_err(&path))?, &plot, dof)?;
    }

    let summary = RunSummary { rollouts, aggregates, violations };
    if manifest.emit.assert_safe && summary.unsafe_rollouts() > 0 {
        return Err(CliError::Unsafe { rollouts: summary.unsafe_rollouts() });
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchManifest {
    pub scenario: PathBuf,
    pub iters: usize,
}

/// Times the shield step and trajectory construction of a scenario.
pub fn cmd_bench(manifest: &BenchManifest) -> Result<BenchReport> {
    let cfg = ScenarioConfig::load(&manifest.scenario)?;
    Ok(bench_shield(&cfg, manifest.iters)?)
}

/// One row of the plot-data table.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub scenario: String,
    pub filter: FilterKind,
    pub seed: u64,
    pub tick: usize,
    pub time: f64,
    pub q: Vec<f64>,
    pub ee: [f64; 3],
    /// End-effector speed (m/s).
    pub speed: f64,
    pub phase: Mode,
    pub min_distance: Option<f64>,
    pub path_deviation: f64,
}

/// Step of the central difference along the joint velocity (s).
const SPEED_STEP: f64 = 1e-6;

/// Plot rows of one trace, with end-effector quantities from `model`.
pub fn plot_rows(trace: &RolloutTrace, model: &RobotModel) -> Result<Vec<PlotRow>> {
    let h = &trace.header;
    let mut rows = Vec::with_capacity(trace.ticks.len());
    for t in &trace.ticks {
        let q = JointVector::new(t.q.clone())?;
        let dq = JointVector::new(t.dq.clone())?;
        let ee = model.end_effector_position(&q)?;
        let ahead = model.end_effector_position(&q.add(&dq.scale(SPEED_STEP)))?;
        let behind = model.end_effector_position(&q.sub(&dq.scale(SPEED_STEP)))?;
        rows.push(PlotRow {
            scenario: h.scenario.clone(),
            filter: h.filter,
            seed: h.seed,
            tick: t.tick,
            time: t.time,
            q: t.q.clone(),
            ee: [ee.x, ee.y, ee.z],
            speed: (ahead - behind).norm() / (2.0 * SPEED_STEP),
            phase: t.mode,
            min_distance: t.min_distance,
            path_deviation: t.path_deviation,
        });
    }
    Ok(rows)
}

fn phase_name(m: Mode) -> &'static str {
    match m {
        Mode::Nominal => "nominal",
        Mode::Failsafe => "failsafe",
        Mode::Corrected => "corrected",
        Mode::Emergency => "emergency",
    }
}

/// Writes `rows` as CSV with `dof` joint columns; shorter rows are padded with blanks.
pub fn write_plot<W: Write>(out: W, rows: &[PlotRow], dof: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["scenario", "filter", "seed", "tick", "time"].iter().map(|s| s.to_string()).collect();
    header.extend((0..dof).map(|j| format!("q{j}")));
    header.extend(["ee_x", "ee_y", "ee_z", "speed", "phase", "min_distance", "path_deviation"].iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.scenario.clone(), r.filter.to_string(), r.seed.to_string(), r.tick.to_string(), r.time.to_string()];
        rec.extend((0..dof).map(|j| r.q.get(j).map_or(String::new(), |v| v.to_string())));
        rec.extend(r.ee.iter().map(|v| v.to_string()));
        rec.push(r.speed.to_string());
        rec.push(phase_name(r.phase).to_string());
        rec.push(r.min_distance.map_or(String::new(), |d| d.to_string()));
        rec.push(r.path_deviation.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

/// Exports the given trace files as one CSV table at `out`.
pub fn cmd_plotdata(traces: &[PathBuf], out: &Path) -> Result<usize> {
    let mut rows = Vec::new();
    for path in traces {
        let file = File::open(path).map_err(io_err(path))?;
        let trace = read_trace(BufReader::new(file)).map_err(|e| match e {
            pacs_core::Error::MalformedRecord { line, reason } => {
                pacs_core::Error::MalformedRecord { line, reason: format!("{}: {reason}", path.display()) }
            }
            other => other,
        })?;
        let model = RobotModel::from_description(trace.header.robot.clone())?;
        rows.extend(plot_rows(&trace, &model)?);
    }
    let dof = rows.iter().map(|r| r.q.len()).max().unwrap_or(0);
    write_plot(File::create(out).map_err(io_err(out))?, &rows, dof)?;
    Ok(rows.len())
}
