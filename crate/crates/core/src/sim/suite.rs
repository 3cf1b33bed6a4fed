use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rollout::{run_rollout, Metrics};
use super::scenario::{FilterKind, ScenarioConfig};
use super::trace::RolloutTrace;
use crate::error::{Error, Result};

/// Runs every config with seeds `seed_base .. seed_base + reps` in parallel
/// and maps each finished rollout through `f`. Results are ordered by config,
/// then seed.
pub fn run_suite_with<T, F>(cfgs: &[ScenarioConfig], reps: usize, seed_base: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&ScenarioConfig, &RolloutTrace, &Metrics) -> T + Sync,
{
    if cfgs.is_empty() {
        return Err(Error::Config("suite needs at least one scenario".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..cfgs.len()).flat_map(|i| (0..reps as u64).map(move |r| (i, seed_base + r))).collect();
    jobs.par_iter()
        .map(|&(i, seed)| {
            let cfg = ScenarioConfig { seed, ..cfgs[i].clone() };
            let (trace, metrics) = run_rollout(&cfg)?;
            Ok(f(&cfg, &trace, &metrics))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
}

impl MetricStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub scenario: String,
    pub filter: FilterKind,
    pub seed: u64,
    pub metrics: Metrics,
}

/// Mean and standard deviation over the rollouts of one config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub filter: FilterKind,
    pub rollouts: usize,
    pub success: MetricStats,
    pub safe_success: MetricStats,
    pub safety_violation_fraction: MetricStats,
    pub duration: MetricStats,
    pub max_path_deviation: MetricStats,
    pub step_time_mean: MetricStats,
    pub step_time_median: MetricStats,
    pub step_time_max: MetricStats,
}

impl Aggregate {
    pub fn of(scenario: &str, filter: FilterKind, metrics: &[&Metrics]) -> Self {
        let stat = |f: fn(&Metrics) -> f64| MetricStats::of(&metrics.iter().map(|m| f(m)).collect::<Vec<_>>());
        Self {
            scenario: scenario.to_string(),
            filter,
            rollouts: metrics.len(),
            success: stat(|m| m.success as u8 as f64),
            safe_success: stat(|m| m.safe_success as u8 as f64),
            safety_violation_fraction: stat(|m| m.safety_violation_fraction),
            duration: stat(|m| m.duration),
            max_path_deviation: stat(|m| m.max_path_deviation),
            step_time_mean: stat(|m| m.step_time_mean),
            step_time_median: stat(|m| m.step_time_median),
            step_time_max: stat(|m| m.step_time_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rollouts: Vec<RolloutReport>,
    pub aggregates: Vec<Aggregate>,
}

/// Runs the suite and aggregates per config.
pub fn run_suite(cfgs: &[ScenarioConfig], reps: usize, seed_base: u64) -> Result<SuiteReport> {
    let rollouts = run_suite_with(cfgs, reps, seed_base, |cfg, _, m| RolloutReport {
        scenario: cfg.name.clone(),
        filter: cfg.filter,
        seed: cfg.seed,
        metrics: m.clone(),
    })?;
    let aggregates = rollouts
        .chunks(reps.max(1))
        .map(|group| {
            let ms: Vec<&Metrics> = group.iter().map(|r| &r.metrics).collect();
            Aggregate::of(&group[0].scenario, group[0].filter, &ms)
        })
        .collect();
    Ok(SuiteReport { rollouts, aggregates })
}
