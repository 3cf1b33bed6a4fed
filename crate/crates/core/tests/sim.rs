use std::path::Path;

use pacs_core::sim::*;
use pacs_core::{JointVector, RobotModel};

fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))).unwrap()
}

#[test]
fn every_shipped_scenario_loads_and_validates() {
    for name in ["minimal", "patrol", "circle", "chase", "interception", "crossing", "multi_goal", "bench"] {
        let cfg = scenario(name);
        assert_eq!(cfg.name, name);
        let model = cfg.robot_model().unwrap();
        assert_eq!(model.dof(), cfg.task.start.len());
    }
}

#[test]
fn scenario_toml_round_trips() {
    for name in ["minimal", "patrol", "bench"] {
        let cfg = scenario(name);
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
}

#[test]
fn minimal_scenario_reaches_its_goal() {
    let (trace, m) = run_rollout(&scenario("minimal")).unwrap();
    assert!(m.success && m.safe_success);
    assert_eq!(trace.termination, Termination::Success);
    assert_eq!(m.failsafe_ticks, 0);
    assert!(m.max_path_deviation < 1e-9);
    let last = trace.ticks.last().unwrap();
    assert!((last.q[0] - 1.0).abs() <= 0.01);
}

#[test]
fn rollouts_are_deterministic_per_seed() {
    let mut cfg = scenario("patrol");
    cfg.horizon = 1.5;
    let a = trace_to_string(&run_rollout(&cfg).unwrap().0).unwrap();
    let b = trace_to_string(&run_rollout(&cfg).unwrap().0).unwrap();
    assert_eq!(a, b);
    cfg.seed = 1;
    let c = trace_to_string(&run_rollout(&cfg).unwrap().0).unwrap();
    assert_ne!(a, c);
}

#[test]
fn traces_round_trip_through_ndjson() {
    let mut cfg = scenario("patrol");
    cfg.horizon = 0.5;
    let (trace, _) = run_rollout(&cfg).unwrap();
    let text = trace_to_string(&trace).unwrap();
    let back = read_trace(text.as_bytes()).unwrap();
    assert_eq!(back.header, trace.header);
    assert_eq!(back.chunks, trace.chunks);
    assert_eq!(back.ticks, trace.ticks);
    assert_eq!(back.termination, trace.termination);
    assert_eq!(trace_to_string(&back).unwrap(), text);
}

#[test]
fn truncated_traces_are_rejected() {
    let mut cfg = scenario("minimal");
    cfg.horizon = 0.05;
    let text = trace_to_string(&run_rollout(&cfg).unwrap().0).unwrap();
    let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
    assert!(read_trace(cut.as_bytes()).is_err());
    assert!(read_trace(&text.as_bytes()[text.find('\n').unwrap() + 1..]).is_err());
}

#[test]
fn ground_truth_flags_only_moving_contact_under_ssm() {
    let cfg = scenario("minimal");
    let model = RobotModel::from_description(pacs_core::robots::planar1()).unwrap();
    let (mut trace, _) = run_rollout(&cfg).unwrap();
    trace.header.obstacle_radii = vec![0.1];
    for rec in trace.ticks.iter_mut() {
        // a ball on the link wherever the arm is
        let q = JointVector::new(rec.q.clone()).unwrap();
        let c = model.forward_kinematics(&q).unwrap()[0];
        let mid = (c.p0 + c.p1) * 0.5;
        rec.obstacles = vec![[mid.x, mid.y, mid.z]];
    }
    let flagged = ground_truth_check(&trace, &cfg.safety, &model).unwrap();
    let moving: Vec<usize> = trace.ticks.iter().filter(|r| r.dq[0] != 0.0).map(|r| r.tick).collect();
    assert!(!moving.is_empty());
    assert_eq!(flagged, moving);
    // generous energy threshold admits all of it
    let lax = pacs_core::shield::SafetySpec::pfl(10.0);
    assert!(ground_truth_check(&trace, &lax, &model).unwrap().is_empty());
}

#[test]
fn noise_free_suite_has_zero_spread() {
    let cfg = scenario("minimal");
    let report = run_suite(&[cfg], 3, 10).unwrap();
    assert_eq!(report.rollouts.len(), 3);
    assert_eq!(report.rollouts.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![10, 11, 12]);
    let agg = &report.aggregates[0];
    assert_eq!(agg.rollouts, 3);
    assert!(agg.duration.std < 1e-12);
    assert!(report.rollouts.windows(2).all(|w| w[0].metrics.duration == w[1].metrics.duration));
    assert_eq!(agg.success.mean, 1.0);
}

#[test]
fn shielded_and_open_commands_agree_without_obstacles() {
    let mut cfg = scenario("minimal");
    let (shielded, _) = run_rollout(&cfg).unwrap();
    cfg.filter = FilterKind::Off;
    let (open, _) = run_rollout(&cfg).unwrap();
    assert_eq!(shielded.ticks.len(), open.ticks.len());
    for (a, b) in shielded.ticks.iter().zip(&open.ticks) {
        for (x, y) in a.command.iter().zip(&b.command) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = scenario("minimal");
    cfg.timing.exec_steps = 9;
    assert!(cfg.validate().is_err());
    let mut cfg = scenario("minimal");
    cfg.timing.alpha_s = 0.003;
    assert!(cfg.validate().is_err());
    let mut cfg = scenario("minimal");
    cfg.task.goals.clear();
    assert!(cfg.validate().is_err());
    assert!(ScenarioConfig::from_toml_str("name = 3").is_err());
}
