use std::sync::Arc;

use proptest::prelude::*;

use pacs_core::chunk::{integrate_chunk, ActionChunk, WaypointPath};
use pacs_core::otg::{
    brake_profile, build_path, consistent_start, time_optimal_profile, IntendedTrajectory, ScalarLimits, ScalarState,
};
use pacs_core::reach::{distance, obstacle_occupancy, ObstacleState, TimeInterval};
use pacs_core::{Capsule, JointState, JointVector, KinematicLimits, Vec3};

fn limits(n: usize) -> KinematicLimits {
    let c = |v: f64| JointVector::new(vec![v; n]).unwrap();
    KinematicLimits::new(c(-2.0), c(2.0), c(2.0), c(10.0), c(400.0)).unwrap()
}

fn scalar_limits() -> impl Strategy<Value = ScalarLimits> {
    (0.2..3.0f64, 1.0..20.0f64, 10.0..800.0f64).prop_map(|(v, a, j)| ScalarLimits::new(v, a, j).unwrap())
}

fn start(l: ScalarLimits) -> impl Strategy<Value = (ScalarLimits, ScalarState)> {
    (0.0..=1.0f64, -1.0..=1.0f64).prop_map(move |(v, a)| (l, consistent_start(ScalarState::new(0.0, v * l.v, a * l.a), &l)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn profiles_respect_limits_and_end_at_rest((l, st) in scalar_limits().prop_flat_map(start), target in 0.0..3.0f64) {
        let p = time_optimal_profile(target, st, &l);
        for i in 0..=500 {
            let x = p.profile.sample(p.profile.duration() * i as f64 / 500.0);
            prop_assert!(x.v >= -1e-9 && x.v <= l.v + 1e-9);
            prop_assert!(x.a.abs() <= l.a + 1e-9);
            prop_assert!(x.j.abs() <= l.j + 1e-9);
        }
        let end = p.profile.sample(p.profile.duration());
        prop_assert!(end.v.abs() < 1e-9 && end.a.abs() < 1e-9);
        if !p.braked {
            prop_assert!((end.s - target).abs() < 1e-9);
        }
    }

    #[test]
    fn brakes_move_forward_only((l, st) in scalar_limits().prop_flat_map(start)) {
        let b = brake_profile(st, &l);
        let mut prev = st.s;
        for i in 0..=300 {
            let x = b.sample(b.duration() * i as f64 / 300.0);
            prop_assert!(x.s >= prev - 1e-12);
            prev = x.s;
        }
        // braking is never longer than planning to any farther target
        let p = time_optimal_profile(b.end_position() + 0.5, st, &l);
        prop_assert!(!p.braked);
    }

    #[test]
    fn obstacle_occupancy_grows_with_time(r in 0.0..0.3f64, v in 0.0..2.0f64, e in 0.0..0.05f64, t1 in 0.0..1.0f64, t2 in 0.0..1.0f64) {
        let obs = ObstacleState { measured_center: Vec3::zeros(), shape_radius: r, v_max_obj: v, meas_error: e, meas_time: 0.0 };
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let a = obstacle_occupancy(&obs, TimeInterval::new(0.0, lo).unwrap()).unwrap();
        let b = obstacle_occupancy(&obs, TimeInterval::new(0.0, hi).unwrap()).unwrap();
        prop_assert!(a.radius <= b.radius);
        prop_assert!(a.radius >= r + e);
    }

    #[test]
    fn capsule_distance_lower_bounds_every_surface_point(
        p0 in prop::array::uniform3(-1.0..1.0f64),
        p1 in prop::array::uniform3(-1.0..1.0f64),
        c in prop::array::uniform3(-1.5..1.5f64),
        u in 0.0..=1.0f64,
        rc in 0.0..0.2f64,
        rb in 0.0..0.3f64,
    ) {
        let cap = Capsule { p0: Vec3::from(p0), p1: Vec3::from(p1), radius: rc };
        let ball = pacs_core::reach::Ball::new(Vec3::from(c), rb);
        let on_axis = cap.p0 + (cap.p1 - cap.p0) * u;
        prop_assert!(distance(&cap, &ball) <= (on_axis - ball.center).norm() - rc - rb + 1e-12);
    }

    #[test]
    fn waypoints_are_prefix_sums_inside_the_limits(deltas in prop::collection::vec(prop::collection::vec(-0.5..0.5f64, 2), 1..10), h_frac in 0.0..=1.0f64) {
        let n = deltas.len();
        let h = 1 + ((n - 1) as f64 * h_frac) as usize;
        let chunk = ActionChunk::new(deltas.iter().map(|d| JointVector::new(d.clone()).unwrap()).collect(), 0.1, 0.0).unwrap();
        let lim = limits(2);
        let wp = integrate_chunk(&JointVector::zeros(2), &chunk, h, &lim).unwrap();
        prop_assert_eq!(wp.waypoints().len(), h + 1);
        let mut acc = [0.0f64; 2];
        let mut clamped = false;
        for (k, w) in wp.waypoints().iter().enumerate().skip(1) {
            for j in 0..2 {
                acc[j] += deltas[k - 1][j];
                clamped |= acc[j].abs() > 2.0;
                prop_assert!(w[j] >= -2.0 && w[j] <= 2.0);
            }
        }
        if !clamped {
            for (w, a) in wp.waypoints()[h].iter().zip(&acc) {
                prop_assert!((w - a).abs() < 1e-12);
            }
        }
        prop_assert_eq!(wp.clamped(), clamped);
    }

    #[test]
    fn trajectories_pass_through_their_waypoints_in_order(steps in prop::collection::vec(prop::collection::vec(-0.2..0.2f64, 2), 1..6)) {
        let mut q = vec![0.0; 2];
        let mut pts = vec![JointVector::new(q.clone()).unwrap()];
        for s in &steps {
            q[0] += s[0];
            q[1] += s[1];
            pts.push(JointVector::new(q.clone()).unwrap());
        }
        let Ok(path) = build_path(&WaypointPath::new(pts.clone(), 0.0), &limits(2)) else { return Ok(()) };
        let path = Arc::new(path);
        let traj = IntendedTrajectory::plan(path.clone(), &limits(2), &JointState::at_rest(pts[0].clone()), 0.0).unwrap();
        let end = traj.sample(traj.end_time());
        prop_assert!(end.q.sub(pts.last().unwrap()).norm_inf() < 1e-9);
        for w in path.waypoints() {
            prop_assert!(path.distance_to(w.as_slice()) < 1e-9);
        }
        let mut prev = 0.0;
        for i in 0..=200 {
            let s = traj.scalar_sample(traj.duration() * i as f64 / 200.0).s;
            prop_assert!(s >= prev - 1e-12 && s <= path.length() + 1e-12);
            prev = s;
        }
    }
}
