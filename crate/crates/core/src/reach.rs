//! Reachable occupancies of the robot and of bounded-velocity obstacles.
//!
//! The robot occupancy of a time interval is a list of capsules, one per link
//! capsule, that contains every point of the link at every time of the
//! interval. Obstacle occupancies are balls grown by the measurement error
//! and the distance the obstacle can travel since its measurement.

use crate::error::{Error, Result};
use crate::model::{Capsule, RobotModel, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    pub t_a: f64,
    pub t_b: f64,
}

impl TimeInterval {
    pub fn new(t_a: f64, t_b: f64) -> Result<Self> {
        if !(t_a <= t_b) {
            return Err(Error::Config(format!("time interval [{t_a}, {t_b}] is reversed")));
        }
        Ok(Self { t_a, t_b })
    }

    pub fn length(&self) -> f64 {
        self.t_b - self.t_a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: Vec3,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec3, radius: f64) -> Self {
        Self { center, radius }
    }
}

/// Last measurement of an obstacle together with its declared bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleState {
    pub measured_center: Vec3,
    pub shape_radius: f64,
    pub v_max_obj: f64,
    pub meas_error: f64,
    pub meas_time: f64,
}

/// Everywhere the obstacle can be during `interval`.
pub fn obstacle_occupancy(obs: &ObstacleState, interval: TimeInterval) -> Result<Ball> {
    if interval.t_a < obs.meas_time {
        return Err(Error::IntervalBeforeMeasurement { t_a: interval.t_a, t_b: interval.t_b, meas_time: obs.meas_time });
    }
    Ok(obstacle_ball(obs, interval.t_b))
}

#[inline]
pub(crate) fn obstacle_ball(obs: &ObstacleState, t_b: f64) -> Ball {
    Ball {
        center: obs.measured_center,
        radius: obs.shape_radius + obs.meas_error + obs.v_max_obj * (t_b - obs.meas_time).max(0.0),
    }
}

/// Signed distance between a capsule and a ball; negative values are penetration depth.
#[inline]
pub fn distance(capsule: &Capsule, ball: &Ball) -> f64 {
    capsule.axis_distance(&ball.center) - capsule.radius - ball.radius
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Volume {
    Capsule(Capsule),
    Ball(Ball),
}

impl Volume {
    pub fn distance_to_ball(&self, ball: &Ball) -> f64 {
        match self {
            Volume::Capsule(c) => distance(c, ball),
            Volume::Ball(b) => (b.center - ball.center).norm() - b.radius - ball.radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyEntry {
    pub interval: TimeInterval,
    pub volumes: Vec<Volume>,
}

/// Contiguous, ordered interval-wise occupancy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OccupancySet {
    pub entries: Vec<OccupancyEntry>,
}

impl OccupancySet {
    /// Smallest signed distance from each entry to `ball`.
    pub fn distances(&self, ball: &Ball) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| e.volumes.iter().map(|v| v.distance_to_ball(ball)).fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// Per-entry collision test: true where some volume touches the ball.
pub fn intersects(occ: &OccupancySet, ball: &Ball) -> Vec<bool> {
    occ.distances(ball).into_iter().map(|d| d <= 0.0).collect()
}

/// A robot motion that can be swept for occupancy.
pub trait SweptMotion {
    /// Joint configuration at absolute time `t`.
    fn configuration_into(&self, t: f64, out: &mut Vec<f64>);
    /// Upper bound on the largest single-joint travel during `[t_a, t_b]`.
    fn travel_bound(&self, t_a: f64, t_b: f64) -> f64;
}

/// Equal-length split of `interval` into `n_sub` pieces (at least one).
pub fn subdivide(interval: TimeInterval, n_sub: usize) -> impl Iterator<Item = TimeInterval> {
    let n = n_sub.max(1);
    let len = interval.length();
    (0..n).map(move |k| {
        let t_a = if k == 0 { interval.t_a } else { interval.t_a + len * k as f64 / n as f64 };
        let t_b = if k + 1 == n { interval.t_b } else { interval.t_a + len * (k + 1) as f64 / n as f64 };
        TimeInterval { t_a, t_b }
    })
}

/// Reusable buffers for sweeping.
#[derive(Debug, Default)]
pub struct SweepScratch {
    q: Vec<f64>,
    frames: Vec<nalgebra::Isometry3<f64>>,
    caps_a: Vec<Capsule>,
    caps_b: Vec<Capsule>,
}

/// Sweeps `motion` over `interval` and hands each subinterval's occupancy
/// capsules to `visit`, in time order.
///
/// A link point moves at most λ = L·travel during the subinterval, so at any
/// time it lies within λ/2 of the midpoint of its start and end positions.
/// Those midpoints form the averaged axis segment; inflating it by λ/2 plus
/// the tracking error bounds the link at every instant.
pub fn sweep<M, F>(model: &RobotModel, motion: &M, interval: TimeInterval, n_sub: usize, scratch: &mut SweepScratch, mut visit: F)
where
    M: SweptMotion + ?Sized,
    F: FnMut(usize, TimeInterval, &[Capsule]),
{
    let te = model.tracking_error();
    let lips = model.capsule_lipschitz();
    motion.configuration_into(interval.t_a, &mut scratch.q);
    model.capsules_into(&scratch.q, &mut scratch.frames, &mut scratch.caps_a);
    let mut out: Vec<Capsule> = Vec::with_capacity(scratch.caps_a.len());
    for (k, sub) in subdivide(interval, n_sub).enumerate() {
        motion.configuration_into(sub.t_b, &mut scratch.q);
        model.capsules_into(&scratch.q, &mut scratch.frames, &mut scratch.caps_b);
        let travel = motion.travel_bound(sub.t_a, sub.t_b);
        out.clear();
        for ((a, b), l) in scratch.caps_a.iter().zip(&scratch.caps_b).zip(lips) {
            out.push(Capsule {
                p0: (a.p0 + b.p0) * 0.5,
                p1: (a.p1 + b.p1) * 0.5,
                radius: a.radius + te + 0.5 * l * travel,
            });
        }
        visit(k, sub, &out);
        std::mem::swap(&mut scratch.caps_a, &mut scratch.caps_b);
    }
}

/// Robot occupancy along `motion` over `interval` split into `n_sub` subintervals.
pub fn robot_occupancy<M: SweptMotion + ?Sized>(
    model: &RobotModel,
    motion: &M,
    interval: TimeInterval,
    n_sub: usize,
) -> OccupancySet {
    let mut scratch = SweepScratch::default();
    let mut entries = Vec::with_capacity(n_sub.max(1));
    sweep(model, motion, interval, n_sub, &mut scratch, |_, sub, caps| {
        entries.push(OccupancyEntry { interval: sub, volumes: caps.iter().copied().map(Volume::Capsule).collect() });
    });
    OccupancySet { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_capsule(radius: f64) -> Capsule {
        Capsule { p0: Vec3::zeros(), p1: Vec3::new(1.0, 0.0, 0.0), radius }
    }

    #[test]
    fn static_obstacle_keeps_its_shape_radius() {
        let obs = ObstacleState {
            measured_center: Vec3::new(1.0, 2.0, 0.0),
            shape_radius: 0.1,
            v_max_obj: 0.0,
            meas_error: 0.0,
            meas_time: 0.0,
        };
        for tb in [0.0, 0.5, 100.0] {
            let b = obstacle_occupancy(&obs, TimeInterval::new(0.0, tb).unwrap()).unwrap();
            assert_eq!(b.radius, 0.1);
        }
    }

    #[test]
    fn obstacle_radius_grows_linearly() {
        let obs = ObstacleState {
            measured_center: Vec3::zeros(),
            shape_radius: 0.05,
            v_max_obj: 1.0,
            meas_error: 0.01,
            meas_time: 1.0,
        };
        let b = obstacle_occupancy(&obs, TimeInterval::new(1.0, 1.2).unwrap()).unwrap();
        assert!((b.radius - 0.26).abs() < 1e-12);
        assert!(matches!(
            obstacle_occupancy(&obs, TimeInterval::new(0.5, 1.2).unwrap()),
            Err(Error::IntervalBeforeMeasurement { .. })
        ));
    }

    #[test]
    fn tangent_capsule_and_ball_are_at_zero_distance() {
        let b = Ball::new(Vec3::new(0.5, 0.2, 0.0), 0.1);
        assert!(distance(&unit_capsule(0.1), &b).abs() < 1e-12);
    }

    #[test]
    fn centre_on_axis_gives_full_penetration() {
        let b = Ball::new(Vec3::new(0.3, 0.0, 0.0), 0.2);
        assert!((distance(&unit_capsule(0.1), &b) + 0.3).abs() < 1e-12);
    }

    fn sampled_distance(c: &Capsule, b: &Ball, n: usize) -> f64 {
        (0..=n)
            .map(|i| {
                let u = i as f64 / n as f64;
                (c.p0 + (c.p1 - c.p0) * u - b.center).norm()
            })
            .fold(f64::INFINITY, f64::min)
            - c.radius
            - b.radius
    }

    fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
        Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
    }

    #[test]
    fn distance_matches_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let c = Capsule { p0: random_vec(&mut rng, 1.0), p1: random_vec(&mut rng, 1.0), radius: rng.random_range(0.01..0.2) };
            let b = Ball::new(random_vec(&mut rng, 1.5), rng.random_range(0.0..0.3));
            let oracle = sampled_distance(&c, &b, 100_000);
            let d = distance(&c, &b);
            assert!(d <= oracle + 1e-12);
            assert!((d - oracle).abs() < 1e-6, "{d} vs {oracle}");
        }
    }

    #[test]
    fn far_ball_never_intersects() {
        let occ = OccupancySet {
            entries: vec![OccupancyEntry {
                interval: TimeInterval::new(0.0, 1.0).unwrap(),
                volumes: vec![Volume::Capsule(unit_capsule(0.1))],
            }],
        };
        assert_eq!(intersects(&occ, &Ball::new(Vec3::new(1e3, 0.0, 0.0), 1.0)), vec![false]);
        assert_eq!(intersects(&occ, &Ball::new(Vec3::new(1.0, 0.0, 0.0), 1e-3)), vec![true]);
    }

    #[test]
    fn intersection_sign_matches_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for _ in 0..400 {
            let c = Capsule { p0: random_vec(&mut rng, 1.0), p1: random_vec(&mut rng, 1.0), radius: rng.random_range(0.01..0.2) };
            let b = Ball::new(random_vec(&mut rng, 1.0), rng.random_range(0.0..0.4));
            let oracle = sampled_distance(&c, &b, 100_000);
            if oracle.abs() < 1e-9 {
                continue;
            }
            let occ = OccupancySet {
                entries: vec![OccupancyEntry { interval: TimeInterval::new(0.0, 1.0).unwrap(), volumes: vec![Volume::Capsule(c)] }],
            };
            assert_eq!(intersects(&occ, &b)[0], oracle <= 0.0);
            checked += 1;
        }
        assert!(checked > 300);
    }

    #[test]
    fn subdivision_is_contiguous() {
        let iv = TimeInterval::new(0.3, 1.1).unwrap();
        let subs: Vec<_> = subdivide(iv, 7).collect();
        assert_eq!(subs.len(), 7);
        assert_eq!(subs[0].t_a, 0.3);
        assert_eq!(subs[6].t_b, 1.1);
        for w in subs.windows(2) {
            assert_eq!(w[0].t_b, w[1].t_a);
        }
    }

    /// Straight joint-space motion from `a` at t = 0 to `b` at t = 1.
    struct Linear {
        a: Vec<f64>,
        b: Vec<f64>,
    }

    impl SweptMotion for Linear {
        fn configuration_into(&self, t: f64, out: &mut Vec<f64>) {
            out.clear();
            out.extend(self.a.iter().zip(&self.b).map(|(a, b)| a + (b - a) * t));
        }

        fn travel_bound(&self, t_a: f64, t_b: f64) -> f64 {
            self.a.iter().zip(&self.b).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max) * (t_b - t_a)
        }
    }

    /// Capsule `inner` lies inside `outer` iff both inner end spheres do.
    fn contains(outer: &Capsule, inner: &Capsule) -> bool {
        [inner.p0, inner.p1].iter().all(|p| outer.axis_distance(p) + inner.radius <= outer.radius + 1e-12)
    }

    #[test]
    fn swept_capsules_contain_every_instant() {
        let model = RobotModel::from_description(crate::robots::arm7()).unwrap();
        let lim = model.limits().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut samples = 0;
        for _ in 0..200 {
            let a: Vec<f64> = (0..7).map(|j| rng.random_range(lim.q_min[j]..lim.q_max[j])).collect();
            let step = rng.random_range(0.001..0.3);
            let b: Vec<f64> = a.iter().map(|x| x + rng.random_range(-step..step)).collect();
            let motion = Linear { a, b };
            let n_sub = rng.random_range(1..6);
            let occ = robot_occupancy(&model, &motion, TimeInterval::new(0.0, 1.0).unwrap(), n_sub);
            for e in &occ.entries {
                for _ in 0..10 {
                    let t = rng.random_range(e.interval.t_a..=e.interval.t_b);
                    let mut q = Vec::new();
                    motion.configuration_into(t, &mut q);
                    let caps = model.forward_kinematics(&crate::model::JointVector::new(q).unwrap()).unwrap();
                    for (c, v) in caps.iter().zip(&e.volumes) {
                        let Volume::Capsule(outer) = v else { unreachable!() };
                        let mut grown = *c;
                        grown.radius += model.tracking_error();
                        assert!(contains(outer, &grown));
                    }
                    samples += 1;
                }
            }
        }
        assert!(samples >= 2000);
    }
}
