//! Ground-truth obstacle motion and corrupted measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{ObstacleScript, Pattern};
use crate::error::{Error, Result};
use crate::model::{Capsule, Vec3};
use crate::reach::ObstacleState;

/// Relative slack on the per-tick admissibility checks (rounding only).
const ADMISSIBILITY_SLACK: f64 = 1e-9;

fn arr(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn planar_offset(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
    if radius == 0.0 {
        return Vec3::zeros();
    }
    let r = radius * rng.random::<f64>().sqrt();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    Vec3::new(r * phi.cos(), r * phi.sin(), 0.0)
}

fn ball_offset(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
    if radius == 0.0 {
        return Vec3::zeros();
    }
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm_squared() <= 1.0 {
            return v * radius;
        }
    }
}

#[derive(Debug, Clone)]
struct Track {
    script: ObstacleScript,
    offset: Vec3,
    phase: f64,
    position: Vec3,
}

impl Track {
    fn new(script: ObstacleScript, rng: &mut ChaCha8Rng) -> Self {
        let offset = planar_offset(rng, script.jitter);
        let phase = if script.random_phase { rng.random::<f64>() } else { 0.0 };
        let mut track = Self { script, offset, phase, position: Vec3::zeros() };
        track.position = match &track.script.pattern {
            Pattern::AdversarialChase { start } => arr(*start) + offset,
            _ => track.periodic_position(0.0),
        };
        track
    }

    fn periodic_position(&self, t: f64) -> Vec3 {
        let speed = self.script.speed;
        match &self.script.pattern {
            Pattern::Static { center } => arr(*center) + self.offset,
            Pattern::LinearPatrol { a, b } => {
                let (a, b) = (arr(*a) + self.offset, arr(*b) + self.offset);
                let len = (b - a).norm();
                if len == 0.0 {
                    return a;
                }
                let d = (self.phase * 2.0 * len + speed * t).rem_euclid(2.0 * len);
                let u = if d <= len { d } else { 2.0 * len - d };
                a + (b - a) * (u / len)
            }
            Pattern::Circle { center, radius } => {
                let th = self.phase * std::f64::consts::TAU + speed * t / radius;
                arr(*center) + self.offset + Vec3::new(radius * th.cos(), radius * th.sin(), 0.0)
            }
            Pattern::AdversarialChase { .. } => self.position,
        }
    }

    fn step(&mut self, t_next: f64, dt: f64, robot: &[Capsule]) {
        self.position = match &self.script.pattern {
            Pattern::AdversarialChase { .. } => {
                let p = self.position;
                let target = robot
                    .iter()
                    .map(|c| c.closest_axis_point(&p))
                    .min_by(|a, b| (a - p).norm().total_cmp(&(b - p).norm()));
                match target {
                    Some(target) => {
                        let d = target - p;
                        let dist = d.norm();
                        let step = (self.script.v_max * dt).min(dist);
                        if dist > 0.0 {
                            p + d * (step / dist)
                        } else {
                            p
                        }
                    }
                    None => p,
                }
            }
            _ => self.periodic_position(t_next),
        };
    }
}

/// All obstacles of a rollout with their measurement noise.
#[derive(Debug, Clone)]
pub struct ObstacleWorld {
    tracks: Vec<Track>,
    noise: ChaCha8Rng,
    time: f64,
}

impl ObstacleWorld {
    /// Instantiates the scripts; `seed` fixes offsets, phases and noise.
    pub fn new(scripts: &[ObstacleScript], seed: u64) -> Self {
        let mut setup = ChaCha8Rng::seed_from_u64(seed);
        setup.set_stream(1);
        let mut noise = ChaCha8Rng::seed_from_u64(seed);
        noise.set_stream(2);
        let tracks = scripts.iter().map(|s| Track::new(s.clone(), &mut setup)).collect();
        Self { tracks, noise, time: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.tracks.iter().map(|t| t.position).collect()
    }

    pub fn shape_radii(&self) -> Vec<f64> {
        self.tracks.iter().map(|t| t.script.shape_radius).collect()
    }

    /// Noisy measurements at the current time, within the declared error.
    pub fn measure(&mut self) -> Result<Vec<ObstacleState>> {
        let mut out = Vec::with_capacity(self.tracks.len());
        for (i, tr) in self.tracks.iter().enumerate() {
            let err = tr.script.meas_error;
            let offset = ball_offset(&mut self.noise, err);
            if offset.norm() > err * (1.0 + ADMISSIBILITY_SLACK) {
                return Err(Error::InadmissibleObstacle { obstacle: i, time: self.time, reason: "measurement error".into() });
            }
            out.push(ObstacleState {
                measured_center: tr.position + offset,
                shape_radius: tr.script.shape_radius,
                v_max_obj: tr.script.v_max,
                meas_error: err,
                meas_time: self.time,
            });
        }
        Ok(out)
    }

    /// Advances every obstacle to `t_next`, checking the declared speed bound.
    pub fn advance(&mut self, t_next: f64, robot: &[Capsule]) -> Result<()> {
        let dt = t_next - self.time;
        for (i, tr) in self.tracks.iter_mut().enumerate() {
            let before = tr.position;
            tr.step(t_next, dt, robot);
            let moved = (tr.position - before).norm();
            let allowed = tr.script.v_max * dt;
            if moved > allowed * (1.0 + ADMISSIBILITY_SLACK) + 1e-15 {
                return Err(Error::InadmissibleObstacle {
                    obstacle: i,
                    time: t_next,
                    reason: format!("moved {moved:.3e} m, bound {allowed:.3e} m"),
                });
            }
        }
        self.time = t_next;
        Ok(())
    }
}
