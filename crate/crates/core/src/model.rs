//! Serial-chain robot model: capsule link geometry, point-mass energy and
//! kinematic limits.

use std::ops::{Deref, Index};

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Joint-space vector (positions, velocities, accelerations or jerks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct JointVector(Vec<f64>);

impl JointVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("joint vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Builds a vector without the finiteness check. Callers guarantee finite input.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &JointVector) -> JointVector {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &JointVector) -> JointVector {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: f64) -> JointVector {
        Self(self.0.iter().map(|a| a * k).collect())
    }

    pub fn dot(&self, other: &JointVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::Dimension { expected: n, got: self.0.len() });
        }
        Ok(())
    }
}

impl Deref for JointVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for JointVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for JointVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<JointVector> for Vec<f64> {
    fn from(v: JointVector) -> Vec<f64> {
        v.0
    }
}

/// Position range plus velocity, acceleration and jerk bounds per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicLimits {
    pub q_min: JointVector,
    pub q_max: JointVector,
    pub v_max: JointVector,
    pub a_max: JointVector,
    pub j_max: JointVector,
}

impl KinematicLimits {
    pub fn new(
        q_min: JointVector,
        q_max: JointVector,
        v_max: JointVector,
        a_max: JointVector,
        j_max: JointVector,
    ) -> Result<Self> {
        let n = q_min.len();
        for v in [&q_max, &v_max, &a_max, &j_max] {
            v.check_len(n)?;
        }
        for j in 0..n {
            if q_min[j] >= q_max[j] {
                return Err(Error::InvalidLimits(format!("joint {j}: q_min >= q_max")));
            }
            if v_max[j] <= 0.0 || a_max[j] <= 0.0 || j_max[j] <= 0.0 {
                return Err(Error::InvalidLimits(format!("joint {j}: non-positive derivative bound")));
            }
        }
        Ok(Self { q_min, q_max, v_max, a_max, j_max })
    }

    pub fn len(&self) -> usize {
        self.q_min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_min.is_empty()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.iter().enumerate().all(|(j, v)| *v >= self.q_min[j] && *v <= self.q_max[j])
    }

    /// Clamps `q` into the position range; returns true if anything moved.
    pub fn clamp(&self, q: &mut [f64]) -> bool {
        let mut clamped = false;
        for (j, v) in q.iter_mut().enumerate() {
            let c = v.clamp(self.q_min[j], self.q_max[j]);
            if c != *v {
                clamped = true;
                *v = c;
            }
        }
        clamped
    }
}

/// World-frame capsule: the set of points within `radius` of segment `p0`-`p1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub p0: Vec3,
    pub p1: Vec3,
    pub radius: f64,
}

impl Capsule {
    /// Closest point of the axis segment to `p`.
    pub fn closest_axis_point(&self, p: &Vec3) -> Vec3 {
        let d = self.p1 - self.p0;
        let len2 = d.norm_squared();
        if len2 <= 0.0 {
            return self.p0;
        }
        let u = ((p - self.p0).dot(&d) / len2).clamp(0.0, 1.0);
        self.p0 + d * u
    }

    pub fn axis_distance(&self, p: &Vec3) -> f64 {
        (p - self.closest_axis_point(p)).norm()
    }
}

/// Full kinematic state of the arm.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: JointVector,
    pub dq: JointVector,
    pub ddq: JointVector,
    pub dddq: JointVector,
}

impl JointState {
    pub fn at_rest(q: JointVector) -> Self {
        let n = q.len();
        Self { q, dq: JointVector::zeros(n), ddq: JointVector::zeros(n), dddq: JointVector::zeros(n) }
    }

    pub fn is_at_rest(&self) -> bool {
        self.dq.norm_inf() == 0.0 && self.ddq.norm_inf() == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    /// Fixed transform from the parent frame to this joint's frame at q = 0.
    pub origin: Isometry3<f64>,
    pub axis: Unit<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkCapsule {
    pub joint: usize,
    pub p0: Vec3,
    pub p1: Vec3,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassPoint {
    pub joint: usize,
    pub position: Vec3,
    pub mass: f64,
}

/// Declarative robot description, the on-disk form of [`RobotModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDescription {
    pub name: String,
    /// Bound on the workspace tracking error of every link point (m).
    pub tracking_error: f64,
    pub joints: Vec<JointDescription>,
    pub capsules: Vec<CapsuleDescription>,
    pub masses: Vec<MassDescription>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_effector: Option<PointDescription>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDescription {
    pub origin_xyz: [f64; 3],
    pub origin_rpy: [f64; 3],
    pub axis: [f64; 3],
    pub q_min: f64,
    pub q_max: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub j_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapsuleDescription {
    pub joint: usize,
    pub p0: [f64; 3],
    pub p1: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassDescription {
    pub joint: usize,
    pub position: [f64; 3],
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDescription {
    pub joint: usize,
    pub position: [f64; 3],
}

/// Immutable serial-chain model. All queries are pure.
#[derive(Debug, Clone)]
pub struct RobotModel {
    description: RobotDescription,
    joints: Vec<Joint>,
    capsules: Vec<LinkCapsule>,
    masses: Vec<MassPoint>,
    limits: KinematicLimits,
    tracking_error: f64,
    end_effector: (usize, Vec3),
    capsule_lipschitz: Vec<f64>,
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl RobotModel {
    pub fn from_description(desc: RobotDescription) -> Result<Self> {
        let n = desc.joints.len();
        if n == 0 {
            return Err(Error::InvalidModel("no joints".into()));
        }
        let mut joints = Vec::with_capacity(n);
        for (j, jd) in desc.joints.iter().enumerate() {
            let axis = vec3(jd.axis);
            if !(axis.norm() > 1e-12) || !axis.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidModel(format!("joint {j}: bad axis")));
            }
            let [r, p, y] = jd.origin_rpy;
            let origin = Isometry3::from_parts(
                Translation3::from(vec3(jd.origin_xyz)),
                UnitQuaternion::from_euler_angles(r, p, y),
            );
            joints.push(Joint { origin, axis: Unit::new_normalize(axis) });
        }
        let col = |f: fn(&JointDescription) -> f64| {
            JointVector::new(desc.joints.iter().map(f).collect())
        };
        let limits = KinematicLimits::new(
            col(|j| j.q_min)?,
            col(|j| j.q_max)?,
            col(|j| j.v_max)?,
            col(|j| j.a_max)?,
            col(|j| j.j_max)?,
        )?;
        let capsules: Vec<LinkCapsule> = desc
            .capsules
            .iter()
            .map(|c| LinkCapsule { joint: c.joint, p0: vec3(c.p0), p1: vec3(c.p1), radius: c.radius })
            .collect();
        let masses: Vec<MassPoint> = desc
            .masses
            .iter()
            .map(|m| MassPoint { joint: m.joint, position: vec3(m.position), mass: m.mass })
            .collect();
        let end_effector = match &desc.end_effector {
            Some(p) => (p.joint, vec3(p.position)),
            None => match capsules.last() {
                Some(c) => (c.joint, c.p1),
                None => (n - 1, Vec3::zeros()),
            },
        };
        let model = Self::assemble(desc.clone(), joints, capsules, masses, limits, desc.tracking_error, end_effector)?;
        Ok(model)
    }

    fn assemble(
        description: RobotDescription,
        joints: Vec<Joint>,
        capsules: Vec<LinkCapsule>,
        masses: Vec<MassPoint>,
        limits: KinematicLimits,
        tracking_error: f64,
        end_effector: (usize, Vec3),
    ) -> Result<Self> {
        let n = joints.len();
        if !(tracking_error >= 0.0) || !tracking_error.is_finite() {
            return Err(Error::InvalidModel("tracking_error must be >= 0".into()));
        }
        if capsules.is_empty() || masses.is_empty() {
            return Err(Error::InvalidModel("need at least one capsule and one mass point".into()));
        }
        for c in &capsules {
            if c.joint >= n {
                return Err(Error::InvalidModel(format!("capsule on unknown joint {}", c.joint)));
            }
            if !(c.radius > 0.0) {
                return Err(Error::InvalidModel("capsule radius must be > 0".into()));
            }
            if !masses.iter().any(|m| m.joint == c.joint) {
                return Err(Error::InvalidModel(format!("link {} has geometry but no mass point", c.joint)));
            }
        }
        for m in &masses {
            if m.joint >= n || !(m.mass > 0.0) {
                return Err(Error::InvalidModel("mass points need a valid joint and positive mass".into()));
            }
        }
        if end_effector.0 >= n {
            return Err(Error::InvalidModel("end effector on unknown joint".into()));
        }
        // Distance from joint i's axis point to any point of link j is bounded by
        // the chain length between them; summing over the driving joints bounds
        // the workspace displacement per radian of the largest joint motion.
        let capsule_lipschitz = capsules
            .iter()
            .map(|c| {
                let local = c.p0.norm().max(c.p1.norm());
                (0..=c.joint)
                    .map(|i| {
                        let chain: f64 = ((i + 1)..=c.joint)
                            .map(|k| joints[k].origin.translation.vector.norm())
                            .sum();
                        chain + local
                    })
                    .sum()
            })
            .collect();
        Ok(Self { description, joints, capsules, masses, limits, tracking_error, end_effector, capsule_lipschitz })
    }

    pub fn description(&self) -> &RobotDescription {
        &self.description
    }

    pub fn name(&self) -> &str {
        &self.description.name
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn link_capsules(&self) -> &[LinkCapsule] {
        &self.capsules
    }

    pub fn mass_points(&self) -> &[MassPoint] {
        &self.masses
    }

    pub fn limits(&self) -> &KinematicLimits {
        &self.limits
    }

    pub fn tracking_error(&self) -> f64 {
        self.tracking_error
    }

    /// Workspace displacement bound per radian of max-norm joint motion, one per capsule.
    pub fn capsule_lipschitz(&self) -> &[f64] {
        &self.capsule_lipschitz
    }

    pub fn max_lipschitz(&self) -> f64 {
        self.capsule_lipschitz.iter().cloned().fold(0.0, f64::max)
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::Dimension { expected: self.dof(), got: q.len() });
        }
        Ok(())
    }

    /// World pose of every joint frame (after its rotation).
    pub fn frames_into(&self, q: &[f64], out: &mut Vec<Isometry3<f64>>) {
        out.clear();
        let mut t = Isometry3::identity();
        for (joint, &angle) in self.joints.iter().zip(q) {
            t *= joint.origin;
            t *= UnitQuaternion::from_axis_angle(&joint.axis, angle);
            out.push(t);
        }
    }

    pub fn frames(&self, q: &[f64]) -> Result<Vec<Isometry3<f64>>> {
        self.check_dim(q)?;
        let mut out = Vec::with_capacity(self.dof());
        self.frames_into(q, &mut out);
        Ok(out)
    }

    /// World-frame capsules, in link order. Unchecked fast path.
    pub fn capsules_into(&self, q: &[f64], frames: &mut Vec<Isometry3<f64>>, out: &mut Vec<Capsule>) {
        self.frames_into(q, frames);
        out.clear();
        out.extend(self.capsules.iter().map(|c| {
            let f = &frames[c.joint];
            Capsule {
                p0: (f * nalgebra::Point3::from(c.p0)).coords,
                p1: (f * nalgebra::Point3::from(c.p1)).coords,
                radius: c.radius,
            }
        }));
    }

    pub fn forward_kinematics(&self, q: &JointVector) -> Result<Vec<Capsule>> {
        self.check_dim(q)?;
        let mut frames = Vec::with_capacity(self.dof());
        let mut out = Vec::with_capacity(self.capsules.len());
        self.capsules_into(q, &mut frames, &mut out);
        Ok(out)
    }

    fn mass_positions_into(&self, q: &[f64], frames: &mut Vec<Isometry3<f64>>, out: &mut Vec<Vec3>) {
        self.frames_into(q, frames);
        out.clear();
        out.extend(self.masses.iter().map(|m| (frames[m.joint] * nalgebra::Point3::from(m.position)).coords));
    }

    pub fn end_effector_position(&self, q: &JointVector) -> Result<Vec3> {
        let frames = self.frames(q)?;
        let (j, p) = self.end_effector;
        Ok((frames[j] * nalgebra::Point3::from(p)).coords)
    }

    /// Linear velocity of every mass point by a directional central difference of
    /// forward kinematics, with a joint-space step of 1e-6 rad.
    pub fn point_velocities(&self, q: &JointVector, dq: &JointVector) -> Result<Vec<Vec3>> {
        self.check_dim(q)?;
        self.check_dim(dq)?;
        Ok(self.point_velocities_unchecked(q, dq))
    }

    pub(crate) fn point_velocities_unchecked(&self, q: &[f64], dq: &[f64]) -> Vec<Vec3> {
        let scale = dq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return vec![Vec3::zeros(); self.masses.len()];
        }
        let eps = 1e-6 / scale;
        let qp: Vec<f64> = q.iter().zip(dq).map(|(a, b)| a + eps * b).collect();
        let qm: Vec<f64> = q.iter().zip(dq).map(|(a, b)| a - eps * b).collect();
        let mut frames = Vec::with_capacity(self.dof());
        let mut pp = Vec::with_capacity(self.masses.len());
        let mut pm = Vec::with_capacity(self.masses.len());
        self.mass_positions_into(&qp, &mut frames, &mut pp);
        self.mass_positions_into(&qm, &mut frames, &mut pm);
        pp.iter().zip(&pm).map(|(a, b)| (a - b) / (2.0 * eps)).collect()
    }

    /// Point-mass kinetic energy Σ ½ m ‖v‖² (J).
    pub fn kinetic_energy(&self, q: &JointVector, dq: &JointVector) -> Result<f64> {
        self.check_dim(q)?;
        self.check_dim(dq)?;
        Ok(self.kinetic_energy_unchecked(q, dq))
    }

    pub(crate) fn kinetic_energy_unchecked(&self, q: &[f64], dq: &[f64]) -> f64 {
        self.point_velocities_unchecked(q, dq)
            .iter()
            .zip(&self.masses)
            .map(|(v, m)| 0.5 * m.mass * v.norm_squared())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use nalgebra::{Matrix3, Matrix4, Vector4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::robots;

    fn planar() -> RobotModel {
        RobotModel::from_description(robots::planar1()).unwrap()
    }

    fn chain3() -> RobotDescription {
        let joint = |xyz: [f64; 3], rpy: [f64; 3], axis: [f64; 3]| JointDescription {
            origin_xyz: xyz,
            origin_rpy: rpy,
            axis,
            q_min: -3.0,
            q_max: 3.0,
            v_max: 2.0,
            a_max: 10.0,
            j_max: 400.0,
        };
        RobotDescription {
            name: "chain3".into(),
            tracking_error: 0.0,
            joints: vec![
                joint([0.0, 0.0, 0.3], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
                joint([0.1, 0.0, 0.0], [0.4, -0.2, 0.7], [0.0, 1.0, 0.0]),
                joint([0.0, 0.5, 0.1], [-1.0, 0.3, 0.2], [1.0, 1.0, 0.0]),
            ],
            capsules: vec![
                CapsuleDescription { joint: 0, p0: [0.0; 3], p1: [0.1, 0.0, 0.0], radius: 0.05 },
                CapsuleDescription { joint: 1, p0: [0.0; 3], p1: [0.0, 0.5, 0.1], radius: 0.05 },
                CapsuleDescription { joint: 2, p0: [0.0, 0.0, 0.0], p1: [0.2, -0.1, 0.3], radius: 0.04 },
            ],
            masses: vec![
                MassDescription { joint: 0, position: [0.05, 0.0, 0.0], mass: 2.0 },
                MassDescription { joint: 1, position: [0.0, 0.25, 0.05], mass: 1.5 },
                MassDescription { joint: 2, position: [0.2, -0.1, 0.3], mass: 0.7 },
            ],
            end_effector: None,
        }
    }

    fn rot(axis: Vec3, angle: f64) -> Matrix3<f64> {
        let k = axis.normalize();
        let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
        Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
    }

    fn homogeneous(r: Matrix3<f64>, t: Vec3) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        m
    }

    /// World position of a point on `joint`'s link, one 4x4 product per joint.
    fn oracle_point(desc: &RobotDescription, q: &[f64], joint: usize, p: [f64; 3]) -> Vec3 {
        let mut m = Matrix4::identity();
        for (jd, &angle) in desc.joints.iter().zip(q).take(joint + 1) {
            let [r, pi, y] = jd.origin_rpy;
            let rpy = rot(Vec3::z(), y) * rot(Vec3::y(), pi) * rot(Vec3::x(), r);
            m = m * homogeneous(rpy, vec3(jd.origin_xyz)) * homogeneous(rot(vec3(jd.axis), angle), Vec3::zeros());
        }
        let w = m * Vector4::new(p[0], p[1], p[2], 1.0);
        Vec3::new(w.x, w.y, w.z)
    }

    fn jv(v: &[f64]) -> JointVector {
        JointVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn planar_identity_configuration() {
        let caps = planar().forward_kinematics(&jv(&[0.0])).unwrap();
        assert_eq!(caps.len(), 1);
        assert_eq!(caps[0].p0, Vec3::zeros());
        assert_eq!(caps[0].p1, Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn planar_quarter_turn() {
        let caps = planar().forward_kinematics(&jv(&[FRAC_PI_2])).unwrap();
        assert!(caps[0].p0.norm() < 1e-12);
        assert!((caps[0].p1 - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn chain_matches_per_joint_matrix_product() {
        let desc = chain3();
        let model = RobotModel::from_description(desc.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let caps = model.forward_kinematics(&jv(&q)).unwrap();
            for (c, d) in caps.iter().zip(&desc.capsules) {
                assert!((c.p0 - oracle_point(&desc, &q, d.joint, d.p0)).norm() < 1e-12);
                assert!((c.p1 - oracle_point(&desc, &q, d.joint, d.p1)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = planar();
        assert!(matches!(m.forward_kinematics(&jv(&[0.0, 1.0])), Err(Error::Dimension { expected: 1, got: 2 })));
        assert!(m.kinetic_energy(&jv(&[0.0]), &jv(&[])).is_err());
    }

    #[test]
    fn zero_velocity_gives_zero_point_velocities_and_energy() {
        let model = RobotModel::from_description(robots::arm7()).unwrap();
        let q = jv(&[0.1, -0.5, 0.2, -2.0, 0.3, 1.5, 0.4]);
        let v = model.point_velocities(&q, &JointVector::zeros(7)).unwrap();
        assert!(v.iter().all(|p| *p == Vec3::zeros()));
        assert_eq!(model.kinetic_energy(&q, &JointVector::zeros(7)).unwrap(), 0.0);
    }

    #[test]
    fn rigid_rotation_speed_and_energy() {
        let m = planar();
        let v = m.point_velocities(&jv(&[0.3]), &jv(&[1.0])).unwrap();
        assert!((v[0].norm() - 1.0).abs() < 1e-6);
        assert!((m.kinetic_energy(&jv(&[0.3]), &jv(&[1.0])).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn point_velocities_and_energy_match_directional_difference() {
        let desc = chain3();
        let model = RobotModel::from_description(desc.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-7;
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.5..2.5)).collect();
            let dq: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let qp: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a + b * h).collect();
            let qm: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a - b * h).collect();
            let v = model.point_velocities(&jv(&q), &jv(&dq)).unwrap();
            let mut energy = 0.0;
            for (vi, m) in v.iter().zip(&desc.masses) {
                let oracle =
                    (oracle_point(&desc, &qp, m.joint, m.position) - oracle_point(&desc, &qm, m.joint, m.position)) / (2.0 * h);
                assert!((vi - oracle).norm() < 1e-6 * (1.0 + oracle.norm()));
                energy += 0.5 * m.mass * oracle.norm_squared();
            }
            let k = model.kinetic_energy(&jv(&q), &jv(&dq)).unwrap();
            assert!((k - energy).abs() < 1e-6 * (1.0 + energy));
        }
    }

    #[test]
    fn lipschitz_bound_holds_on_samples() {
        let model = RobotModel::from_description(robots::arm7()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lim = model.limits().clone();
        for _ in 0..2000 {
            let q: Vec<f64> = (0..7).map(|j| rng.random_range(lim.q_min[j]..lim.q_max[j])).collect();
            let d: Vec<f64> = (0..7).map(|_| rng.random_range(-0.05..0.05)).collect();
            let q2: Vec<f64> = q.iter().zip(&d).map(|(a, b)| a + b).collect();
            let dn = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let a = model.forward_kinematics(&jv(&q)).unwrap();
            let b = model.forward_kinematics(&jv(&q2)).unwrap();
            for ((ca, cb), l) in a.iter().zip(&b).zip(model.capsule_lipschitz()) {
                assert!((ca.p0 - cb.p0).norm() <= l * dn + 1e-12);
                assert!((ca.p1 - cb.p1).norm() <= l * dn + 1e-12);
            }
        }
    }

    #[test]
    fn invalid_descriptions_are_rejected() {
        let mut d = robots::planar1();
        d.capsules[0].radius = 0.0;
        assert!(matches!(RobotModel::from_description(d), Err(Error::InvalidModel(_))));
        let mut d = robots::planar1();
        d.tracking_error = -1.0;
        assert!(RobotModel::from_description(d).is_err());
        let mut d = robots::planar1();
        d.joints[0].q_min = 4.0;
        assert!(matches!(RobotModel::from_description(d), Err(Error::InvalidLimits(_))));
        let mut d = robots::planar1();
        d.masses.clear();
        assert!(RobotModel::from_description(d).is_err());
    }

    #[test]
    fn joint_vector_rejects_non_finite() {
        assert!(matches!(JointVector::new(vec![0.0, f64::NAN]), Err(Error::NonFinite(_))));
        assert!(JointVector::new(vec![f64::INFINITY]).is_err());
        let v: std::result::Result<JointVector, _> = serde_json::from_str("[1.0, 2.0]");
        assert_eq!(v.unwrap().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn limits_clamp_reports_changes() {
        let lim = planar().limits().clone();
        let mut q = [0.5];
        assert!(!lim.clamp(&mut q));
        let mut q = [4.0];
        assert!(lim.clamp(&mut q));
        assert_eq!(q[0], std::f64::consts::PI);
    }
}
