//! Builtin robot descriptions.

use std::f64::consts::FRAC_PI_2;

use crate::model::{CapsuleDescription, JointDescription, MassDescription, PointDescription, RobotDescription};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 2] = ["arm7", "planar1"];

pub fn builtin(name: &str) -> Option<RobotDescription> {
    match name {
        "arm7" => Some(arm7()),
        "planar1" => Some(planar1()),
        _ => None,
    }
}

/// One revolute joint about z with a 1 m link along x and 1 kg at its tip.
pub fn planar1() -> RobotDescription {
    RobotDescription {
        name: "planar1".into(),
        tracking_error: 0.0,
        joints: vec![JointDescription {
            origin_xyz: [0.0; 3],
            origin_rpy: [0.0; 3],
            axis: [0.0, 0.0, 1.0],
            q_min: -std::f64::consts::PI,
            q_max: std::f64::consts::PI,
            v_max: 2.0,
            a_max: 10.0,
            j_max: 400.0,
        }],
        capsules: vec![CapsuleDescription { joint: 0, p0: [0.0; 3], p1: [1.0, 0.0, 0.0], radius: 0.05 }],
        masses: vec![MassDescription { joint: 0, position: [1.0, 0.0, 0.0], mass: 1.0 }],
        end_effector: Some(PointDescription { joint: 0, position: [1.0, 0.0, 0.0] }),
    }
}

/// Seven-joint arm with the kinematic layout of a common collaborative
/// research arm, coarse capsule geometry including a gripper, and point
/// masses at the link centres. The base sits on the table plane z = 0.
pub fn arm7() -> RobotDescription {
    let origins: [([f64; 3], [f64; 3]); 7] = [
        ([0.0, 0.0, 0.333], [0.0, 0.0, 0.0]),
        ([0.0, 0.0, 0.0], [-FRAC_PI_2, 0.0, 0.0]),
        ([0.0, -0.316, 0.0], [FRAC_PI_2, 0.0, 0.0]),
        ([0.0825, 0.0, 0.0], [FRAC_PI_2, 0.0, 0.0]),
        ([-0.0825, 0.384, 0.0], [-FRAC_PI_2, 0.0, 0.0]),
        ([0.0, 0.0, 0.0], [FRAC_PI_2, 0.0, 0.0]),
        ([0.088, 0.0, 0.0], [FRAC_PI_2, 0.0, 0.0]),
    ];
    let q_min = [-2.7437, -1.7837, -2.9007, -3.0421, -2.8065, 0.5445, -3.0159];
    let q_max = [2.7437, 1.7837, 2.9007, -0.1518, 2.8065, 4.5169, 3.0159];
    let v_max = [2.0, 2.0, 2.0, 2.0, 1.25, 1.25, 1.25];
    let joints = (0..7)
        .map(|j| JointDescription {
            origin_xyz: origins[j].0,
            origin_rpy: origins[j].1,
            axis: [0.0, 0.0, 1.0],
            q_min: q_min[j],
            q_max: q_max[j],
            v_max: v_max[j],
            a_max: 10.0,
            j_max: 400.0,
        })
        .collect();
    // (joint, p0, p1, radius, mass)
    type Link = (usize, [f64; 3], [f64; 3], f64, f64);
    let links: [Link; 7] = [
        (0, [0.0, 0.0, -0.18], [0.0, 0.0, 0.0], 0.08, 4.97),
        (1, [0.0, 0.0, 0.0], [0.0, -0.316, 0.0], 0.07, 0.65),
        (2, [0.0, 0.0, 0.0], [0.0825, 0.0, 0.0], 0.07, 3.23),
        (3, [0.0, 0.0, 0.0], [-0.0825, 0.384, 0.0], 0.065, 3.59),
        (4, [0.0, 0.0, -0.12], [0.0, 0.0, 0.0], 0.06, 1.23),
        (5, [0.0, 0.0, 0.0], [0.088, 0.0, 0.0], 0.06, 1.67),
        (6, [0.0, 0.0, 0.0], [0.0, 0.0, 0.2], 0.055, 0.74),
    ];
    let capsules = links
        .iter()
        .map(|&(joint, p0, p1, radius, _)| CapsuleDescription { joint, p0, p1, radius })
        .collect();
    let masses = links
        .iter()
        .map(|&(joint, p0, p1, _, mass)| MassDescription {
            joint,
            position: [(p0[0] + p1[0]) / 2.0, (p0[1] + p1[1]) / 2.0, (p0[2] + p1[2]) / 2.0],
            mass,
        })
        .collect();
    RobotDescription {
        name: "arm7".into(),
        tracking_error: 0.002,
        joints,
        capsules,
        masses,
        end_effector: Some(PointDescription { joint: 6, position: [0.0, 0.0, 0.21] }),
    }
}
