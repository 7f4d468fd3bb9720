//! Planar two-link leg kinematics.
//!
//! Conventions used everywhere in the crate: the thigh angle is measured
//! from the body +x axis, the calf angle is relative to the thigh, and the
//! body pitch rotates body-frame vectors into the world frame. The inverse
//! kinematics always returns the branch with the calf angle ≤ 0.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("foot target at distance {distance:.6} m exceeds the maximum reach {max:.6} m")]
    BeyondReach { distance: f64, max: f64 },
    #[error("foot target at distance {distance:.6} m is inside the minimum reach {min:.6} m")]
    InsideReach { distance: f64, min: f64 },
    #[error("non-finite foot target")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegLinks {
    pub thigh: f64,
    pub calf: f64,
}

impl LegLinks {
    pub fn max_reach(&self) -> f64 {
        self.thigh + self.calf
    }

    pub fn min_reach(&self) -> f64 {
        (self.thigh - self.calf).abs()
    }
}

/// Joint angles `(thigh, calf)` and rates of one planar leg.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LegState {
    pub q: [f64; 2],
    pub qdot: [f64; 2],
}

impl LegState {
    pub fn new(q: [f64; 2], qdot: [f64; 2]) -> Self {
        Self { q, qdot }
    }
}

/// Rotation by pitch `theta`.
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Foot position relative to the hip, in the body frame.
pub fn foot_in_hip_frame(q: [f64; 2], links: &LegLinks) -> Vector2<f64> {
    let a1 = q[0];
    let a12 = q[0] + q[1];
    Vector2::new(
        links.thigh * a1.cos() + links.calf * a12.cos(),
        links.thigh * a1.sin() + links.calf * a12.sin(),
    )
}

/// World-frame foot position of a leg whose hip sits at `hip_offset`
/// (body frame) from the trunk CoM located at `com`.
pub fn leg_fk(
    q: [f64; 2],
    links: &LegLinks,
    com: Vector2<f64>,
    hip_offset: Vector2<f64>,
    theta: f64,
) -> Vector2<f64> {
    com + rotation(theta) * (hip_offset + foot_in_hip_frame(q, links))
}

/// Joint angles placing the foot at `foot` (hip frame, body axes).
pub fn leg_ik(foot: Vector2<f64>, links: &LegLinks) -> Result<[f64; 2], KinematicsError> {
    if !foot.iter().all(|v| v.is_finite()) {
        return Err(KinematicsError::NonFinite);
    }
    let distance = foot.norm();
    let (l1, l2) = (links.thigh, links.calf);
    const SLACK: f64 = 1e-12;
    if distance > links.max_reach() + SLACK {
        return Err(KinematicsError::BeyondReach {
            distance,
            max: links.max_reach(),
        });
    }
    if distance < links.min_reach() - SLACK {
        return Err(KinematicsError::InsideReach {
            distance,
            min: links.min_reach(),
        });
    }
    let cos_calf = ((distance * distance - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let calf = -cos_calf.acos();
    let thigh = foot.y.atan2(foot.x) - (l2 * calf.sin()).atan2(l1 + l2 * calf.cos());
    Ok([thigh, calf])
}

/// `∂(foot in hip frame)/∂q`.
pub fn leg_jacobian(q: [f64; 2], links: &LegLinks) -> Matrix2<f64> {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    Matrix2::new(
        -links.thigh * s1 - links.calf * s12,
        -links.calf * s12,
        links.thigh * c1 + links.calf * c12,
        links.calf * c12,
    )
}

/// Joint torques the motors must apply for the ground to push back on the
/// foot with world-frame force `u`: `τ = −Jᵀ Rᵀ u`.
///
/// The sign turns the reaction force into an actuator command; the map is
/// otherwise the transpose of the foot Jacobian rotated into the world.
pub fn force_to_torque(u: Vector2<f64>, q: [f64; 2], theta: f64, links: &LegLinks) -> Vector2<f64> {
    -(leg_jacobian(q, links).transpose() * rotation(theta).transpose() * u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    const LINKS: LegLinks = LegLinks {
        thigh: 0.2,
        calf: 0.2,
    };

    #[test]
    fn bent_leg_sits_below_hip() {
        let foot = foot_in_hip_frame([-FRAC_PI_4, -FRAC_PI_2], &LINKS);
        assert_relative_eq!(foot.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(foot.y, -0.2828, epsilon = 1e-4);
        assert_relative_eq!(foot.y, -(0.08f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn straight_leg_reaches_full_length() {
        let foot = foot_in_hip_frame([0.0, 0.0], &LINKS);
        assert_relative_eq!(foot, Vector2::new(0.4, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn zero_pitch_hip_at_com_is_body_frame() {
        let q = [-1.1, -0.7];
        let world = leg_fk(q, &LINKS, Vector2::zeros(), Vector2::zeros(), 0.0);
        assert_eq!(world, foot_in_hip_frame(q, &LINKS));
    }

    #[test]
    fn ik_of_extended_leg() {
        let q = leg_ik(Vector2::new(0.0, -0.4), &LINKS).unwrap();
        assert_relative_eq!(q[0], -FRAC_PI_2, epsilon = 1e-7);
        assert_relative_eq!(q[1], 0.0, epsilon = 1e-7);
    }

    #[test]
    fn ik_inverts_bent_leg() {
        let q = leg_ik(Vector2::new(0.0, -(0.08f64).sqrt()), &LINKS).unwrap();
        assert_relative_eq!(q[1], -FRAC_PI_2, epsilon = 1e-9);
        assert_relative_eq!(q[0], -FRAC_PI_4, epsilon = 1e-9);
    }

    #[test]
    fn ik_rejects_unreachable() {
        let err = leg_ik(Vector2::new(0.0, -0.5), &LINKS).unwrap_err();
        assert!(matches!(err, KinematicsError::BeyondReach { .. }));
        assert!(err.to_string().contains("maximum reach"));
        let short = LegLinks {
            thigh: 0.3,
            calf: 0.1,
        };
        let err = leg_ik(Vector2::new(0.0, -0.1), &short).unwrap_err();
        assert!(matches!(err, KinematicsError::InsideReach { .. }));
    }

    #[test]
    fn jacobian_determinant() {
        let straight = leg_jacobian([-FRAC_PI_2, 0.0], &LINKS);
        assert_relative_eq!(straight.determinant(), 0.0, epsilon = 1e-15);
        let bent = leg_jacobian([FRAC_PI_4, -FRAC_PI_2], &LINKS);
        assert_relative_eq!(bent.determinant().abs(), 0.04, epsilon = 1e-12);
    }

    #[test]
    fn axial_force_on_straight_leg_loads_no_joint() {
        let tau = force_to_torque(Vector2::new(0.0, 150.0), [-FRAC_PI_2, 0.0], 0.0, &LINKS);
        assert_relative_eq!(tau[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(tau[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn torque_map_is_linear() {
        let q = [-1.0, -1.2];
        assert_eq!(force_to_torque(Vector2::zeros(), q, 0.3, &LINKS), Vector2::zeros());
        let u = Vector2::new(12.0, 80.0);
        let t1 = force_to_torque(u, q, 0.3, &LINKS);
        let t2 = force_to_torque(2.0 * u, q, 0.3, &LINKS);
        assert_eq!(t2, 2.0 * t1);
    }

    #[test]
    fn vertical_push_with_bent_knee_needs_knee_torque() {
        // Knee in front of the foot: pushing the body up must extend the knee.
        let q = leg_ik(Vector2::new(0.0, -0.28), &LINKS).unwrap();
        let tau = force_to_torque(Vector2::new(0.0, 100.0), q, 0.0, &LINKS);
        assert!(tau[1].abs() > 1.0);
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn fk_ik_round_trip(radius in 0.0005f64..0.3995, angle in -3.1f64..3.1) {
            let target = Vector2::new(radius * angle.cos(), radius * angle.sin());
            let q = leg_ik(target, &LINKS).unwrap();
            prop_assert!(q[1] <= 0.0);
            let back = foot_in_hip_frame(q, &LINKS);
            prop_assert!((back - target).amax() < 1e-9, "{back} vs {target}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn jacobian_matches_central_differences(q0 in -2.0f64..2.0, q1 in -2.0f64..2.0) {
            let h = 1e-7;
            let jac = leg_jacobian([q0, q1], &LINKS);
            for col in 0..2 {
                let mut plus = [q0, q1];
                let mut minus = [q0, q1];
                plus[col] += h;
                minus[col] -= h;
                let fd = (foot_in_hip_frame(plus, &LINKS) - foot_in_hip_frame(minus, &LINKS)) / (2.0 * h);
                prop_assert!((fd - jac.column(col)).amax() < 1e-6);
            }
        }

        #[test]
        fn force_to_torque_superposes(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            ux in -200.0f64..200.0, uz in -200.0f64..200.0,
            vx in -200.0f64..200.0, vz in -200.0f64..200.0,
            q0 in -2.5f64..0.5, q1 in -2.5f64..0.0, theta in -0.6f64..0.6,
        ) {
            let (u, v) = (Vector2::new(ux, uz), Vector2::new(vx, vz));
            let q = [q0, q1];
            let lhs = force_to_torque(a * u + b * v, q, theta, &LINKS);
            let rhs = a * force_to_torque(u, q, theta, &LINKS) + b * force_to_torque(v, q, theta, &LINKS);
            prop_assert!((lhs - rhs).amax() < 1e-10);
        }
    }
}
