use nalgebra::Vector2;

use crate::task::GroundModel;

/// Contact force on a point foot and the updated stiction anchor.
///
/// `ground_height` is the terrain height under the foot. The tangential
/// force is a spring-damper pulling the foot back to the anchor; when it
/// leaves the friction cone it is clamped and the anchor slides so the
/// spring carries exactly the clamped force.
pub fn ground_reaction(
    foot_pos: Vector2<f64>,
    foot_vel: Vector2<f64>,
    anchor: f64,
    ground_height: f64,
    ground: &GroundModel,
) -> (Vector2<f64>, f64) {
    let depth = ground_height - foot_pos.y;
    if depth <= 0.0 {
        return (Vector2::zeros(), foot_pos.x);
    }
    let f_z = (ground.k_p * depth - ground.k_d * foot_vel.y).max(0.0);
    let demand = -ground.tangential_stiffness * (foot_pos.x - anchor) - ground.tangential_damping * foot_vel.x;
    let limit = ground.mu * f_z;
    if demand.abs() <= limit {
        return (Vector2::new(demand, f_z), anchor);
    }
    let f_x = limit.copysign(demand);
    let slipped = foot_pos.x + (f_x + ground.tangential_damping * foot_vel.x) / ground.tangential_stiffness;
    (Vector2::new(f_x, f_z), slipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn no_contact_above_ground() {
        let (f, anchor) = ground_reaction(
            Vector2::new(0.3, 0.01),
            Vector2::new(1.0, -1.0),
            0.0,
            0.0,
            &GroundModel::hard(),
        );
        assert_eq!(f, Vector2::zeros());
        assert_eq!(anchor, 0.3);
    }

    #[test]
    fn hard_ground_normal_force() {
        let (f, _) = ground_reaction(
            Vector2::new(0.0, -0.001),
            Vector2::new(0.0, -0.01),
            0.0,
            0.0,
            &GroundModel::hard(),
        );
        assert_relative_eq!(f.y, 50.0, epsilon = 1e-9);
        assert_eq!(f.x, 0.0);
    }

    #[test]
    fn tangential_force_is_clamped_to_the_cone() {
        let ground = GroundModel {
            tangential_stiffness: 1e4,
            ..GroundModel::hard()
        };
        // 4 mm from the anchor demands 40 N; f_z = 50 N allows 30 N.
        let (f, anchor) = ground_reaction(
            Vector2::new(0.004, -0.001),
            Vector2::new(0.0, -0.01),
            0.0,
            0.0,
            &ground,
        );
        assert_relative_eq!(f.y, 50.0, epsilon = 1e-9);
        assert_relative_eq!(f.x, -30.0, epsilon = 1e-9);
        assert_relative_eq!(anchor, 0.001, epsilon = 1e-12);
    }

    #[test]
    fn separating_foot_pulls_nothing() {
        let (f, _) = ground_reaction(
            Vector2::new(0.0, -0.001),
            Vector2::new(0.0, 5.0),
            0.0,
            0.0,
            &GroundModel::hard(),
        );
        assert_eq!(f, Vector2::zeros());
    }

    #[test]
    fn raised_terrain() {
        let (f, _) = ground_reaction(
            Vector2::new(0.6, 0.199),
            Vector2::zeros(),
            0.6,
            0.2,
            &GroundModel::soft(),
        );
        assert_relative_eq!(f.y, 2.0, epsilon = 1e-9);
    }
}
