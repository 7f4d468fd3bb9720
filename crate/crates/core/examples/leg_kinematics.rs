//! Forward and inverse kinematics of one two-link leg, and the map from a
//! foot force to joint torques.

use jumpilc::model::kinematics::{foot_in_hip_frame, force_to_torque, leg_ik, leg_jacobian};
use jumpilc::RobotParams;
use nalgebra::Vector2;

fn main() {
    let links = RobotParams::default().links();
    println!("reach {:.3}..{:.3} m", links.min_reach(), links.max_reach());

    let foot = Vector2::new(0.02, -0.25);
    let q = leg_ik(foot, &links).expect("inside the workspace");
    let back = foot_in_hip_frame(q, &links);
    println!("foot {foot:?} -> q = [{:.4}, {:.4}] rad -> foot {back:?}", q[0], q[1]);

    let j = leg_jacobian(q, &links);
    println!("J = {j:.4}");

    // Holding up half the body weight with the trunk level.
    let w = 0.5 * RobotParams::default().total_mass() * 9.81;
    let tau = force_to_torque(Vector2::new(0.0, w), q, 0.0, &links);
    println!("supporting {w:.1} N needs tau = [{:.2}, {:.2}] N·m", tau[0], tau[1]);
}
