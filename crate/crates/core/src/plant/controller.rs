use nalgebra::Vector2;

use crate::model::kinematics::{force_to_torque, LegLinks, LegState};
use crate::model::ActuatorParams;
use crate::task::LowLevelGains;

use super::actuator::actuator_clamp;

/// Output of one 1 kHz controller tick. Torques and voltages are per motor;
/// a lumped planar joint carries twice the motor torque.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorCommand {
    /// `[front thigh, front calf, rear thigh, rear calf]`.
    pub torque: [f64; 4],
    pub voltage: [f64; 4],
    /// PD share of each command before clamping.
    pub pd: [f64; 4],
}

impl MotorCommand {
    pub fn lumped_torque(&self) -> [f64; 4] {
        self.torque.map(|t| 2.0 * t)
    }
}

/// Feedforward of one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TickFeedforward {
    /// Lumped world-frame foot forces `[front, rear]`.
    Forces([Vector2<f64>; 2]),
    /// Per-motor joint torques.
    Torques([f64; 4]),
}

/// Joint PD on the references plus feedforward, clamped per motor.
///
/// Each planar joint is a left/right pair of motors, so a lumped foot force
/// is shared equally between the two.
#[allow(clippy::too_many_arguments)]
pub fn low_level_step(
    reference: &[LegState; 2],
    actual: &[LegState; 2],
    feedforward: &TickFeedforward,
    theta: f64,
    links: &LegLinks,
    gains: &LowLevelGains,
    act: &ActuatorParams,
) -> MotorCommand {
    let mut cmd = MotorCommand::default();
    for leg in 0..2 {
        let ff = match feedforward {
            TickFeedforward::Forces(f) => 0.5 * force_to_torque(f[leg], actual[leg].q, theta, links),
            TickFeedforward::Torques(t) => Vector2::new(t[2 * leg], t[2 * leg + 1]),
        };
        for j in 0..2 {
            let pd = gains.kp_joint * (reference[leg].q[j] - actual[leg].q[j])
                + gains.kd_joint * (reference[leg].qdot[j] - actual[leg].qdot[j]);
            let (tau, volts) = actuator_clamp(pd + ff[j], actual[leg].qdot[j], act);
            cmd.pd[2 * leg + j] = pd;
            cmd.torque[2 * leg + j] = tau;
            cmd.voltage[2 * leg + j] = volts;
        }
    }
    cmd
}
