use crate::model::ActuatorParams;

/// Clip a per-motor torque command to the saturation limit and then to the
/// supply-voltage window at the current joint speed. Returns the applied
/// torque and the estimated terminal voltage.
pub fn actuator_clamp(tau_cmd: f64, qdot: f64, act: &ActuatorParams) -> (f64, f64) {
    let saturated = tau_cmd.clamp(-act.tau_max, act.tau_max);
    let (lo, hi) = act.mdc_interval(qdot);
    // The two windows only fail to overlap beyond twice the no-load speed;
    // the torque limit then wins.
    let applied = saturated.clamp(lo, hi).clamp(-act.tau_max, act.tau_max);
    let volts = act.voltage(applied, qdot);
    (applied, volts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn stall_torque_saturates_and_draws_full_supply() {
        let act = ActuatorParams::default();
        let (tau, v) = actuator_clamp(50.0, 0.0, &act);
        assert_eq!(tau, 33.5);
        assert_relative_eq!(v, 21.5, epsilon = 1e-12);
        assert_relative_eq!(act.rho, 21.5 / 33.5, epsilon = 1e-15);
    }

    #[test]
    fn no_torque_left_at_top_speed() {
        let act = ActuatorParams::default();
        let (tau, v) = actuator_clamp(10.0, act.qdot_max, &act);
        assert_relative_eq!(tau, 0.0, epsilon = 1e-12);
        assert_relative_eq!(v, 21.5, epsilon = 1e-12);
        // Braking is still available.
        let (brake, _) = actuator_clamp(-10.0, act.qdot_max, &act);
        assert_eq!(brake, -10.0);
    }

    #[test]
    fn mdc_interval_at_rest_matches_saturation() {
        let act = ActuatorParams::default();
        let (lo, hi) = act.mdc_interval(0.0);
        assert_relative_eq!(lo, -33.5, epsilon = 1e-12);
        assert_relative_eq!(hi, 33.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn zero_command_is_feasible(qdot in -21.0f64..21.0) {
            let (tau, _) = actuator_clamp(0.0, qdot, &ActuatorParams::default());
            prop_assert_eq!(tau, 0.0);
        }

        #[test]
        fn output_respects_limits(tau in -200.0f64..200.0, qdot in -42.0f64..42.0) {
            let act = ActuatorParams::default();
            let (t, v) = actuator_clamp(tau, qdot, &act);
            prop_assert!(t.abs() <= act.tau_max);
            prop_assert!(v.abs() <= act.v_bat + 1e-12);
        }
    }
}
