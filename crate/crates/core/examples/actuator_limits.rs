//! Torque a joint can deliver at different speeds once the supply voltage
//! and the motor's saturation are both respected.

use jumpilc::ilc::constraints::torque_window;
use jumpilc::model::ActuatorParams;
use jumpilc::plant::actuator_clamp;

fn main() {
    let act = ActuatorParams::default();
    println!("tau_max {} N·m, qdot_max {} rad/s, V_bat {} V", act.tau_max, act.qdot_max, act.v_bat);
    println!("{:>8} {:>10} {:>10} {:>12}", "qdot", "tau_lo", "tau_hi", "V at stall");
    for qdot in [-21.0, -10.0, 0.0, 5.0, 10.0, 15.0, 21.0] {
        let (lo, hi) = torque_window(qdot, &act, 1.0);
        println!("{qdot:>8.1} {lo:>10.2} {hi:>10.2} {:>12.2}", act.voltage(hi, qdot));
    }

    // A PD loop asking for 40 N·m while the joint spins at 15 rad/s gets
    // what the motor can give.
    let (tau, volts) = actuator_clamp(40.0, 15.0, &act);
    println!("asked 40 N·m at 15 rad/s -> {tau:.2} N·m at {volts:.2} V");
}
