//! Run one jump on the simulated robot with the nominal forces and look at
//! where it lands.

use jumpilc::plant::{run_trial, Feedforward};
use jumpilc::reference::generate;
use jumpilc::task::{GroundModel, JumpTask};

fn main() {
    for ground in [GroundModel::hard(), GroundModel::soft()] {
        let task = JumpTask::forward("forward-40", 0.4, ground);
        let refs = generate(&task).expect("nominal jump");
        let record = run_trial(Feedforward::Forces(&refs.u_init), &refs, &task);
        let x = record.final_state();
        let e = record.final_error();
        println!(
            "k_p {:>6}: lands at x {:.3} z {:.3} pitch {:+.1}°; error ({:+.3}, {:+.3}) m, {:+.1}°",
            ground.k_p,
            x.p_x,
            x.p_z,
            x.theta.to_degrees(),
            e[0],
            e[1],
            e[2].to_degrees()
        );
        println!(
            "  peak |tau| {:.1} N·m, peak |V| {:.1} V, failure {:?}",
            record.extremes.max_abs_torque, record.extremes.max_abs_voltage, record.failure
        );
    }
}
