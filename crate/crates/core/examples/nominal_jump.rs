//! Build the nominal jump of a task: body profile, joint targets and the
//! first-trial contact forces.

use jumpilc::reference::generate;
use jumpilc::task::{GroundModel, JumpTask};

fn main() {
    let task = JumpTask::forward("forward-60", 0.6, GroundModel::hard());
    let r = generate(&task).expect("nominal jump");
    let s = &task.schedule;
    let takeoff = r.body_ref[s.n_contact()];
    println!(
        "{} samples ({} all-leg, {} rear-leg, {} flight), dt {} s",
        s.n_total(),
        s.n_dc,
        s.n_sc,
        s.n_fl,
        s.dt
    );
    println!(
        "takeoff at x {:.3} z {:.3}, velocity ({:.3}, {:.3}) m/s, pitch {:.1}°",
        takeoff.p_x,
        takeoff.p_z,
        takeoff.v_x,
        takeoff.v_z,
        takeoff.theta.to_degrees()
    );
    let land = r.body_ref[s.n_total()];
    println!("landing at x {:.3} z {:.3} pitch {:.2}°", land.p_x, land.p_z, land.theta.to_degrees());
    for t in (0..s.n_contact()).step_by(10) {
        let u = r.u_init[t];
        println!(
            "t {t:>2} {:>2}: front ({:6.1}, {:6.1}) N  rear ({:6.1}, {:6.1}) N",
            s.phase(t).label(),
            u[0],
            u[1],
            u[2],
            u[3]
        );
    }
}
