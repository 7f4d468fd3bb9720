//! Learn a forward jump with the three-stage learner and print the terminal
//! error of every trial.
//!
//! `cargo run --release --example staged_learning -- 0.4`

use jumpilc::ilc::run_learning;
use jumpilc::reference::generate;
use jumpilc::task::{GroundModel, JumpTask};

fn main() {
    let dx: f64 = std::env::args().nth(1).map(|a| a.parse().expect("distance in m")).unwrap_or(0.4);
    let task = JumpTask::forward("forward", dx, GroundModel::hard());
    let refs = generate(&task).expect("nominal jump");
    let h = run_learning(&task, &refs, &task.learner).expect("learning");
    println!("{:>5} {:>5} {:>9} {:>9} {:>9} {:>8}", "trial", "stage", "e_x cm", "e_z cm", "e_θ deg", "qp ms");
    for s in &h.summaries {
        println!(
            "{:>5} {:>5} {:>9.2} {:>9.2} {:>9.2} {:>8.1}",
            s.trial,
            s.stage,
            100.0 * s.e_x,
            100.0 * s.e_z,
            s.e_theta_deg,
            1e3 * s.solve_seconds
        );
    }
    println!("stopped: {:?}", h.stop);
}
