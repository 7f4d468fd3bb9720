//! Goal-priority transfer: start a new target from forces learned on an
//! easier one and only correct the landing.

use jumpilc::ilc::{run_learning, transfer_learning};
use jumpilc::reference::generate;
use jumpilc::task::{GroundModel, JumpTask};

fn main() {
    let source = JumpTask::forward("forward-40", 0.4, GroundModel::hard());
    let refs = generate(&source).expect("nominal jump");
    let learned = run_learning(&source, &refs, &source.learner).expect("learning");
    let l = learned.last();
    println!(
        "source: {} trials, {:?}, final error ({:+.3}, {:+.3}) m",
        learned.n_trials(),
        learned.stop,
        l.e_x,
        l.e_z
    );

    for target in [
        JumpTask::forward("forward-60", 0.6, GroundModel::hard()),
        JumpTask::onto_box("box-50-20", 0.5, 0.2, 0.33, GroundModel::hard()),
    ] {
        let mut target = target;
        target.learner.max_trials = 12;
        let h = transfer_learning(&target, &learned.reference, &learned.final_u, &target.learner).expect("transfer");
        let f = h.summaries.first().expect("trial 0");
        let l = h.last();
        println!(
            "{}: first trial ({:+.3}, {:+.3}) m -> after {} trials ({:+.3}, {:+.3}) m, {:?}",
            target.id,
            f.e_x,
            f.e_z,
            h.n_trials(),
            l.e_x,
            l.e_z,
            h.stop
        );
    }
}
