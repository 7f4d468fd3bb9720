//! The staged learner against the two baselines on one task, written to a
//! temporary directory.

use jumpilc::experiment::compare;
use jumpilc::ilc::LearnerKind;
use jumpilc::task::{GroundModel, JumpTask};

fn main() {
    let mut task = JumpTask::forward("forward-60-hard", 0.6, GroundModel::hard());
    task.learner.max_trials = 20;
    let out = std::env::temp_dir().join("jumpilc-compare");
    let cmp = compare(&task, &[LearnerKind::Proposed, LearnerKind::PdIlc, LearnerKind::IlcMpc], &out).expect("compare");
    print!("{cmp}");
    println!("runs in {}", out.display());
}
