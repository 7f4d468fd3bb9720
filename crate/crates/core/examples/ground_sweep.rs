//! Sweep the ground stiffness from soft to hard in one call.

use jumpilc::experiment::sweep;
use jumpilc::task::JumpTask;

fn main() {
    let mut task = JumpTask::forward("forward-60", 0.6, Default::default());
    task.learner.max_trials = 10;
    let out = std::env::temp_dir().join("jumpilc-sweep");
    let values: Vec<String> = ["2e3", "5e3", "2e4"].map(String::from).to_vec();
    for e in sweep(&task, "ground.k_p", &values, &out).expect("sweep") {
        println!("k_p {:>4}: converged {} after {} trials ({})", e.value, e.converged, e.n_trials, e.dir.display());
    }
    println!("index: {}", out.join("index.json").display());
}
