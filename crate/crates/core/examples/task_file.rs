//! Parse a task file and see what it resolves to, including the field-named
//! error for a typo.

use jumpilc::experiment::TaskFile;

const TASK: &str = r#"
id = "box-60-10"
ground = { preset = "soft", mu = 0.5 }
learner = "proposed"
max_trials = 20

[target]
x = 0.6
z = 0.1

[box]
height = 0.1
face_x = 0.4

[payload]
mass = 2.0
"#;

fn main() {
    let task = TaskFile::parse(TASK).and_then(|f| f.to_task()).expect("valid task");
    println!("{} -> target {:?}", task.id, task.target);
    println!("ground k_p {} k_d {} mu {}", task.ground.k_p, task.ground.k_d, task.ground.mu);
    println!("payload {:?}, learner {:?}, {} trials", task.payload, task.learner.kind, task.learner.max_trials);

    let typo = TASK.replace("max_trials", "max_trails");
    match TaskFile::parse(&typo) {
        Ok(_) => println!("typo accepted?"),
        Err(e) => println!("typo rejected:\n{e}"),
    }
}
