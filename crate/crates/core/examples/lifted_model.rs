//! The trial-to-trial error model: how a change in contact forces moves the
//! whole state trajectory, checked against a direct rollout.

use jumpilc::ilc::{build_lifted, FlightErrorModel};
use jumpilc::model::Input;
use jumpilc::reference::generate;
use jumpilc::task::JumpTask;
use nalgebra::{DVector, Vector6};

fn main() {
    let task = JumpTask::forward("forward-40", 0.4, Default::default());
    let refs = generate(&task).expect("nominal jump");
    let model = refs.model(&task).expect("model");
    let s = &task.schedule;
    let lifted = build_lifted(&model, s, FlightErrorModel::Propagated).expect("lifted");
    println!("G is {} x {}", lifted.g.nrows(), lifted.g.ncols());

    // Push 10 N harder with the rear leg through the rear-leg phase.
    let mut du = DVector::zeros(4 * s.n_contact());
    for t in s.n_dc..s.n_contact() {
        du[4 * t + 3] = 10.0;
    }
    let e0 = vec![Vector6::zeros(); s.n_total() + 1];
    let predicted = lifted.predict_error(&e0, &du).expect("sizes match");

    let x0 = refs.body_ref[0].to_vector();
    let base = model.rollout(&x0, &refs.u_init, s.n_total());
    let pushed: Vec<Input> = refs
        .u_init
        .iter()
        .enumerate()
        .map(|(t, u)| u + Input::new(du[4 * t], du[4 * t + 1], du[4 * t + 2], du[4 * t + 3]))
        .collect();
    let moved = model.rollout(&x0, &pushed, s.n_total());
    let n = s.n_total();
    println!("terminal shift predicted {:.4?}", (-predicted[n]).fixed_rows::<3>(0).as_slice());
    println!("terminal shift simulated {:.4?}", (moved[n] - base[n]).fixed_rows::<3>(0).as_slice());
}
