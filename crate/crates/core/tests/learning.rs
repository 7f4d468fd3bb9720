use std::path::PathBuf;

use nalgebra::{DVector, Vector6};

use jumpilc::experiment::load_task;
use jumpilc::ilc::lifted::stack_inputs;
use jumpilc::ilc::{
    assemble_constraints, build_lifted, ilc_step, run_learning, transfer_learning, LearnerKind, StageSchedule,
};
use jumpilc::model::discretize;
use jumpilc::plant::{run_trial, Feedforward, TrialRecord};
use jumpilc::qp::{QpSettings, QpStatus};
use jumpilc::reference::{generate, ReferenceBundle};
use jumpilc::JumpTask;

fn task(name: &str) -> JumpTask {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../tasks").join(name);
    load_task(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())).0
}

fn nominal(task: &JumpTask) -> (ReferenceBundle, TrialRecord) {
    let refs = generate(task).expect("nominal jump");
    let record = run_trial(Feedforward::Forces(&refs.u_init), &refs, task);
    (refs, record)
}

#[test]
fn updates_add_the_qp_step_and_respect_the_constraints() {
    let task = task("forward-40-hard.toml");
    let (refs, record) = nominal(&task);
    let schedule = &task.schedule;
    let model = discretize(&record.feet[..schedule.n_contact()], schedule, &task.robot).unwrap();
    let lifted = build_lifted(&model, schedule, task.learner.flight_error_model).unwrap();
    let constraints = assemble_constraints(
        &record,
        &task.actuator,
        &task.robot.links(),
        task.ground.mu,
        schedule,
        &task.limits,
    );
    let settings = QpSettings::default();
    for stage in 1..=3 {
        let window = StageSchedule::window(stage, schedule);
        let up = ilc_step(
            &refs.u_init,
            &record.errors,
            &lifted,
            &task.learner.weights,
            window,
            &constraints,
            &settings,
        )
        .unwrap();
        let step = stack_inputs(&up.u_next) - stack_inputs(&refs.u_init);
        assert!((step - &up.du).amax() < 1e-12, "stage {stage}");
        if up.status == QpStatus::Optimal {
            assert!(constraints.violation(&up.du) <= 1e-6, "stage {stage}");
            assert!(constraints.violation_of_inputs(&up.u_next) <= 1e-6, "stage {stage}");
            if constraints.violation(&DVector::zeros(up.du.len())) <= 1e-9 {
                assert!(up.objective <= up.objective_at_zero + 1e-9 * up.objective_at_zero.abs().max(1.0));
            }
        } else {
            assert!(up.fell_back);
            assert_eq!(up.du.amax(), 0.0);
        }
    }
}

#[test]
fn terminal_stage_ignores_intermediate_errors() {
    let task = task("forward-40-hard.toml");
    let (refs, record) = nominal(&task);
    let schedule = &task.schedule;
    let model = discretize(&record.feet[..schedule.n_contact()], schedule, &task.robot).unwrap();
    let lifted = build_lifted(&model, schedule, task.learner.flight_error_model).unwrap();
    let constraints = assemble_constraints(
        &record,
        &task.actuator,
        &task.robot.links(),
        task.ground.mu,
        schedule,
        &task.limits,
    );
    let window = StageSchedule::window(3, schedule);
    let step = |errors: &[Vector6<f64>]| {
        ilc_step(
            &refs.u_init,
            errors,
            &lifted,
            &task.learner.weights,
            window,
            &constraints,
            &QpSettings::default(),
        )
        .unwrap()
        .du
    };
    let base = step(&record.errors);
    let mut scrambled = record.errors.clone();
    for (t, e) in scrambled.iter_mut().enumerate().take(schedule.n_total()) {
        *e += Vector6::repeat(0.1 * (t as f64).sin());
    }
    assert_eq!(base, step(&scrambled));
    scrambled[schedule.n_total()][0] += 0.05;
    assert_ne!(base, step(&scrambled));
}

#[test]
fn campaign_logs_are_consistent_and_repeatable() {
    let mut task = task("forward-40-hard.toml");
    task.learner.max_trials = 3;
    let refs = generate(&task).unwrap();
    let a = run_learning(&task, &refs, &task.learner).unwrap();
    let b = run_learning(&task, &refs, &task.learner).unwrap();
    assert_eq!(a.trials, b.trials);
    assert_eq!(a.final_u, b.final_u);

    let n = task.schedule.n_total();
    assert_eq!(a.trials.len(), a.summaries.len());
    assert_eq!(a.n_trials(), a.trials.len());
    for (k, r) in a.trials.iter().enumerate() {
        assert_eq!(r.meta.trial, k);
        assert_eq!(r.body.len(), n + 1);
        assert_eq!(r.errors.len(), n + 1);
        assert_eq!(r.commanded_u.len(), task.schedule.n_contact());
        for t in 0..=n {
            let diff = refs.body_ref[t].to_vector() - r.body[t].to_vector() - r.errors[t];
            assert!(diff.amax() < 1e-12, "trial {k} sample {t}");
        }
    }
    if let Some(k) = a.converged_at {
        assert!(task.learner.tolerances.satisfied(&a.trials[k].final_error()));
    }
    assert_eq!(a.trials.last().unwrap().commanded_u, a.final_u);
}

#[test]
fn ground_forces_stay_unilateral_and_inside_the_cone() {
    for name in ["forward-40-hard.toml", "forward-60-soft.toml", "box-50-20.toml"] {
        let task = task(name);
        let (_, record) = nominal(&task);
        let mu = task.ground.mu;
        for (t, f) in record.grf.iter().enumerate() {
            for leg in 0..2 {
                let (ft, fn_) = (f[2 * leg], f[2 * leg + 1]);
                assert!(fn_ >= -1e-9, "{name} t={t} leg {leg}: f_n {fn_}");
                assert!(ft.abs() <= mu * fn_ + 1e-6, "{name} t={t} leg {leg}: |f_t| {ft} > μ f_n");
            }
        }
    }
}

#[test]
fn reference_flight_is_ballistic_and_ends_on_the_goal() {
    for name in ["forward-40-hard.toml", "forward-60-hard.toml", "box-50-20.toml", "box-60-10.toml"] {
        let task = task(name);
        let refs = generate(&task).unwrap();
        let s = &task.schedule;
        let g = task.robot.gravity;
        for t in s.n_contact()..s.n_total() {
            let (a, b) = (refs.body_ref[t], refs.body_ref[t + 1]);
            assert!((b.v_x - a.v_x).abs() < 1e-9, "{name} t={t}");
            assert!((b.omega - a.omega).abs() < 1e-9, "{name} t={t}");
            assert!((b.v_z - (a.v_z - g * s.dt)).abs() < 1e-9, "{name} t={t}");
        }
        let end = refs.body_ref[s.n_total()];
        assert!((end.p_x - refs.goal.x).abs() < 1e-9, "{name}");
        assert!((end.p_z - refs.goal.z).abs() < 1e-9, "{name}");
        assert!((end.theta - refs.goal.theta).abs() < 1e-9, "{name}");
        let start = refs.body_ref[0];
        assert!((refs.goal.x - start.p_x - task.target.x).abs() < 1e-9, "{name}");
    }
}

#[test]
fn transfer_replays_the_source_inputs_first() {
    let mut task = task("forward-40-hard.toml");
    task.learner.max_trials = 2;
    let refs = generate(&task).unwrap();
    let source = run_learning(&task, &refs, &task.learner).unwrap();
    let again = transfer_learning(&task, &source.reference, &source.final_u, &task.learner).unwrap();
    let (a, b) = (source.trials.last().unwrap(), &again.trials[0]);
    assert_eq!(a.commanded_u, b.commanded_u);
    assert_eq!(a.body, b.body);
    for (x, y) in a.errors.iter().zip(&b.errors) {
        assert!((x - y).amax() < 1e-9);
    }
    assert_eq!(again.learner, LearnerKind::Proposed);
    assert!(again.trials.iter().skip(1).all(|r| r.meta.stage == 3));
}
