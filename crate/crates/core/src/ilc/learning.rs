use std::time::Instant;

use nalgebra::Vector6;
use serde::Serialize;

use crate::model::{discretize, Input};
use crate::plant::{run_trial, Feedforward, TrialRecord};
use crate::qp::{QpSettings, QpStatus};
use crate::reference::ReferenceBundle;
use crate::task::JumpTask;

use super::constraints::assemble_constraints;
use super::lifted::build_lifted;
use super::pd::run_pd_learning;
use super::update::{ilc_step, IlcUpdate, Window};
use super::{IlcError, LearnerConfig, LearnerKind, StageSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Terminal error inside the tolerances.
    Converged,
    /// The update budget ran out.
    MaxTrials,
}

/// Per-trial numbers that end up in `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    /// Stage of the update that produced this trial's inputs (0 for the
    /// first trial).
    pub stage: u8,
    pub e_x: f64,
    pub e_z: f64,
    pub e_theta_deg: f64,
    pub final_x: f64,
    pub final_z: f64,
    pub final_theta_deg: f64,
    pub max_abs_torque: f64,
    pub max_abs_voltage: f64,
    pub min_normal_force: f64,
    pub max_cone_excess: f64,
    pub collision: bool,
    pub bad_landing: bool,
    pub diverged: bool,
    /// Mean absolute joint tracking error, rad.
    pub joint_error: f64,
    /// Solve time of the update computed from this trial, s.
    pub solve_seconds: f64,
    pub qp_status: Option<String>,
    pub fell_back: bool,
    /// Trial plus update, wall-clock s.
    pub wall_seconds: f64,
}

impl TrialSummary {
    pub fn from_record(record: &TrialRecord, refs: &ReferenceBundle, stage: u8) -> Self {
        let e = record.final_error();
        let x = record.final_state();
        Self {
            trial: record.meta.trial,
            stage,
            e_x: e[0],
            e_z: e[1],
            e_theta_deg: e[2].to_degrees(),
            final_x: x.p_x,
            final_z: x.p_z,
            final_theta_deg: x.theta.to_degrees(),
            max_abs_torque: record.extremes.max_abs_torque,
            max_abs_voltage: record.extremes.max_abs_voltage,
            min_normal_force: record.extremes.min_normal_force,
            max_cone_excess: record.extremes.max_cone_excess,
            collision: record.failure.collision_at.is_some(),
            bad_landing: record.failure.bad_landing,
            diverged: record.failure.diverged_at.is_some(),
            joint_error: record.joint_tracking_error(&refs.joint_ref),
            solve_seconds: 0.0,
            qp_status: None,
            fell_back: false,
            wall_seconds: 0.0,
        }
    }

    pub fn terminal_error(&self) -> Vector6<f64> {
        Vector6::new(self.e_x, self.e_z, self.e_theta_deg.to_radians(), 0.0, 0.0, 0.0)
    }

    fn note_update(&mut self, update: &IlcUpdate) {
        self.solve_seconds = update.solve_seconds;
        self.qp_status = Some(format!("{:?}", update.status));
        self.fell_back = update.fell_back;
    }
}

/// Everything one learning campaign produced.
#[derive(Debug, Clone)]
pub struct LearningHistory {
    pub task_id: String,
    pub learner: LearnerKind,
    pub trials: Vec<TrialRecord>,
    pub summaries: Vec<TrialSummary>,
    pub stop: StopReason,
    /// First trial whose terminal error met the tolerances.
    pub converged_at: Option<usize>,
    /// Inputs of the last trial run.
    pub final_u: Vec<Input>,
    pub reference: ReferenceBundle,
}

impl LearningHistory {
    pub fn last(&self) -> &TrialSummary {
        self.summaries.last().expect("a campaign runs at least one trial")
    }

    /// Terminal `(e_x, e_z, e_θ)` of every trial.
    pub fn terminal_errors(&self) -> Vec<[f64; 3]> {
        self.summaries.iter().map(|s| [s.e_x, s.e_z, s.e_theta_deg]).collect()
    }

    pub fn n_trials(&self) -> usize {
        self.summaries.len()
    }
}

fn tag(mut record: TrialRecord, trial: usize, learner: LearnerKind, stage: u8) -> TrialRecord {
    record.meta.trial = trial;
    record.meta.learner = learner.label().to_string();
    record.meta.stage = stage;
    record
}

/// Met the tolerances without crashing.
pub(crate) fn accepted(record: &TrialRecord, config: &LearnerConfig) -> bool {
    config.tolerances.satisfied(&record.final_error()) && !record.failure.any()
}

/// Force-learning loop shared by the staged learner, the full-horizon
/// baseline and transfer. `stage_of(k)` picks the stage of the update after
/// trial `k`; `None` means every sample is weighted.
fn learn_forces(
    task: &JumpTask,
    refs: &ReferenceBundle,
    u0: Vec<Input>,
    config: &LearnerConfig,
    stage_of: &dyn Fn(usize) -> Option<u8>,
) -> Result<LearningHistory, IlcError> {
    let schedule = &task.schedule;
    let n_contact = schedule.n_contact();
    let links = task.robot.links();
    let settings = QpSettings::default();
    let mut u = u0;
    let mut trials = Vec::new();
    let mut summaries: Vec<TrialSummary> = Vec::new();
    let mut converged_at = None;
    let mut stage_in = 0u8;
    let mut k = 0;
    let stop = loop {
        let started = Instant::now();
        let record = tag(run_trial(Feedforward::Forces(&u), refs, task), k, config.kind, stage_in);
        let e = record.final_error();
        log::info!(
            "{} {} trial {k}: e = ({:+.4}, {:+.4}, {:+.2}°){}",
            task.id,
            config.kind.label(),
            e[0],
            e[1],
            e[2].to_degrees(),
            if record.failure.any() { " [failure]" } else { "" }
        );
        summaries.push(TrialSummary::from_record(&record, refs, stage_in));
        let done = accepted(&record, config);
        if done {
            converged_at = Some(k);
        }
        if done || k >= config.max_trials {
            summaries.last_mut().expect("pushed above").wall_seconds = started.elapsed().as_secs_f64();
            trials.push(record);
            break if done { StopReason::Converged } else { StopReason::MaxTrials };
        }

        let stage = stage_of(k);
        let window = match stage {
            Some(s) => StageSchedule::window(s, schedule),
            None => Window {
                first: 1,
                last: schedule.n_total(),
            },
        };
        let model = discretize(&record.feet[..n_contact], schedule, &task.robot)?;
        let lifted = build_lifted(&model, schedule, config.flight_error_model)?;
        let mut constraints =
            assemble_constraints(&record, &task.actuator, &links, task.ground.mu, schedule, &task.limits);
        if let Some(d) = config.step_limit {
            constraints = constraints.with_step_limit(d);
        }
        let update = ilc_step(&u, &record.errors, &lifted, &config.weights, window, &constraints, &settings)?;
        if update.status != QpStatus::Optimal {
            log::warn!("trial {k}: update fell back to the previous inputs");
        }
        let last = summaries.last_mut().expect("pushed above");
        last.note_update(&update);
        last.wall_seconds = started.elapsed().as_secs_f64();
        u = update.u_next;
        stage_in = stage.unwrap_or(0);
        trials.push(record);
        k += 1;
    };
    Ok(LearningHistory {
        task_id: task.id.clone(),
        learner: config.kind,
        trials,
        summaries,
        stop,
        converged_at,
        final_u: u,
        reference: refs.clone(),
    })
}

/// Learn a jump from the nominal forces of `refs` with the learner chosen in
/// `config`.
pub fn run_learning(task: &JumpTask, refs: &ReferenceBundle, config: &LearnerConfig) -> Result<LearningHistory, IlcError> {
    match config.kind {
        LearnerKind::Proposed => {
            let stages = config.stages;
            learn_forces(task, refs, refs.u_init.clone(), config, &|k| Some(stages.stage(k)))
        }
        LearnerKind::IlcMpc => learn_forces(task, refs, refs.u_init.clone(), config, &|_| None),
        LearnerKind::PdIlc => run_pd_learning(task, refs, config),
    }
}

/// Goal-priority transfer: replay the learned inputs `u_source` of a
/// previous task against a reference whose flight ends on `task.target`,
/// then run stage-3 updates only.
pub fn transfer_learning(
    task: &JumpTask,
    source_refs: &ReferenceBundle,
    u_source: &[Input],
    config: &LearnerConfig,
) -> Result<LearningHistory, IlcError> {
    let refs = source_refs.retarget(task, task.target);
    learn_forces(task, &refs, u_source.to_vec(), config, &|_| Some(3))
}
