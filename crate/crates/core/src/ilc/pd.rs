use std::time::Instant;

use nalgebra::Vector2;

use crate::model::kinematics::LegState;
use crate::model::ActuatorParams;
use crate::plant::{actuator_clamp, run_trial, Feedforward, TrialRecord};
use crate::reference::ReferenceBundle;
use crate::task::JumpTask;

use super::constraints::motor_torque_map;
use super::learning::{accepted, LearningHistory, StopReason, TrialSummary};
use super::{IlcError, LearnerConfig, PdIlcGains};

/// Per-motor feedforward equivalent to the nominal contact forces; zero
/// for swing legs and in flight.
pub fn initial_joint_feedforward(task: &JumpTask, refs: &ReferenceBundle) -> Vec<[f64; 4]> {
    let schedule = &task.schedule;
    let links = task.robot.links();
    (0..schedule.n_total())
        .map(|t| {
            let mut tau = [0.0; 4];
            if t < schedule.n_contact() {
                let phase = schedule.phase(t);
                for leg in 0..2 {
                    let stance = if leg == 0 { phase.front_stance() } else { phase.rear_stance() };
                    if !stance {
                        continue;
                    }
                    let u = refs.u_init[t];
                    let f = Vector2::new(u[2 * leg], u[2 * leg + 1]);
                    let m = motor_torque_map(refs.joint_ref[t][leg].q, refs.body_ref[t].theta, &links) * f;
                    tau[2 * leg] = m[0];
                    tau[2 * leg + 1] = m[1];
                }
            }
            tau
        })
        .collect()
}

/// `τ_{k+1}(t) = τ_k(t) + L_p e_q(t+1) + L_d ė_q(t+1)`, clipped to what the
/// motor can deliver at the measured speed.
pub fn pd_type_ilc_step(
    tau_k: &[[f64; 4]],
    record: &TrialRecord,
    joint_ref: &[[LegState; 2]],
    gains: &PdIlcGains,
    act: &ActuatorParams,
) -> Vec<[f64; 4]> {
    tau_k
        .iter()
        .enumerate()
        .map(|(t, tau)| {
            let (r, y) = (&joint_ref[t + 1], &record.joints[t + 1]);
            let mut next = [0.0; 4];
            for leg in 0..2 {
                for j in 0..2 {
                    let m = 2 * leg + j;
                    let e = r[leg].q[j] - y[leg].q[j];
                    let de = r[leg].qdot[j] - y[leg].qdot[j];
                    let raw = tau[m] + gains.l_p * e + gains.l_d * de;
                    next[m] = actuator_clamp(raw, record.joints[t][leg].qdot[j], act).0;
                }
            }
            next
        })
        .collect()
}

/// Model-free baseline: learn joint-torque feedforward from joint tracking
/// errors. Stops on the same terminal tolerances as the force learners.
pub fn run_pd_learning(task: &JumpTask, refs: &ReferenceBundle, config: &LearnerConfig) -> Result<LearningHistory, IlcError> {
    let mut tau = initial_joint_feedforward(task, refs);
    let mut trials = Vec::new();
    let mut summaries = Vec::new();
    let mut k = 0;
    let stop = loop {
        let started = Instant::now();
        let mut record = run_trial(Feedforward::JointTorques(&tau), refs, task);
        record.meta.trial = k;
        record.meta.learner = config.kind.label().to_string();
        let summary = TrialSummary::from_record(&record, refs, 0);
        log::info!(
            "{} pd-ilc trial {k}: e = ({:+.4}, {:+.4}, {:+.2}°), joint error {:.4} rad",
            task.id,
            summary.e_x,
            summary.e_z,
            summary.e_theta_deg,
            summary.joint_error
        );
        summaries.push(summary);
        let done = accepted(&record, config);
        if done || k >= config.max_trials {
            summaries.last_mut().expect("pushed above").wall_seconds = started.elapsed().as_secs_f64();
            trials.push(record);
            break if done { StopReason::Converged } else { StopReason::MaxTrials };
        }
        tau = pd_type_ilc_step(&tau, &record, &refs.joint_ref, &config.pd_gains, &task.actuator);
        summaries.last_mut().expect("pushed above").wall_seconds = started.elapsed().as_secs_f64();
        trials.push(record);
        k += 1;
    };
    let converged_at = (stop == StopReason::Converged).then(|| summaries.len() - 1);
    Ok(LearningHistory {
        task_id: task.id.clone(),
        learner: config.kind,
        trials,
        summaries,
        stop,
        converged_at,
        final_u: Vec::new(),
        reference: refs.clone(),
    })
}
