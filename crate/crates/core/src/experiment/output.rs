use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ilc::{LearnerKind, LearningHistory, StopReason, TrialSummary};
use crate::model::Input;
use crate::plant::TrialRecord;
use crate::reference::ReferenceBundle;
use crate::task::JumpTask;

use super::ExperimentError;

/// Slack on the logged limit checks; the logs hold interval means of
/// quantities clamped at every tick.
pub const LIMIT_SLACK: f64 = 1e-9;

/// Terminal errors and flags of one trial as stored in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub stage: u8,
    pub e_x: f64,
    pub e_z: f64,
    pub e_theta_deg: f64,
    pub final_theta_deg: f64,
    pub collision: bool,
    pub bad_landing: bool,
    pub diverged: bool,
    pub joint_error: f64,
    pub max_abs_torque: f64,
    pub max_abs_voltage: f64,
    pub solve_seconds: f64,
    pub wall_seconds: f64,
}

impl From<&TrialSummary> for TrialOutcome {
    fn from(s: &TrialSummary) -> Self {
        Self {
            trial: s.trial,
            stage: s.stage,
            e_x: s.e_x,
            e_z: s.e_z,
            e_theta_deg: s.e_theta_deg,
            final_theta_deg: s.final_theta_deg,
            collision: s.collision,
            bad_landing: s.bad_landing,
            diverged: s.diverged,
            joint_error: s.joint_error,
            max_abs_torque: s.max_abs_torque,
            max_abs_voltage: s.max_abs_voltage,
            solve_seconds: s.solve_seconds,
            wall_seconds: s.wall_seconds,
        }
    }
}

/// Scalar outcome of one campaign (`summary.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task_id: String,
    pub learner: LearnerKind,
    pub converged: bool,
    /// Trials executed, including the nominal trial 0.
    pub n_trials: usize,
    pub converged_at: Option<usize>,
    pub stop: String,
    /// Logged samples outside the torque, voltage or friction limits.
    pub constraint_violations: usize,
    pub bad_landings: usize,
    pub trials: Vec<TrialOutcome>,
}

impl RunSummary {
    pub fn from_history(task: &JumpTask, history: &LearningHistory) -> Self {
        let converged = history.stop == StopReason::Converged;
        Self {
            task_id: history.task_id.clone(),
            learner: history.learner,
            converged,
            n_trials: history.n_trials(),
            converged_at: history.converged_at,
            stop: match history.stop {
                StopReason::Converged => "converged",
                StopReason::MaxTrials => "max_trials",
            }
            .into(),
            constraint_violations: history.trials.iter().map(|r| limit_violations(r, task)).sum(),
            bad_landings: history.summaries.iter().filter(|s| s.bad_landing).count(),
            trials: history.summaries.iter().map(TrialOutcome::from).collect(),
        }
    }

    pub fn any_diverged(&self) -> bool {
        self.trials.iter().any(|t| t.diverged)
    }
}

/// Logged samples of `record` with |τ| > τ_max, |v| > V_bat, a ground force
/// outside the friction cone or a pulling normal force.
pub fn limit_violations(record: &TrialRecord, task: &JumpTask) -> usize {
    let act = &task.actuator;
    let mu = task.ground.mu;
    (0..record.torques.len())
        .filter(|&t| {
            let tau = record.torques[t].iter().any(|v| v.abs() > act.tau_max + LIMIT_SLACK);
            let volt = record.voltages[t].iter().any(|v| v.abs() > act.v_bat + LIMIT_SLACK);
            let f = record.grf[t];
            let cone = (0..2).any(|leg| {
                let (fx, fz) = (f[2 * leg], f[2 * leg + 1]);
                fz < -LIMIT_SLACK || fx.abs() > mu * fz + LIMIT_SLACK
            });
            tau || volt || cone
        })
        .count()
}

/// One row of `trials.csv`; interval quantities are empty on the terminal
/// sample.
#[derive(Debug, Serialize)]
struct SampleRow<'a> {
    trial: usize,
    t: usize,
    phase: &'a str,
    x: f64,
    z: f64,
    theta: f64,
    vx: f64,
    vz: f64,
    omega: f64,
    x_ref: f64,
    z_ref: f64,
    theta_ref: f64,
    vx_ref: f64,
    vz_ref: f64,
    omega_ref: f64,
    u_fx_front: Option<f64>,
    u_fz_front: Option<f64>,
    u_fx_rear: Option<f64>,
    u_fz_rear: Option<f64>,
    tau_front_hip: Option<f64>,
    tau_front_knee: Option<f64>,
    tau_rear_hip: Option<f64>,
    tau_rear_knee: Option<f64>,
    v_front_hip: Option<f64>,
    v_front_knee: Option<f64>,
    v_rear_hip: Option<f64>,
    v_rear_knee: Option<f64>,
    f_x_front: Option<f64>,
    f_z_front: Option<f64>,
    f_x_rear: Option<f64>,
    f_z_rear: Option<f64>,
}

/// Column order of `trials.csv`.
pub const TRIALS_HEADER: [&str; 31] = [
    "trial",
    "t",
    "phase",
    "x",
    "z",
    "theta",
    "vx",
    "vz",
    "omega",
    "x_ref",
    "z_ref",
    "theta_ref",
    "vx_ref",
    "vz_ref",
    "omega_ref",
    "u_fx_front",
    "u_fz_front",
    "u_fx_rear",
    "u_fz_rear",
    "tau_front_hip",
    "tau_front_knee",
    "tau_rear_hip",
    "tau_rear_knee",
    "v_front_hip",
    "v_front_knee",
    "v_rear_hip",
    "v_rear_knee",
    "f_x_front",
    "f_z_front",
    "f_x_rear",
    "f_z_rear",
];

fn opt4(v: Option<[f64; 4]>) -> [Option<f64>; 4] {
    match v {
        Some(a) => a.map(Some),
        None => [None; 4],
    }
}

fn write_trials_csv(path: &Path, task: &JumpTask, history: &LearningHistory) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    let schedule = &task.schedule;
    let refs = &history.reference;
    for record in &history.trials {
        let n = record.n_total();
        for t in 0..=n {
            let b = record.body[t];
            let r = refs.body_ref[t];
            let interval = t < n;
            let u = if interval {
                Some(record.commanded_u.get(t).copied().unwrap_or_else(Input::zeros))
            } else {
                None
            };
            let u = opt4(u.map(|u| [u[0], u[1], u[2], u[3]]));
            let tau = opt4(interval.then(|| record.torques[t]));
            let v = opt4(interval.then(|| record.voltages[t]));
            let f = opt4(interval.then(|| {
                let g = record.grf[t];
                [g[0], g[1], g[2], g[3]]
            }));
            w.serialize(SampleRow {
                trial: record.meta.trial,
                t,
                phase: schedule.phase(t).label(),
                x: b.p_x,
                z: b.p_z,
                theta: b.theta,
                vx: b.v_x,
                vz: b.v_z,
                omega: b.omega,
                x_ref: r.p_x,
                z_ref: r.p_z,
                theta_ref: r.theta,
                vx_ref: r.v_x,
                vz_ref: r.v_z,
                omega_ref: r.omega,
                u_fx_front: u[0],
                u_fz_front: u[1],
                u_fx_rear: u[2],
                u_fz_rear: u[3],
                tau_front_hip: tau[0],
                tau_front_knee: tau[1],
                tau_rear_hip: tau[2],
                tau_rear_knee: tau[3],
                v_front_hip: v[0],
                v_front_knee: v[1],
                v_rear_hip: v[2],
                v_rear_knee: v[3],
                f_x_front: f[0],
                f_z_front: f[1],
                f_x_rear: f[2],
                f_z_rear: f[3],
            })?;
        }
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))?;
    Ok(())
}

/// Replace non-finite values so no NaN reaches a plot file.
fn finite(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::MAX.copysign(v)
    }
}

fn write_plotdata(dir: &Path, history: &LearningHistory) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let mut w = csv::Writer::from_path(dir.join("terminal_error.csv"))?;
    w.write_record(["trial", "stage", "e_x", "e_z", "e_theta_deg", "abs_e_x", "abs_e_z", "abs_e_theta_deg"])?;
    for s in &history.summaries {
        let e = [s.e_x, s.e_z, s.e_theta_deg].map(finite);
        w.write_record([
            s.trial.to_string(),
            s.stage.to_string(),
            e[0].to_string(),
            e[1].to_string(),
            e[2].to_string(),
            e[0].abs().to_string(),
            e[1].abs().to_string(),
            e[2].abs().to_string(),
        ])?;
    }
    w.flush().map_err(|e| ExperimentError::io(dir, e))?;

    let mut w = csv::Writer::from_path(dir.join("landing.csv"))?;
    w.write_record(["trial", "final_x", "final_z", "final_theta_deg", "bad_landing"])?;
    for s in &history.summaries {
        w.write_record([
            s.trial.to_string(),
            finite(s.final_x).to_string(),
            finite(s.final_z).to_string(),
            finite(s.final_theta_deg).to_string(),
            (s.bad_landing as u8).to_string(),
        ])?;
    }
    w.flush().map_err(|e| ExperimentError::io(dir, e))?;

    let mut w = csv::Writer::from_path(dir.join("joint_error.csv"))?;
    w.write_record(["trial", "joint_error_rad"])?;
    for s in &history.summaries {
        w.write_record([s.trial.to_string(), finite(s.joint_error).to_string()])?;
    }
    w.flush().map_err(|e| ExperimentError::io(dir, e))?;

    let mut w = csv::Writer::from_path(dir.join("limits.csv"))?;
    w.write_record(["trial", "max_abs_torque", "max_abs_voltage", "min_normal_force", "max_cone_excess"])?;
    for s in &history.summaries {
        w.write_record([
            s.trial.to_string(),
            finite(s.max_abs_torque).to_string(),
            finite(s.max_abs_voltage).to_string(),
            finite(s.min_normal_force).to_string(),
            finite(s.max_cone_excess).to_string(),
        ])?;
    }
    w.flush().map_err(|e| ExperimentError::io(dir, e))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| ExperimentError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Parse {
        path: Some(path.to_path_buf()),
        message: e.to_string(),
    })
}

/// Write a campaign into `dir`:
///
/// - `trials.csv`: one row per sample per trial;
/// - `summary.json`: [`RunSummary`];
/// - `plotdata/*.csv`: per-trial series;
/// - `task.json`, `reference.json`, `control.json`: what `transfer` needs.
pub fn write_run(dir: &Path, task: &JumpTask, history: &LearningHistory) -> Result<RunSummary, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    write_trials_csv(&dir.join("trials.csv"), task, history)?;
    write_plotdata(&dir.join("plotdata"), history)?;
    let summary = RunSummary::from_history(task, history);
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("task.json"), task)?;
    write_json(&dir.join("reference.json"), &history.reference)?;
    let u: Vec<[f64; 4]> = history.final_u.iter().map(|u| [u[0], u[1], u[2], u[3]]).collect();
    write_json(&dir.join("control.json"), &u)?;
    Ok(summary)
}

/// A finished run read back from disk.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub summary: RunSummary,
    pub task: JumpTask,
    pub reference: ReferenceBundle,
    pub final_u: Vec<Input>,
}

pub fn read_run(dir: &Path) -> Result<StoredRun, ExperimentError> {
    let u: Vec<[f64; 4]> = read_json(&dir.join("control.json"))?;
    Ok(StoredRun {
        summary: read_json(&dir.join("summary.json"))?,
        task: read_json(&dir.join("task.json"))?,
        reference: read_json(&dir.join("reference.json"))?,
        final_u: u.iter().map(|a| Input::from_column_slice(a)).collect(),
    })
}

pub(super) fn write_index<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    write_json(path, value)
}
