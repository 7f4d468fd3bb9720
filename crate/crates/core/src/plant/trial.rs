use nalgebra::{Vector2, Vector6};
use serde::{Deserialize, Serialize};

use crate::model::{BodyState, FootGeometry, Input, LegState};
use crate::reference::ReferenceBundle;
use crate::task::{BoxObstacle, JumpTask};

use super::articulated::{ArticulatedRobot, PlantState};
use super::controller::{low_level_step, TickFeedforward};
use super::ground::ground_reaction;

/// Low-level control period, s.
pub const CONTROL_DT: f64 = 1e-3;
/// Physics substeps per control tick; explicit contact damping on hard
/// ground is unstable at 1 ms.
pub const SUBSTEPS: usize = 20;
/// Landing pitch beyond which a landing is considered unrecoverable.
pub const BAD_LANDING_ANGLE: f64 = 70.0 * std::f64::consts::PI / 180.0;

/// Feedforward applied during a trial.
#[derive(Debug, Clone, Copy)]
pub enum Feedforward<'a> {
    /// Lumped foot forces, one per contact sample.
    Forces(&'a [Input]),
    /// Per-motor joint torques, one per sample of the whole horizon.
    JointTorques(&'a [[f64; 4]]),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub trial: usize,
    pub task_id: String,
    pub learner: String,
    pub stage: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    /// Control tick at which the state became non-finite.
    pub diverged_at: Option<usize>,
    /// Control tick at which a foot, knee or trunk corner entered the box
    /// through its face.
    pub collision_at: Option<usize>,
    pub bad_landing: bool,
}

impl TrialFailure {
    pub fn any(&self) -> bool {
        self.diverged_at.is_some() || self.collision_at.is_some() || self.bad_landing
    }
}

/// Worst values seen at any 1 kHz tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TickExtremes {
    pub max_abs_torque: f64,
    pub max_abs_voltage: f64,
    pub min_normal_force: f64,
    /// `max(|f_x| − μ f_z)`.
    pub max_cone_excess: f64,
}

/// Logged outcome of one jump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub meta: TrialMeta,
    /// Whole-robot CoM position and velocity, trunk pitch and pitch rate;
    /// `N + 1` samples.
    pub body: Vec<BodyState>,
    pub joints: Vec<[LegState; 2]>,
    /// Foot positions relative to the CoM, per sample.
    pub feet: Vec<FootGeometry>,
    /// Mean realised ground reaction per sample interval (`N` entries).
    pub grf: Vec<Input>,
    pub commanded_u: Vec<Input>,
    /// Joint-torque feedforward, when the trial was driven by one.
    pub joint_ff: Option<Vec<[f64; 4]>>,
    /// Mean per-motor torque and voltage per sample interval.
    pub torques: Vec<[f64; 4]>,
    pub voltages: Vec<[f64; 4]>,
    /// Mean PD share of the per-motor command per sample interval.
    pub pd_torques: Vec<[f64; 4]>,
    pub extremes: TickExtremes,
    /// `x_ref − x` per sample.
    pub errors: Vec<Vector6<f64>>,
    pub failure: TrialFailure,
}

impl TrialRecord {
    pub fn n_total(&self) -> usize {
        self.body.len() - 1
    }

    /// Realised forces over the contact samples.
    pub fn applied_u(&self) -> &[Input] {
        &self.grf[..self.commanded_u.len().min(self.grf.len())]
    }

    pub fn final_error(&self) -> Vector6<f64> {
        self.errors[self.n_total()]
    }

    pub fn final_state(&self) -> BodyState {
        self.body[self.n_total()]
    }

    /// Mean absolute joint tracking error over all samples and joints.
    pub fn joint_tracking_error(&self, joint_ref: &[[LegState; 2]]) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (actual, reference) in self.joints.iter().zip(joint_ref) {
            for leg in 0..2 {
                for j in 0..2 {
                    sum += (actual[leg].q[j] - reference[leg].q[j]).abs();
                    count += 1;
                }
            }
        }
        sum / count as f64
    }
}

fn terrain_height(x: f64, obstacle: Option<&BoxObstacle>) -> f64 {
    match obstacle {
        Some(b) if x >= b.face_x => b.height,
        _ => 0.0,
    }
}

fn body_state(robot: &ArticulatedRobot, st: &PlantState) -> BodyState {
    let (p, v) = robot.com(st);
    BodyState {
        p_x: p.x,
        p_z: p.y,
        theta: st.s[2],
        v_x: v.x,
        v_z: v.y,
        omega: st.sdot[2],
    }
}

fn leg_states(st: &PlantState) -> [LegState; 2] {
    [0, 1].map(|leg| LegState::new(st.joint_angles(leg), st.joint_rates(leg)))
}

fn foot_geometry(robot: &ArticulatedRobot, st: &PlantState) -> FootGeometry {
    let (com, _) = robot.com(st);
    FootGeometry {
        r_front: robot.foot(0, st).pos - com,
        r_rear: robot.foot(1, st).pos - com,
    }
}

/// Initial plant state: CoM and joints from the first reference sample,
/// at rest, lowered so the feet carry the weight on the compliant ground.
pub fn initial_state(robot: &ArticulatedRobot, refs: &ReferenceBundle, task: &JumpTask) -> PlantState {
    let b0 = refs.body_ref[0];
    let q0 = refs.joint_ref[0].map(|l| l.q);
    let mut st = robot.state_with_com(b0.position(), b0.theta, q0);
    let foot_z = 0.5 * (robot.foot(0, &st).pos.y + robot.foot(1, &st).pos.y);
    let sink = robot.total_mass() * robot.params.gravity / (2.0 * task.ground.k_p);
    st.s[1] -= foot_z + sink;
    st
}

/// Execute one jump on the articulated plant.
pub fn run_trial(ff: Feedforward<'_>, refs: &ReferenceBundle, task: &JumpTask) -> TrialRecord {
    let schedule = &task.schedule;
    let n_total = schedule.n_total();
    let n_contact = schedule.n_contact();
    let ticks = (schedule.dt / CONTROL_DT).round().max(1.0) as usize;
    let h = schedule.dt / (ticks * SUBSTEPS) as f64;
    let robot = ArticulatedRobot::new(task.robot, task.payload);
    let links = task.robot.links();
    let mut obstacle = task.obstacle;

    let mut st = initial_state(&robot, refs, task);
    let mut anchors = [robot.foot(0, &st).pos.x, robot.foot(1, &st).pos.x];
    let mut tracked = tracked_points(&robot, &st);

    let mut body = Vec::with_capacity(n_total + 1);
    let mut joints = Vec::with_capacity(n_total + 1);
    let mut feet = Vec::with_capacity(n_total + 1);
    let mut grf = Vec::with_capacity(n_total);
    let mut torques = Vec::with_capacity(n_total);
    let mut voltages = Vec::with_capacity(n_total);
    let mut pd_torques = Vec::with_capacity(n_total);
    let mut failure = TrialFailure::default();
    let mut extremes = TickExtremes {
        min_normal_force: f64::INFINITY,
        ..TickExtremes::default()
    };

    let mut tick = 0usize;
    for t in 0..n_total {
        body.push(body_state(&robot, &st));
        joints.push(leg_states(&st));
        feet.push(foot_geometry(&robot, &st));
        let mut force_sum = Input::zeros();
        let mut torque_sum = [0.0; 4];
        let mut volt_sum = [0.0; 4];
        let mut pd_sum = [0.0; 4];
        for j in 0..ticks {
            let alpha = j as f64 / ticks as f64;
            let reference = interpolate_legs(&refs.joint_ref[t], &refs.joint_ref[t + 1], alpha);
            let tick_ff = match ff {
                Feedforward::Forces(u) => {
                    let mut f = [Vector2::zeros(); 2];
                    if t < n_contact {
                        let phase = schedule.phase(t);
                        if phase.front_stance() {
                            f[0] = Vector2::new(u[t][0], u[t][1]);
                        }
                        f[1] = Vector2::new(u[t][2], u[t][3]);
                    }
                    TickFeedforward::Forces(f)
                }
                Feedforward::JointTorques(tau) => TickFeedforward::Torques(tau[t]),
            };
            let cmd = low_level_step(
                &reference,
                &leg_states(&st),
                &tick_ff,
                st.s[2],
                &links,
                &task.gains,
                &task.actuator,
            );
            for m in 0..4 {
                torque_sum[m] += cmd.torque[m];
                volt_sum[m] += cmd.voltage[m];
                pd_sum[m] += cmd.pd[m];
                extremes.max_abs_torque = extremes.max_abs_torque.max(cmd.torque[m].abs());
                extremes.max_abs_voltage = extremes.max_abs_voltage.max(cmd.voltage[m].abs());
            }
            let lumped = cmd.lumped_torque();
            for _ in 0..SUBSTEPS {
                let mut forces = [Vector2::zeros(); 2];
                for leg in 0..2 {
                    let foot = robot.foot(leg, &st);
                    let vel = foot.velocity(&st.sdot);
                    let height = terrain_height(foot.pos.x, obstacle.as_ref());
                    let (f, anchor) = ground_reaction(foot.pos, vel, anchors[leg], height, &task.ground);
                    forces[leg] = f;
                    anchors[leg] = anchor;
                    if f.y > 0.0 {
                        extremes.min_normal_force = extremes.min_normal_force.min(f.y);
                    }
                    extremes.max_cone_excess = extremes.max_cone_excess.max(f.x.abs() - task.ground.mu * f.y);
                }
                for leg in 0..2 {
                    force_sum[2 * leg] += forces[leg].x;
                    force_sum[2 * leg + 1] += forces[leg].y;
                }
                let Some(acc) = robot.acceleration(&st, &lumped, &forces) else {
                    failure.diverged_at.get_or_insert(tick);
                    break;
                };
                st.sdot += acc * h;
                st.s += st.sdot * h;
                if !st.is_finite() || st.s.amax() > 1e3 {
                    failure.diverged_at.get_or_insert(tick);
                    break;
                }
                if let Some(b) = obstacle {
                    let now = tracked_points(&robot, &st);
                    let hit = now
                        .iter()
                        .zip(tracked.iter())
                        .any(|(p, prev)| p.x >= b.face_x && p.y < b.height && prev.x < b.face_x);
                    tracked = now;
                    if hit {
                        log::debug!("box collision at tick {tick}");
                        failure.collision_at = Some(tick);
                        obstacle = None;
                    }
                }
            }
            tick += 1;
            if failure.diverged_at.is_some() {
                break;
            }
        }
        let per_tick = 1.0 / ticks as f64;
        grf.push(force_sum / (ticks * SUBSTEPS) as f64);
        torques.push(torque_sum.map(|v| v * per_tick));
        voltages.push(volt_sum.map(|v| v * per_tick));
        pd_torques.push(pd_sum.map(|v| v * per_tick));
        if failure.diverged_at.is_some() {
            break;
        }
    }
    if failure.diverged_at.is_some() {
        // Hold the last finite sample so every series keeps its length.
        let last_body = *body.last().expect("at least one sample recorded");
        let last_joints = *joints.last().expect("at least one sample recorded");
        let last_feet = *feet.last().expect("at least one sample recorded");
        while body.len() < n_total + 1 {
            body.push(last_body);
            joints.push(last_joints);
            feet.push(last_feet);
        }
        grf.resize(n_total, Input::zeros());
        torques.resize(n_total, [0.0; 4]);
        voltages.resize(n_total, [0.0; 4]);
        pd_torques.resize(n_total, [0.0; 4]);
    } else {
        body.push(body_state(&robot, &st));
        joints.push(leg_states(&st));
        feet.push(foot_geometry(&robot, &st));
    }
    if !extremes.min_normal_force.is_finite() {
        extremes.min_normal_force = 0.0;
    }
    failure.bad_landing = body[n_total].theta.abs() > BAD_LANDING_ANGLE;
    let errors = refs
        .body_ref
        .iter()
        .zip(&body)
        .map(|(r, x)| r.to_vector() - x.to_vector())
        .collect();
    let (commanded_u, joint_ff) = match ff {
        Feedforward::Forces(u) => (u.to_vec(), None),
        Feedforward::JointTorques(tau) => (Vec::new(), Some(tau.to_vec())),
    };
    TrialRecord {
        meta: TrialMeta {
            task_id: task.id.clone(),
            ..TrialMeta::default()
        },
        body,
        joints,
        feet,
        grf,
        commanded_u,
        joint_ff,
        torques,
        voltages,
        pd_torques,
        extremes,
        errors,
        failure,
    }
}

fn tracked_points(robot: &ArticulatedRobot, st: &PlantState) -> [Vector2<f64>; 8] {
    let c = robot.trunk_corners(st);
    [
        robot.foot(0, st).pos,
        robot.foot(1, st).pos,
        robot.knee(0, st),
        robot.knee(1, st),
        c[0],
        c[1],
        c[2],
        c[3],
    ]
}

fn interpolate_legs(a: &[LegState; 2], b: &[LegState; 2], alpha: f64) -> [LegState; 2] {
    let lerp = |x: f64, y: f64| x + alpha * (y - x);
    [0, 1].map(|leg| {
        LegState::new(
            [lerp(a[leg].q[0], b[leg].q[0]), lerp(a[leg].q[1], b[leg].q[1])],
            [lerp(a[leg].qdot[0], b[leg].qdot[0]), lerp(a[leg].qdot[1], b[leg].qdot[1])],
        )
    })
}

/// Return `task` with the plant carrying `payload`. The learner's model
/// parameters (`task.robot`) are untouched.
pub fn attach_payload(task: &JumpTask, payload: crate::task::Payload) -> JumpTask {
    JumpTask {
        payload,
        ..task.clone()
    }
}
