//! Nominal jump: body trajectory, joint targets and the initial contact
//! forces the learner starts from.
//!
//! The contact phase is a quintic from the standing pose to the lift-off
//! state, the flight is the discrete ballistic arc of the SRB model ending
//! on the target. The quintic is generally not reproducible with admissible
//! forces, so a trajectory QP over the lifted SRB model refines the forces
//! and the body reference becomes their rollout: exactly what the model
//! predicts, ending exactly on the target.

mod joints;
mod profile;
mod wrench;

pub use crate::plant::ArticulatedRobot;
use joints::JointPlanner;
pub use profile::{ballistic_takeoff, contact_profile, discrete_ballistic_takeoff, Quintic};
pub use wrench::{feedforward_forces, wrench_matrix, FeedforwardForces};

use nalgebra::{DMatrix, DVector, Vector2, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ilc::constraints::{assemble, ConstraintLimits};
use crate::ilc::lifted::{stack_inputs, unstack_inputs};
use crate::ilc::update::quadratic_terms;
use crate::model::kinematics::{KinematicsError, LegState};
use crate::model::{
    discretize, input_matrix, transition_matrix, BodyState, DiscreteModel, FootGeometry, Input, ModelError, PhaseSchedule,
    RobotParams, INPUT_DIM, STATE_DIM,
};
use crate::qp::{self, QpError, QpProblem, QpSettings, QpStatus};
use crate::task::{JumpTask, Target};

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("leg {leg} cannot reach its target at sample {sample}: {source}")]
    Kinematics {
        sample: usize,
        leg: usize,
        #[source]
        source: KinematicsError,
    },
    #[error("no admissible forces at sample {sample} ({what})")]
    Infeasible { sample: usize, what: &'static str },
    #[error("trajectory refinement infeasible at iteration {iteration}: {what}")]
    RefinementInfeasible { iteration: usize, what: &'static str },
    #[error("trajectory refinement did not settle after {iterations} iterations (last change {change:.2e})")]
    NotConverged { iterations: usize, change: f64 },
    #[error("expected {expected} contact samples, got {got}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Tracking weights of the refinement: positions/pitch, then rates.
const REFINE_STATE_WEIGHT: [f64; STATE_DIM] = [100.0, 100.0, 1.0, 1.0, 1.0, 0.01];
/// Pull towards the wrench-matched forces.
const REFINE_FORCE_WEIGHT: f64 = 1e-6;
const REFINE_MAX_ITER: usize = 40;
/// Largest input change (N) at which the refinement counts as settled.
const REFINE_TOL: f64 = 1e-7;

/// The nominal jump of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBundle {
    /// CoM state per sample, `0..=N`.
    pub body_ref: Vec<BodyState>,
    /// Joint targets per sample, `0..=N`.
    pub joint_ref: Vec<[LegState; 2]>,
    /// Initial contact forces, `0..N_c`.
    pub u_init: Vec<Input>,
    /// Feet relative to the CoM along `body_ref`, `0..N_c`.
    pub feet: Vec<FootGeometry>,
    /// World footholds (front, rear).
    pub footholds: [Vector2<f64>; 2],
    /// Largest per-sample wrench residual of the quintic profile, N.
    pub profile_residual: f64,
    /// Terminal CoM position and pitch in world coordinates.
    pub goal: Target,
}

impl ReferenceBundle {
    pub fn n_total(&self) -> usize {
        self.body_ref.len() - 1
    }

    /// SRB model along the reference feet.
    pub fn model(&self, task: &JumpTask) -> Result<DiscreteModel, ReferenceError> {
        Ok(discretize(&self.feet, &task.schedule, &task.robot)?)
    }

    /// Same contact phase, new ballistic flight to `target` (a displacement
    /// from the standing pose, like [`JumpTask::target`]).
    pub fn retarget(&self, task: &JumpTask, target: Target) -> ReferenceBundle {
        let schedule = &task.schedule;
        let n_contact = schedule.n_contact();
        let start = self.body_ref[0];
        let goal = Target {
            x: start.p_x + target.x,
            z: start.p_z + target.z,
            theta: target.theta,
        };
        let mut body_ref = self.body_ref[..=n_contact].to_vec();
        let takeoff = body_ref[n_contact];
        let v = discrete_ballistic_takeoff(
            goal.x - takeoff.p_x,
            goal.z - takeoff.p_z,
            schedule.n_fl,
            schedule.dt,
            task.robot.gravity,
        );
        let knot = BodyState {
            v_x: v.x,
            v_z: v.y,
            omega: (goal.theta - takeoff.theta) / schedule.flight_time(),
            ..takeoff
        };
        body_ref[n_contact] = knot;
        body_ref.extend(ballistic(&knot, schedule, task.robot.gravity).into_iter().skip(1));
        ReferenceBundle {
            body_ref,
            goal,
            ..self.clone()
        }
    }
}

/// Flight samples starting from (and including) `takeoff`.
fn ballistic(takeoff: &BodyState, schedule: &PhaseSchedule, gravity: f64) -> Vec<BodyState> {
    let mut out = vec![*takeoff];
    let mut x = *takeoff;
    for _ in 0..schedule.n_fl {
        x = BodyState {
            p_x: x.p_x + schedule.dt * x.v_x,
            p_z: x.p_z + schedule.dt * x.v_z,
            theta: x.theta + schedule.dt * x.omega,
            v_z: x.v_z - schedule.dt * gravity,
            ..x
        };
        out.push(x);
    }
    out
}

fn feet_along(body: &[BodyState], footholds: &[Vector2<f64>; 2], n_contact: usize) -> Vec<FootGeometry> {
    body[..n_contact]
        .iter()
        .map(|b| FootGeometry {
            r_front: footholds[0] - b.position(),
            r_rear: footholds[1] - b.position(),
        })
        .collect()
}

/// Build the nominal jump of `task`.
pub fn generate(task: &JumpTask) -> Result<ReferenceBundle, ReferenceError> {
    let schedule = &task.schedule;
    let stand = &task.stand;
    let params = &task.robot;
    let n_contact = schedule.n_contact();
    let n_total = schedule.n_total();
    let g = params.gravity;

    let start = BodyState::at_rest(0.0, stand.height, 0.0);
    let footholds = [Vector2::new(stand.front_foot_x, 0.0), Vector2::new(stand.rear_foot_x, 0.0)];
    let goal = Target {
        x: task.target.x,
        z: stand.height + task.target.z,
        theta: task.target.theta,
    };
    let lift = Vector2::new(stand.takeoff_dx, stand.height + stand.takeoff_dz);
    let v = discrete_ballistic_takeoff(goal.x - lift.x, goal.z - lift.y, schedule.n_fl, schedule.dt, g);
    let takeoff = BodyState {
        p_x: lift.x,
        p_z: lift.y,
        theta: 0.0,
        v_x: v.x,
        v_z: v.y,
        omega: goal.theta / schedule.flight_time(),
    };
    let mut nominal = contact_profile(&start, &takeoff, schedule);
    nominal.extend(ballistic(&takeoff, schedule, g).into_iter().skip(1));
    debug_assert_eq!(nominal.len(), n_total + 1);

    let planner = JointPlanner::new(&task.robot, footholds, stand.tuck_fraction);
    let feet = feet_along(&nominal, &footholds, n_contact);
    let matched = feedforward_forces(&nominal, &feet, schedule, params, task.ground.mu, &task.limits)?;
    log::debug!("profile wrench residual {:.3e} N", matched.max_residual());

    let limits = ConstraintLimits {
        mu: task.ground.mu,
        forces: task.limits,
        torque_fraction: Some(stand.torque_fraction),
    };
    let target_vec: Vec<_> = nominal.iter().map(|b| b.to_vector()).collect();
    let x0 = start.to_vector();
    let settings = QpSettings::default();
    let mut u = matched.u.clone();
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    // Gauss-Newton on the bilinear SRB dynamics: lever arms follow the CoM.
    // The first pass only asks for dynamic consistency, force limits and
    // the landing; motor and reach limits join once the trajectory has
    // settled, since they are linearised about it.
    let mut joint_limits = false;
    while iterations < REFINE_MAX_ITER {
        iterations += 1;
        let xs = srb_rollout(&x0, &u, &footholds, schedule, params);
        let body: Vec<_> = xs.iter().map(BodyState::from_vector).collect();
        let g_mat = linearised_lift(&xs, &u, &footholds, schedule, params);
        let joints = planner.plan_lenient(&body, schedule);
        let theta: Vec<f64> = body[..n_contact].iter().map(|b| b.theta).collect();

        let mut e_all = DVector::zeros(STATE_DIM * n_total);
        let mut q_all = DVector::zeros(STATE_DIM * n_total);
        for t in 1..=n_total {
            e_all
                .fixed_rows_mut::<6>(STATE_DIM * (t - 1))
                .copy_from(&(target_vec[t] - xs[t]));
            for (i, w) in REFINE_STATE_WEIGHT.iter().enumerate() {
                q_all[STATE_DIM * (t - 1) + i] = *w;
            }
        }
        let q_u = DVector::repeat(u.len() * 4, REFINE_FORCE_WEIGHT);
        let (w, mut h) = quadratic_terms(&g_mat, &q_all, &e_all, &q_u);
        h += (stack_inputs(&u) - stack_inputs(&matched.u)) * (2.0 * REFINE_FORCE_WEIGHT);

        // Land exactly on the goal position and pitch.
        let x_n = xs[n_total];
        let goal_rows = g_mat.rows(STATE_DIM * (n_total - 1), 3).clone_owned();
        let goal_rhs = DVector::from_vec(vec![goal.x - x_n[0], goal.z - x_n[1], goal.theta - x_n[2]]);
        let problem = |torque_fraction: Option<f64>, reach: bool| {
            let limits = ConstraintLimits {
                torque_fraction,
                ..limits
            };
            let cons = assemble(&u, &joints[..n_contact], &theta, &[], schedule, &task.actuator, &params.links(), &limits);
            let (mut gm, mut gv) = (cons.g_mat, cons.g_vec);
            if reach {
                let (rm, rv) = reach_rows(&planner, &body, &joints, &footholds, &g_mat, schedule, params);
                gm = stack_rows(&gm, &rm);
                gv = stack_vec(&gv, &rv);
            }
            QpProblem::new(w.clone(), h.clone())
                .with_inequalities(gm, gv)
                .with_equalities(stack_rows(&cons.e_mat, &goal_rows), stack_vec(&cons.e_vec, &goal_rhs))
        };
        let sol = if joint_limits {
            qp::solve(&problem(limits.torque_fraction, true), &settings)?
        } else {
            qp::solve(&problem(None, false), &settings)?
        };
        if sol.status != QpStatus::Optimal {
            // Name the first group of limits whose removal restores feasibility.
            let feasible = |p: QpProblem| qp::solve(&p, &settings).map(|s| s.status == QpStatus::Optimal);
            let what = if feasible(problem(None, true))? {
                "motor torque and voltage limits"
            } else if feasible(problem(limits.torque_fraction, false))? {
                "leg reach"
            } else {
                "contact-force limits with the landing target"
            };
            return Err(ReferenceError::RefinementInfeasible {
                iteration: iterations,
                what,
            });
        }
        u = unstack_inputs(&(stack_inputs(&u) + &sol.z));
        change = sol.z.amax();
        log::debug!("refinement iteration {iterations}: |Δu| = {change:.3e} N");
        if change < REFINE_TOL {
            if joint_limits {
                break;
            }
            joint_limits = true;
            change = f64::INFINITY;
        }
    }
    if change >= REFINE_TOL {
        return Err(ReferenceError::NotConverged { iterations, change });
    }

    let body_ref: Vec<_> = srb_rollout(&x0, &u, &footholds, schedule, params)
        .iter()
        .map(BodyState::from_vector)
        .collect();
    let feet = feet_along(&body_ref, &footholds, n_contact);
    let joint_ref = planner.plan(&body_ref, schedule)?;
    Ok(ReferenceBundle {
        body_ref,
        joint_ref,
        u_init: u,
        feet,
        footholds,
        profile_residual: matched.max_residual(),
        goal,
    })
}

/// SRB rollout with the lever arms taken from the current CoM position.
fn srb_rollout(
    x0: &Vector6<f64>,
    u: &[Input],
    footholds: &[Vector2<f64>; 2],
    schedule: &PhaseSchedule,
    params: &RobotParams,
) -> Vec<Vector6<f64>> {
    let a = transition_matrix(schedule.dt);
    let c = Vector6::new(0.0, 0.0, 0.0, 0.0, -params.gravity * schedule.dt, 0.0);
    let mut xs = Vec::with_capacity(schedule.n_total() + 1);
    let mut x = *x0;
    xs.push(x);
    for t in 0..schedule.n_total() {
        x = a * x + c;
        if let Some(ut) = u.get(t) {
            let p = xs[t].fixed_rows::<2>(0).clone_owned();
            let feet = FootGeometry {
                r_front: footholds[0] - p,
                r_rear: footholds[1] - p,
            };
            x += input_matrix(&feet, schedule.dt, params) * ut;
        }
        xs.push(x);
    }
    xs
}

/// `∂x_t/∂U` of [`srb_rollout`] about `(xs, u)`, samples `1..=N`.
fn linearised_lift(
    xs: &[Vector6<f64>],
    u: &[Input],
    footholds: &[Vector2<f64>; 2],
    schedule: &PhaseSchedule,
    params: &RobotParams,
) -> DMatrix<f64> {
    let n_total = schedule.n_total();
    let n_contact = u.len();
    let dt = schedule.dt;
    let a = transition_matrix(dt);
    let mut g = DMatrix::zeros(STATE_DIM * n_total, INPUT_DIM * n_contact);
    for m in 1..=n_total {
        let t = m - 1;
        let row = STATE_DIM * t;
        let mut a_t = a;
        if t < n_contact {
            // Moment of the contact forces about the moving CoM.
            let (fx, fz) = (u[t][0] + u[t][2], u[t][1] + u[t][3]);
            a_t[(5, 0)] -= dt * fz / params.trunk_inertia;
            a_t[(5, 1)] += dt * fx / params.trunk_inertia;
        }
        if m > 1 {
            let previous = g.rows(row - STATE_DIM, STATE_DIM).clone_owned();
            g.rows_mut(row, STATE_DIM).copy_from(&(a_t * previous));
        }
        if t < n_contact {
            let p = xs[t].fixed_rows::<2>(0).clone_owned();
            let feet = FootGeometry {
                r_front: footholds[0] - p,
                r_rear: footholds[1] - p,
            };
            g.view_mut((row, INPUT_DIM * t), (STATE_DIM, INPUT_DIM))
                .copy_from(&input_matrix(&feet, dt, params));
        }
    }
    g
}

/// Stance legs may stretch to this share of their full reach.
const REACH_FRACTION: f64 = 0.95;

/// Linearised hip-to-foothold distance limits of the stance legs,
/// `n_tᵀ (foothold − hip_t(Δ)) ≤ L`, in terms of the input offset.
fn reach_rows(
    planner: &JointPlanner,
    body: &[BodyState],
    joints: &[[LegState; 2]],
    footholds: &[Vector2<f64>; 2],
    g: &DMatrix<f64>,
    schedule: &PhaseSchedule,
    params: &RobotParams,
) -> (DMatrix<f64>, DVector<f64>) {
    let limit = REACH_FRACTION * params.links().max_reach();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for t in 1..=schedule.n_contact() {
        for leg in 0..2 {
            let stance = if leg == 0 { t <= schedule.n_dc } else { true };
            if !stance {
                continue;
            }
            let d = footholds[leg] - planner.hip_world(&body[t], &joints[t], leg);
            let n = d / d.norm();
            // hip moves with the CoM: rows 0, 1 of sample t.
            let gp = g.rows(STATE_DIM * (t - 1), 2);
            let coeff = -(gp.transpose() * n);
            rows.push((coeff, limit - n.dot(&d)));
        }
    }
    let cols = g.ncols();
    let mat = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r].0[c]);
    let vec = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    (mat, vec)
}

fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols().max(b.ncols()));
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

fn stack_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilc::constraints::torque_window;
    use crate::task::GroundModel;
    use approx::assert_relative_eq;

    #[test]
    fn nominal_jump_lands_on_target() {
        let task = JumpTask::forward("t", 0.6, GroundModel::hard());
        let r = generate(&task).unwrap();
        let n = task.schedule.n_total();
        let last = r.body_ref[n];
        assert_relative_eq!(last.p_x, 0.6, epsilon = 1e-8);
        assert_relative_eq!(last.p_z, task.stand.height, epsilon = 1e-8);
        assert_relative_eq!(last.theta, 0.0, epsilon = 1e-8);
        assert_eq!(r.joint_ref.len(), n + 1);
        assert_eq!(r.u_init.len(), task.schedule.n_contact());
    }

    #[test]
    fn nominal_forces_respect_limits() {
        let task = JumpTask::forward("t", 0.6, GroundModel::hard());
        let r = generate(&task).unwrap();
        let links = task.robot.links();
        for (t, u) in r.u_init.iter().enumerate() {
            let phase = task.schedule.phase(t);
            for leg in 0..2 {
                let (fx, fz) = (u[2 * leg], u[2 * leg + 1]);
                let stance = if leg == 0 { phase.front_stance() } else { phase.rear_stance() };
                if !stance {
                    assert!(fx.abs() < 1e-9 && fz.abs() < 1e-9);
                    continue;
                }
                assert!((5.0 - 1e-6..=250.0 + 1e-6).contains(&fz), "fz {fz} at {t}");
                assert!(fx.abs() <= 0.6 * fz + 1e-6);
                let legs = r.joint_ref[t][leg];
                let tau = crate::ilc::constraints::motor_torque_map(legs.q, r.body_ref[t].theta, &links)
                    * Vector2::new(fx, fz);
                for j in 0..2 {
                    let (lo, hi) = torque_window(legs.qdot[j], &task.actuator, 1.0);
                    assert!(tau[j] >= lo - 1e-6 && tau[j] <= hi + 1e-6);
                }
            }
        }
    }

    #[test]
    fn reference_is_its_own_model_rollout() {
        let task = JumpTask::forward("t", 0.4, GroundModel::hard());
        let r = generate(&task).unwrap();
        let model = r.model(&task).unwrap();
        let xs = model.rollout(&r.body_ref[0].to_vector(), &r.u_init, task.schedule.n_total());
        for (x, b) in xs.iter().zip(&r.body_ref) {
            assert!((x - b.to_vector()).amax() < 1e-9);
        }
        let fresh = feet_along(&r.body_ref, &r.footholds, task.schedule.n_contact());
        for (a, b) in fresh.iter().zip(&r.feet) {
            assert!((a.r_front - b.r_front).amax() < 1e-8);
        }
    }

    #[test]
    fn flight_is_ballistic() {
        let task = JumpTask::forward("t", 0.6, GroundModel::hard());
        let r = generate(&task).unwrap();
        let n_c = task.schedule.n_contact();
        for w in r.body_ref[n_c..].windows(2) {
            assert_relative_eq!(w[1].v_x, w[0].v_x, epsilon = 1e-12);
            assert_relative_eq!(w[1].v_z, w[0].v_z - 9.81 * 0.01, epsilon = 1e-12);
        }
    }

    #[test]
    fn retarget_keeps_contact_and_hits_new_goal() {
        let task = JumpTask::forward("t", 0.6, GroundModel::hard());
        let r = generate(&task).unwrap();
        let moved = r.retarget(
            &task,
            Target {
                x: 0.5,
                z: 0.2,
                theta: 0.0,
            },
        );
        let n_c = task.schedule.n_contact();
        assert_eq!(&moved.body_ref[..n_c], &r.body_ref[..n_c]);
        let last = moved.body_ref.last().unwrap();
        assert_relative_eq!(last.p_x, 0.5, epsilon = 1e-9);
        assert_relative_eq!(last.p_z, task.stand.height + 0.2, epsilon = 1e-9);
    }
}
