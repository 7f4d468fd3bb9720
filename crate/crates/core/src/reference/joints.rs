use nalgebra::Vector2;

#[cfg(test)]
use crate::model::kinematics::foot_in_hip_frame;
use crate::model::kinematics::{leg_ik, leg_jacobian, rotation, LegState};
use crate::model::{BodyState, PhaseSchedule, RobotParams};
use crate::plant::ArticulatedRobot;
use crate::task::Payload;

use super::ReferenceError;

/// Samples the rear leg takes to tuck after lift-off.
const REAR_TUCK_SAMPLES: usize = 10;

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Joint targets that keep the stance feet on their footholds while the
/// CoM follows `body_ref`, and swing the lifted legs to a tuck under the
/// hip.
pub struct JointPlanner {
    robot: ArticulatedRobot,
    footholds: [Vector2<f64>; 2],
    tuck: Vector2<f64>,
}

impl JointPlanner {
    pub fn new(params: &RobotParams, footholds: [Vector2<f64>; 2], tuck_fraction: f64) -> Self {
        let reach = params.links().max_reach();
        Self {
            robot: ArticulatedRobot::new(*params, Payload::default()),
            footholds,
            tuck: Vector2::new(0.0, -tuck_fraction * reach),
        }
    }

    fn hip(&self, leg: usize) -> Vector2<f64> {
        if leg == 0 {
            self.robot.params.front_hip()
        } else {
            self.robot.params.rear_hip()
        }
    }

    /// Hip-frame foot of a stance leg when the trunk centre is at `trunk`.
    fn stance_foot(&self, leg: usize, trunk: Vector2<f64>, theta: f64) -> Vector2<f64> {
        rotation(theta).transpose() * (self.footholds[leg] - trunk) - self.hip(leg)
    }

    /// Joint angles for hip-frame feet, with the trunk placed so the CoM
    /// lands on `body`. `lenient` pulls unreachable stance feet back inside
    /// the workspace instead of failing.
    fn solve_sample(
        &self,
        body: &BodyState,
        feet: [Option<Vector2<f64>>; 2],
        sample: usize,
        lenient: bool,
    ) -> Result<([f64; 2], [f64; 2], [Vector2<f64>; 2]), ReferenceError> {
        let links = self.robot.params.links();
        let com = body.position();
        let mut trunk = com;
        let mut out = ([0.0; 2], [0.0; 2], [Vector2::zeros(); 2]);
        for _ in 0..60 {
            let mut hf = [Vector2::zeros(); 2];
            let mut q = [[0.0; 2]; 2];
            for leg in 0..2 {
                hf[leg] = feet[leg].unwrap_or_else(|| self.stance_foot(leg, trunk, body.theta));
                if lenient {
                    let r = hf[leg].norm();
                    let cap = 0.999 * links.max_reach();
                    if r > cap {
                        hf[leg] *= cap / r;
                    }
                }
                q[leg] = leg_ik(hf[leg], &links).map_err(|source| ReferenceError::Kinematics { sample, leg, source })?;
            }
            let st = self.robot.state_with_com(com, body.theta, q);
            let next = Vector2::new(st.s[0], st.s[1]);
            let moved = (next - trunk).norm();
            trunk = next;
            out = (q[0], q[1], hf);
            if moved < 1e-13 {
                break;
            }
        }
        Ok(out)
    }

    /// Joint references for samples `0..=N`.
    pub fn plan(&self, body_ref: &[BodyState], schedule: &PhaseSchedule) -> Result<Vec<[LegState; 2]>, ReferenceError> {
        self.plan_inner(body_ref, schedule, false)
    }

    /// Like [`plan`](Self::plan), but stretched stance legs are shortened to
    /// fit instead of failing. Used on intermediate trajectories.
    pub fn plan_lenient(&self, body_ref: &[BodyState], schedule: &PhaseSchedule) -> Vec<[LegState; 2]> {
        self.plan_inner(body_ref, schedule, true)
            .expect("lenient planning only fails on non-finite input")
    }

    fn plan_inner(
        &self,
        body_ref: &[BodyState],
        schedule: &PhaseSchedule,
        lenient: bool,
    ) -> Result<Vec<[LegState; 2]>, ReferenceError> {
        let n_total = schedule.n_total();
        let n_contact = schedule.n_contact();
        let links = self.robot.params.links();
        let mut q = Vec::with_capacity(n_total + 1);
        let mut hf = Vec::with_capacity(n_total + 1);
        let mut lift = [Vector2::zeros(); 2];
        for (t, body) in body_ref.iter().enumerate().take(n_total + 1) {
            let front = if t <= schedule.n_dc {
                None
            } else {
                let s = (t - schedule.n_dc) as f64 / schedule.n_sc.max(1) as f64;
                Some(lift[0] + (self.tuck - lift[0]) * smoothstep(s))
            };
            let rear = if t <= n_contact {
                None
            } else {
                let s = (t - n_contact) as f64 / REAR_TUCK_SAMPLES.min(schedule.n_fl).max(1) as f64;
                Some(lift[1] + (self.tuck - lift[1]) * smoothstep(s))
            };
            let (qf, qr, feet) = self.solve_sample(body, [front, rear], t, lenient)?;
            if t == schedule.n_dc {
                lift[0] = feet[0];
            }
            if t == n_contact {
                lift[1] = feet[1];
            }
            q.push([qf, qr]);
            hf.push(feet);
        }
        // Rates: inverse Jacobian of the hip-frame foot velocity, or finite
        // differences of the angles where the leg is near singular.
        let dt = schedule.dt;
        let mut out = Vec::with_capacity(q.len());
        for t in 0..q.len() {
            let (a, b) = (t.saturating_sub(1), (t + 1).min(q.len() - 1));
            let span = (b - a) as f64 * dt;
            let legs = [0, 1].map(|leg| {
                let qt = q[t][leg];
                if t == 0 || span == 0.0 {
                    return LegState::new(qt, [0.0; 2]);
                }
                let j = leg_jacobian(qt, &links);
                let vel = (hf[b][leg] - hf[a][leg]) / span;
                let qdot = if j.determinant().abs() > 1e-3 * links.thigh * links.calf {
                    let r = j.try_inverse().expect("non-singular") * vel;
                    [r.x, r.y]
                } else {
                    [(q[b][leg][0] - q[a][leg][0]) / span, (q[b][leg][1] - q[a][leg][1]) / span]
                };
                LegState::new(qt, qdot)
            });
            out.push(legs);
        }
        Ok(out)
    }

    /// World position of a leg's hip for the planned joints.
    pub fn hip_world(&self, body: &BodyState, legs: &[LegState; 2], leg: usize) -> Vector2<f64> {
        let st = self.robot.state_with_com(body.position(), body.theta, legs.map(|l| l.q));
        Vector2::new(st.s[0], st.s[1]) + rotation(body.theta) * self.hip(leg)
    }


    #[cfg(test)]
    fn foot_world(&self, body: &BodyState, legs: &[LegState; 2], leg: usize) -> Vector2<f64> {
        let st = self.robot.state_with_com(body.position(), body.theta, legs.map(|l| l.q));
        let trunk = Vector2::new(st.s[0], st.s[1]);
        trunk + rotation(body.theta) * (self.hip(leg) + foot_in_hip_frame(legs[leg].q, &self.robot.params.links()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn planner() -> JointPlanner {
        JointPlanner::new(&RobotParams::default(), [Vector2::new(0.13, 0.0), Vector2::new(-0.12, 0.0)], 0.6)
    }

    #[test]
    fn stance_feet_stay_on_footholds() {
        let sched = PhaseSchedule {
            n_dc: 3,
            n_sc: 2,
            n_fl: 4,
            dt: 0.01,
        };
        let body: Vec<_> = (0..=sched.n_total())
            .map(|t| BodyState::at_rest(0.005 * t as f64, 0.27 + 0.003 * t as f64, 0.02 * t as f64))
            .collect();
        let p = planner();
        let refs = p.plan(&body, &sched).unwrap();
        for t in 0..=sched.n_contact() {
            let rear = p.foot_world(&body[t], &refs[t], 1);
            assert_relative_eq!(rear, Vector2::new(-0.12, 0.0), epsilon = 1e-9);
            if t <= sched.n_dc {
                let front = p.foot_world(&body[t], &refs[t], 0);
                assert_relative_eq!(front, Vector2::new(0.13, 0.0), epsilon = 1e-9);
            }
        }
        // Tucked at the end of the flight... or on the way there.
        let end = foot_in_hip_frame(refs[sched.n_total()][0].q, &RobotParams::default().links());
        assert_relative_eq!(end, Vector2::new(0.0, -0.24), epsilon = 1e-9);
    }

    #[test]
    fn out_of_reach_is_reported() {
        let sched = PhaseSchedule {
            n_dc: 1,
            n_sc: 1,
            n_fl: 1,
            dt: 0.01,
        };
        let body = vec![BodyState::at_rest(0.0, 0.6, 0.0); 4];
        assert!(matches!(
            planner().plan(&body, &sched),
            Err(ReferenceError::Kinematics { sample: 0, .. })
        ));
    }
}
