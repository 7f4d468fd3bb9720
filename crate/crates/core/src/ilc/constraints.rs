use nalgebra::{DMatrix, DVector, Matrix2, RowVector2};

use crate::model::kinematics::{leg_jacobian, rotation, LegLinks, LegState};
use crate::model::{ActuatorParams, Input, PhaseSchedule, INPUT_DIM};
use crate::plant::TrialRecord;
use crate::task::ForceLimits;

use super::lifted::stack_inputs;

/// Affine constraints on the stacked input offset `Δu`:
/// `G Δu ≤ g`, `E Δu = e`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub g_mat: DMatrix<f64>,
    pub g_vec: DVector<f64>,
    pub e_mat: DMatrix<f64>,
    pub e_vec: DVector<f64>,
    /// The inputs the offsets are taken about.
    pub u_k: DVector<f64>,
}

impl ConstraintSet {
    pub fn n_inequalities(&self) -> usize {
        self.g_mat.nrows()
    }

    /// Add the box `|Δu_i| ≤ d` on every input.
    pub fn with_step_limit(mut self, d: f64) -> Self {
        let (rows, n) = self.g_mat.shape();
        let mut g_mat = DMatrix::zeros(rows + 2 * n, n);
        g_mat.rows_mut(0, rows).copy_from(&self.g_mat);
        g_mat.view_mut((rows, 0), (n, n)).fill_with_identity();
        g_mat.view_mut((rows + n, 0), (n, n)).copy_from(&-DMatrix::<f64>::identity(n, n));
        let mut g_vec = DVector::repeat(rows + 2 * n, d);
        g_vec.rows_mut(0, rows).copy_from(&self.g_vec);
        self.g_mat = g_mat;
        self.g_vec = g_vec;
        self
    }

    /// Largest violation of any row at offset `du` (0 when feasible).
    pub fn violation(&self, du: &DVector<f64>) -> f64 {
        let ineq = (&self.g_mat * du - &self.g_vec).max().max(0.0);
        let eq = if self.e_mat.nrows() > 0 {
            (&self.e_mat * du - &self.e_vec).amax()
        } else {
            0.0
        };
        ineq.max(eq)
    }

    /// Largest violation of the absolute input schedule `u`.
    pub fn violation_of_inputs(&self, u: &[Input]) -> f64 {
        self.violation(&(stack_inputs(u) - &self.u_k))
    }
}

/// Per-motor map from a lumped foot force to motor torques:
/// `τ = −½ Jᵀ Rᵀ u`.
pub fn motor_torque_map(q: [f64; 2], theta: f64, links: &LegLinks) -> Matrix2<f64> {
    -0.5 * leg_jacobian(q, links).transpose() * rotation(theta).transpose()
}

/// Torque window of one motor: saturation intersected with the supply
/// voltage window at speed `qdot`, shrunk by `fraction`.
pub fn torque_window(qdot: f64, act: &ActuatorParams, fraction: f64) -> (f64, f64) {
    let (lo, hi) = act.mdc_interval(qdot);
    let lo = lo.max(-act.tau_max) * fraction;
    let hi = hi.min(act.tau_max) * fraction;
    (lo, hi)
}

/// Limits shared by every constraint assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintLimits {
    pub mu: f64,
    pub forces: ForceLimits,
    /// Fraction of the torque window the feedforward may use; `None` drops
    /// the torque rows altogether.
    pub torque_fraction: Option<f64>,
}

struct Rows {
    n: usize,
    g: Vec<(usize, Vec<(usize, f64)>, f64)>,
    e: Vec<(Vec<(usize, f64)>, f64)>,
}

impl Rows {
    fn le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        let norm: f64 = coeffs.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
        if norm < 1e-12 {
            if rhs < 0.0 {
                // Keep it: the set is genuinely infeasible.
                self.g.push((self.n, coeffs, rhs));
            }
            return;
        }
        self.g.push((self.n, coeffs, rhs));
    }

    fn into_set(self, u_k: DVector<f64>) -> ConstraintSet {
        let mut g_mat = DMatrix::zeros(self.g.len(), self.n);
        let mut g_vec = DVector::zeros(self.g.len());
        for (r, (_, coeffs, rhs)) in self.g.into_iter().enumerate() {
            for (c, v) in coeffs {
                g_mat[(r, c)] += v;
            }
            g_vec[r] = rhs;
        }
        let mut e_mat = DMatrix::zeros(self.e.len(), self.n);
        let mut e_vec = DVector::zeros(self.e.len());
        for (r, (coeffs, rhs)) in self.e.into_iter().enumerate() {
            for (c, v) in coeffs {
                e_mat[(r, c)] += v;
            }
            e_vec[r] = rhs;
        }
        ConstraintSet {
            g_mat,
            g_vec,
            e_mat,
            e_vec,
            u_k,
        }
    }
}

/// Constraint rows about `u_k` given the joint configuration and pitch at
/// each contact sample. `pd` holds the feedback torque each motor added on
/// top of the feedforward (empty for none): the total must fit the window,
/// and where it already overflows the feedforward may not push further.
#[allow(clippy::too_many_arguments)]
pub fn assemble(
    u_k: &[Input],
    joints: &[[LegState; 2]],
    theta: &[f64],
    pd: &[[f64; 4]],
    schedule: &PhaseSchedule,
    act: &ActuatorParams,
    links: &LegLinks,
    limits: &ConstraintLimits,
) -> ConstraintSet {
    let n_contact = schedule.n_contact();
    let mut rows = Rows {
        n: INPUT_DIM * n_contact,
        g: Vec::new(),
        e: Vec::new(),
    };
    let (mu, f_min, f_max) = (limits.mu, limits.forces.f_min, limits.forces.f_max);
    for t in 0..n_contact {
        let phase = schedule.phase(t);
        for leg in 0..2 {
            let ix = INPUT_DIM * t + 2 * leg;
            let iz = ix + 1;
            let (fx, fz) = (u_k[t][2 * leg], u_k[t][2 * leg + 1]);
            let stance = if leg == 0 { phase.front_stance() } else { phase.rear_stance() };
            if !stance {
                rows.e.push((vec![(ix, 1.0)], -fx));
                rows.e.push((vec![(iz, 1.0)], -fz));
                continue;
            }
            rows.le(vec![(iz, -1.0)], fz - f_min);
            rows.le(vec![(iz, 1.0)], f_max - fz);
            rows.le(vec![(ix, 1.0), (iz, -mu)], mu * fz - fx);
            rows.le(vec![(ix, -1.0), (iz, -mu)], mu * fz + fx);
            let Some(fraction) = limits.torque_fraction else {
                continue;
            };
            let map = motor_torque_map(joints[t][leg].q, theta[t], links);
            for j in 0..2 {
                let row: RowVector2<f64> = map.row(j).into();
                let tau = row[0] * fx + row[1] * fz;
                let (lo, hi) = torque_window(joints[t][leg].qdot[j], act, fraction);
                let fb = pd.get(t).map_or(0.0, |p| p[2 * leg + j]);
                rows.le(vec![(ix, row[0]), (iz, row[1])], (hi - tau - fb).max(0.0).min(hi - tau));
                rows.le(vec![(ix, -row[0]), (iz, -row[1])], (tau + fb - lo).max(0.0).min(tau - lo));
            }
        }
    }
    rows.into_set(stack_inputs(u_k))
}

/// Constraints of the next update, linearised about the logged trial: the
/// torque map and voltage window use the measured joint angles and rates.
pub fn assemble_constraints(
    trial: &TrialRecord,
    act: &ActuatorParams,
    links: &LegLinks,
    mu: f64,
    schedule: &PhaseSchedule,
    forces: &ForceLimits,
) -> ConstraintSet {
    let n_contact = schedule.n_contact();
    let theta: Vec<f64> = trial.body[..n_contact].iter().map(|b| b.theta).collect();
    assemble(
        &trial.commanded_u,
        &trial.joints[..n_contact],
        &theta,
        &trial.pd_torques[..n_contact.min(trial.pd_torques.len())],
        schedule,
        act,
        links,
        &ConstraintLimits {
            mu,
            forces: *forces,
            torque_fraction: Some(1.0),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kinematics::force_to_torque;
    use approx::assert_relative_eq;
    use nalgebra::Vector2;

    const LINKS: LegLinks = LegLinks {
        thigh: 0.2,
        calf: 0.2,
    };

    fn schedule() -> PhaseSchedule {
        PhaseSchedule {
            n_dc: 1,
            n_sc: 1,
            n_fl: 2,
            dt: 0.01,
        }
    }

    fn standing_joints() -> [LegState; 2] {
        [LegState::new([-0.8, -1.6], [0.0; 2]); 2]
    }

    fn limits() -> ConstraintLimits {
        ConstraintLimits {
            mu: 0.6,
            forces: ForceLimits::default(),
            torque_fraction: Some(1.0),
        }
    }

    #[test]
    fn voltage_window_at_rest_equals_saturation() {
        let (lo, hi) = torque_window(0.0, &ActuatorParams::default(), 1.0);
        assert_relative_eq!(lo, -33.5, epsilon = 1e-12);
        assert_relative_eq!(hi, 33.5, epsilon = 1e-12);
    }

    #[test]
    fn swing_feet_get_equality_rows_only() {
        let u = vec![Input::new(5.0, 60.0, -3.0, 70.0), Input::new(4.0, 30.0, 10.0, 90.0)];
        let set = assemble(&u, &[standing_joints(); 2], &[0.0; 2], &[], &schedule(), &ActuatorParams::default(), &LINKS, &limits());
        assert_eq!(set.e_mat.nrows(), 2);
        // Front foot of sample 1 must be driven to zero.
        let mut du = DVector::zeros(8);
        du[4] = -4.0;
        du[5] = -30.0;
        assert_eq!(set.violation(&du), 0.0);
        du[5] = 0.0;
        assert!(set.violation(&du) > 0.0);
        // 2 stance feet in sample 0, 1 in sample 1; 8 rows each.
        assert_eq!(set.n_inequalities(), 24);
    }

    #[test]
    fn rows_encode_cone_and_bounds() {
        let u = vec![Input::new(0.0, 60.0, 0.0, 60.0), Input::new(0.0, 0.0, 0.0, 100.0)];
        let set = assemble(&u, &[standing_joints(); 2], &[0.0; 2], &[], &schedule(), &ActuatorParams::default(), &LINKS, &limits());
        assert_eq!(set.violation(&DVector::zeros(8)), 0.0);
        let mut du = DVector::zeros(8);
        du[0] = 37.0; // f_x = 37 > 0.6·60
        assert!(set.violation(&du) > 0.0);
        let mut du = DVector::zeros(8);
        du[1] = -56.0; // f_z = 4 < 5
        assert!(set.violation(&du) > 0.0);
    }

    #[test]
    fn torque_at_limit_is_one_sided() {
        let q = [-0.8, -1.6];
        let map = motor_torque_map(q, 0.0, &LINKS);
        // Pick the rear force so the rear calf motor sits exactly at 33.5 N·m.
        let dir = Vector2::new(0.0, 1.0);
        let per_newton = (map * dir)[1];
        let fz = 33.5 / per_newton;
        assert!(fz > 0.0);
        let u = vec![Input::new(0.0, 60.0, 0.0, fz), Input::new(0.0, 0.0, 0.0, 60.0)];
        let set = assemble(&u, &[standing_joints(); 2], &[0.0; 2], &[], &schedule(), &ActuatorParams::default(), &LINKS, &limits());
        let mut up = DVector::zeros(8);
        up[3] = 1.0;
        let mut down = DVector::zeros(8);
        down[3] = -1.0;
        if fz <= 250.0 {
            assert!(set.violation(&up) > 0.0);
            assert_eq!(set.violation(&down), 0.0);
        }
        assert_relative_eq!((map * Vector2::new(0.0, fz))[1], 33.5, epsilon = 1e-9);
        assert_relative_eq!(map * dir * 2.0, force_to_torque(dir, q, 0.0, &LINKS), epsilon = 1e-12);
    }
}
