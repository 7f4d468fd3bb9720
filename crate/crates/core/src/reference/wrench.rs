use nalgebra::{DMatrix, DVector, Matrix3x4, Vector3};

use crate::model::{BodyState, FootGeometry, Input, PhaseSchedule, RobotParams};
use crate::qp::{self, QpProblem, QpSettings, QpStatus};
use crate::task::ForceLimits;

use super::ReferenceError;

/// Per-sample contact forces reproducing a body profile.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardForces {
    pub u: Vec<Input>,
    /// `‖A u_t − w_t‖` of each sample: zero when the wrench is reachable.
    pub residual: Vec<f64>,
}

impl FeedforwardForces {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }
}

/// Map from `u` to the net wrench `[F_x, F_z, M]` about the CoM.
pub fn wrench_matrix(feet: &FootGeometry) -> Matrix3x4<f64> {
    let (f, r) = (feet.r_front, feet.r_rear);
    Matrix3x4::new(
        1.0, 0.0, 1.0, 0.0, //
        0.0, 1.0, 0.0, 1.0, //
        -f.y, f.x, -r.y, r.x,
    )
}

/// Wrench the contact forces must supply between samples `t` and `t + 1`.
fn required_wrench(a: &BodyState, b: &BodyState, dt: f64, params: &RobotParams) -> Vector3<f64> {
    let m = params.trunk_mass;
    Vector3::new(
        m * (b.v_x - a.v_x) / dt,
        m * ((b.v_z - a.v_z) / dt + params.gravity),
        params.trunk_inertia * (b.omega - a.omega) / dt,
    )
}

/// Inequality rows `G u ≤ g` and equality rows `E u = 0` of one sample.
fn sample_constraints(
    front_stance: bool,
    rear_stance: bool,
    mu: f64,
    limits: &ForceLimits,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let mut g_rows = Vec::new();
    let mut e_rows = Vec::new();
    for (leg, stance) in [front_stance, rear_stance].into_iter().enumerate() {
        let (ix, iz) = (2 * leg, 2 * leg + 1);
        if !stance {
            e_rows.push(ix);
            e_rows.push(iz);
            continue;
        }
        let mut row = |cx: f64, cz: f64, rhs: f64| {
            let mut r = [0.0; 4];
            r[ix] = cx;
            r[iz] = cz;
            g_rows.push((r, rhs));
        };
        row(0.0, -1.0, -limits.f_min);
        row(0.0, 1.0, limits.f_max);
        row(1.0, -mu, 0.0);
        row(-1.0, -mu, 0.0);
    }
    let g = DMatrix::from_fn(g_rows.len(), 4, |r, c| g_rows[r].0[c]);
    let gv = DVector::from_iterator(g_rows.len(), g_rows.iter().map(|r| r.1));
    let e = DMatrix::from_fn(e_rows.len(), 4, |r, c| if e_rows[r] == c { 1.0 } else { 0.0 });
    (g, gv, e)
}

/// Smallest-norm forces that produce the profile's wrench at every contact
/// sample. Where no admissible force does, the least-squares wrench fit is
/// returned and its residual reported.
pub fn feedforward_forces(
    body_ref: &[BodyState],
    feet: &[FootGeometry],
    schedule: &PhaseSchedule,
    params: &RobotParams,
    mu: f64,
    limits: &ForceLimits,
) -> Result<FeedforwardForces, ReferenceError> {
    let n_contact = schedule.n_contact();
    if body_ref.len() < n_contact + 1 || feet.len() < n_contact {
        return Err(ReferenceError::Length {
            expected: n_contact,
            got: feet.len().min(body_ref.len().saturating_sub(1)),
        });
    }
    let settings = QpSettings::default();
    let mut u = Vec::with_capacity(n_contact);
    let mut residual = Vec::with_capacity(n_contact);
    for t in 0..n_contact {
        let phase = schedule.phase(t);
        let w = required_wrench(&body_ref[t], &body_ref[t + 1], schedule.dt, params);
        let a = wrench_matrix(&feet[t]);
        let (g, gv, e) = sample_constraints(phase.front_stance(), phase.rear_stance(), mu, limits);
        let a_d = DMatrix::from_fn(3, 4, |r, c| a[(r, c)]);
        let w_d = DVector::from_column_slice(w.as_slice());

        let mut e_exact = DMatrix::zeros(e.nrows() + 3, 4);
        e_exact.rows_mut(0, 3).copy_from(&a_d);
        e_exact.rows_mut(3, e.nrows()).copy_from(&e);
        let mut ev = DVector::zeros(e.nrows() + 3);
        ev.rows_mut(0, 3).copy_from(&w_d);
        let exact = QpProblem::new(DMatrix::identity(4, 4) * 2.0, DVector::zeros(4))
            .with_inequalities(g.clone(), gv.clone())
            .with_equalities(e_exact, ev);
        let sol = qp::solve(&exact, &settings)?;
        let z = if sol.status == QpStatus::Optimal {
            sol.z
        } else {
            // Weighted least squares on the wrench, tiny force regulariser.
            let rho = 1e4 / (params.trunk_mass * params.gravity).powi(2);
            let w_mat = (a_d.transpose() * &a_d) * (2.0 * rho) + DMatrix::identity(4, 4) * 2e-6;
            let h = -(a_d.transpose() * &w_d) * (2.0 * rho);
            let fit = QpProblem::new(w_mat, h)
                .with_inequalities(g, gv)
                .with_equalities(e.clone(), DVector::zeros(e.nrows()));
            let sol = qp::solve(&fit, &settings)?;
            if sol.status != QpStatus::Optimal {
                return Err(ReferenceError::Infeasible {
                    sample: t,
                    what: "contact-force limits",
                });
            }
            sol.z
        };
        let mut ut = Input::from_column_slice(z.as_slice());
        // The solver meets swing equalities only to round-off.
        for (leg, stance) in [phase.front_stance(), phase.rear_stance()].into_iter().enumerate() {
            if !stance {
                ut[2 * leg] = 0.0;
                ut[2 * leg + 1] = 0.0;
            }
        }
        residual.push((a * ut - w).norm());
        u.push(ut);
    }
    Ok(FeedforwardForces { u, residual })
}
