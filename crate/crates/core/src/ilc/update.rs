use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector6};

use crate::model::{Input, INPUT_DIM, STATE_DIM};
use crate::qp::{self, QpProblem, QpSettings, QpStatus};

use super::constraints::ConstraintSet;
use super::lifted::{stack_inputs, unstack_inputs, LiftedModel};
use super::{IlcError, IlcWeights};

/// Samples whose errors enter the objective, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlcUpdate {
    pub du: DVector<f64>,
    pub u_next: Vec<Input>,
    pub status: QpStatus,
    /// QP objective at `Δu*` and at `Δu = 0`.
    pub objective: f64,
    pub objective_at_zero: f64,
    pub solve_seconds: f64,
    /// The update was replaced by `Δu = 0`.
    pub fell_back: bool,
}

/// `W = 2(Gᵀ Q^e G + Q^u)`, `h = −2 Gᵀ Q^e e` for the selected rows.
pub fn quadratic_terms(
    g_sel: &DMatrix<f64>,
    q_e_diag: &DVector<f64>,
    e_sel: &DVector<f64>,
    q_u_diag: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut weighted = g_sel.clone();
    for (r, q) in q_e_diag.iter().enumerate() {
        weighted.row_mut(r).scale_mut(*q);
    }
    let mut w = g_sel.tr_mul(&weighted) * 2.0;
    for (i, q) in q_u_diag.iter().enumerate() {
        w[(i, i)] += 2.0 * q;
    }
    // Symmetrise round-off.
    let w = (&w + w.transpose()) * 0.5;
    let h = -2.0 * weighted.tr_mul(e_sel);
    (w, h)
}

/// Solve the learning QP for generic selected rows. Falls back to `Δu = 0`
/// when the QP is infeasible.
pub fn solve_update(
    g_sel: &DMatrix<f64>,
    q_e_diag: &DVector<f64>,
    e_sel: &DVector<f64>,
    q_u_diag: &DVector<f64>,
    constraints: Option<&ConstraintSet>,
    settings: &QpSettings,
) -> Result<(DVector<f64>, QpStatus, f64, f64, f64), IlcError> {
    let (w, h) = quadratic_terms(g_sel, q_e_diag, e_sel, q_u_diag);
    let mut problem = QpProblem::new(w, h);
    if let Some(c) = constraints {
        problem = problem
            .with_inequalities(c.g_mat.clone(), c.g_vec.clone())
            .with_equalities(c.e_mat.clone(), c.e_vec.clone());
    }
    let start = Instant::now();
    let sol = qp::solve(&problem, settings)?;
    let seconds = start.elapsed().as_secs_f64();
    let zero = DVector::zeros(problem.dim());
    let at_zero = problem.objective(&zero);
    match sol.status {
        QpStatus::Optimal => Ok((sol.z, sol.status, sol.objective, at_zero, seconds)),
        status => {
            log::warn!("learning QP ended with {status:?}; repeating the previous inputs");
            Ok((zero, status, at_zero, at_zero, seconds))
        }
    }
}

/// Stack the window rows of `G` and `e` with the per-sample weights.
fn select(
    lifted: &LiftedModel,
    errors: &[Vector6<f64>],
    weights: &IlcWeights,
    window: Window,
) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let g_sel = lifted.window_rows(window.first, window.last);
    let samples = window.last - window.first + 1;
    let mut e_sel = DVector::zeros(STATE_DIM * samples);
    let mut q_sel = DVector::zeros(STATE_DIM * samples);
    for (i, t) in (window.first..=window.last).enumerate() {
        e_sel.fixed_rows_mut::<6>(STATE_DIM * i).copy_from(&errors[t]);
        q_sel
            .fixed_rows_mut::<6>(STATE_DIM * i)
            .copy_from(&Vector6::from_row_slice(&weights.q_e));
    }
    (g_sel, q_sel, e_sel)
}

/// One staged learning update from the logged errors `errors` (samples
/// `0..=N`) and inputs `u_k`.
pub fn ilc_step(
    u_k: &[Input],
    errors: &[Vector6<f64>],
    lifted: &LiftedModel,
    weights: &IlcWeights,
    window: Window,
    constraints: &ConstraintSet,
    settings: &QpSettings,
) -> Result<IlcUpdate, IlcError> {
    if window.first == 0 || window.last > lifted.n_total || window.first > window.last {
        return Err(IlcError::Window {
            first: window.first,
            last: window.last,
            n_total: lifted.n_total,
        });
    }
    let (g_sel, q_sel, e_sel) = select(lifted, errors, weights, window);
    let q_u = DVector::from_iterator(
        INPUT_DIM * lifted.n_contact,
        (0..lifted.n_contact).flat_map(|_| weights.q_u.iter().copied()),
    );
    let (du, status, objective, objective_at_zero, solve_seconds) =
        solve_update(&g_sel, &q_sel, &e_sel, &q_u, Some(constraints), settings)?;
    let fell_back = status != QpStatus::Optimal;
    if !fell_back && constraints.violation(&DVector::zeros(du.len())) <= 1e-9 {
        // Δu = 0 is feasible, so the optimum can be no worse.
        let slack = 1e-9 * objective_at_zero.abs().max(1.0);
        debug_assert!(
            objective <= objective_at_zero + slack,
            "learning QP worsened the predicted objective: {objective} > {objective_at_zero}"
        );
    }
    let u_next = unstack_inputs(&(stack_inputs(u_k) + &du));
    Ok(IlcUpdate {
        du,
        u_next,
        status,
        objective,
        objective_at_zero,
        solve_seconds,
        fell_back,
    })
}

/// Full-horizon baseline: the same update with every sample weighted.
pub fn ilc_mpc_step(
    u_k: &[Input],
    errors: &[Vector6<f64>],
    lifted: &LiftedModel,
    weights: &IlcWeights,
    constraints: &ConstraintSet,
    settings: &QpSettings,
) -> Result<IlcUpdate, IlcError> {
    let window = Window {
        first: 1,
        last: lifted.n_total,
    };
    ilc_step(u_k, errors, lifted, weights, window, constraints, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_ridge_solution() {
        let (b, q, r, e) = (0.3, 2.0, 0.05, 1.7);
        let (du, status, ..) = solve_update(
            &DMatrix::from_element(1, 1, b),
            &DVector::from_element(1, q),
            &DVector::from_element(1, e),
            &DVector::from_element(1, r),
            None,
            &QpSettings::default(),
        )
        .unwrap();
        assert_eq!(status, QpStatus::Optimal);
        assert_relative_eq!(du[0], q * b * e / (q * b * b + r), epsilon = 1e-12);
    }

    #[test]
    fn zero_error_gives_zero_update() {
        let g = DMatrix::from_fn(3, 2, |r, c| (r + c) as f64 + 1.0);
        let (du, ..) = solve_update(
            &g,
            &DVector::repeat(3, 1.0),
            &DVector::zeros(3),
            &DVector::repeat(2, 1e-5),
            None,
            &QpSettings::default(),
        )
        .unwrap();
        assert_eq!(du, DVector::zeros(2));
    }

    #[test]
    fn vanishing_input_weight_interpolates_exactly() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
        let e = DVector::from_vec(vec![0.4, -0.2]);
        let (du, ..) = solve_update(
            &g,
            &DVector::repeat(2, 1.0),
            &e,
            &DVector::repeat(2, 1e-12),
            None,
            &QpSettings::default(),
        )
        .unwrap();
        assert_relative_eq!(&e - &g * du, DVector::zeros(2), epsilon = 1e-9);
    }
}
