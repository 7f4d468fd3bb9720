use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::model::{DiscreteModel, PhaseSchedule, INPUT_DIM, STATE_DIM};

use super::IlcError;

/// How state offsets evolve after the last input sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlightErrorModel {
    /// Offsets keep propagating through `A` during flight.
    #[default]
    Propagated,
    /// Every flight row repeats the last contact row.
    Frozen,
}

impl std::str::FromStr for FlightErrorModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "propagated" => Ok(Self::Propagated),
            "frozen" => Ok(Self::Frozen),
            other => Err(format!("unknown flight error model `{other}` (expected frozen|propagated)")),
        }
    }
}

/// Trial-to-trial map `e_{k+1} = e_k − G_k Δu` over samples `1..=N`.
///
/// Row block `m − 1` belongs to sample `m`; column block `n − 1` to input
/// sample `n − 1`. Block `(m, n)` is `A^{m−n} B_{n−1}` for `n ≤ m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedModel {
    pub g: DMatrix<f64>,
    pub a_mat: Matrix6<f64>,
    pub n_total: usize,
    pub n_contact: usize,
}

pub fn build_lifted(
    model: &DiscreteModel,
    schedule: &PhaseSchedule,
    flight: FlightErrorModel,
) -> Result<LiftedModel, IlcError> {
    let n_contact = schedule.n_contact();
    let n_total = schedule.n_total();
    if model.n_contact() != n_contact {
        return Err(IlcError::Dimension {
            what: "input matrices",
            expected: n_contact,
            got: model.n_contact(),
        });
    }
    let cols = INPUT_DIM * n_contact;
    let mut g = DMatrix::zeros(STATE_DIM * n_total, cols);
    let a = model.a_mat;
    for m in 1..=n_total {
        let row = STATE_DIM * (m - 1);
        if m > 1 {
            let previous = g.rows(row - STATE_DIM, STATE_DIM).clone_owned();
            if m > n_contact && flight == FlightErrorModel::Frozen {
                g.rows_mut(row, STATE_DIM).copy_from(&previous);
            } else {
                g.rows_mut(row, STATE_DIM).copy_from(&(a * previous));
            }
        }
        if m <= n_contact {
            g.view_mut((row, INPUT_DIM * (m - 1)), (STATE_DIM, INPUT_DIM))
                .copy_from(&model.b_mats[m - 1]);
        }
    }
    Ok(LiftedModel {
        g,
        a_mat: a,
        n_total,
        n_contact,
    })
}

impl LiftedModel {
    /// Row block of sample `t` (`1 ≤ t ≤ N`).
    pub fn sample_rows(&self, t: usize) -> DMatrix<f64> {
        self.g.rows(STATE_DIM * (t - 1), STATE_DIM).clone_owned()
    }

    /// Rows of the samples `lo..=hi`.
    pub fn window_rows(&self, lo: usize, hi: usize) -> DMatrix<f64> {
        self.g.rows(STATE_DIM * (lo - 1), STATE_DIM * (hi - lo + 1)).clone_owned()
    }

    /// Predicted errors of the next trial, `e_{k+1,t} = e_{k,t} − (G Δu)_t`,
    /// for samples `0..=N` (sample 0 is not affected by any input).
    pub fn predict_error(&self, e_k: &[Vector6<f64>], du: &DVector<f64>) -> Result<Vec<Vector6<f64>>, IlcError> {
        if e_k.len() != self.n_total + 1 {
            return Err(IlcError::Dimension {
                what: "error samples",
                expected: self.n_total + 1,
                got: e_k.len(),
            });
        }
        if du.len() != self.g.ncols() {
            return Err(IlcError::Dimension {
                what: "input offset",
                expected: self.g.ncols(),
                got: du.len(),
            });
        }
        let delta = &self.g * du;
        let mut out = Vec::with_capacity(e_k.len());
        out.push(e_k[0]);
        for t in 1..=self.n_total {
            let d = delta.fixed_rows::<6>(STATE_DIM * (t - 1));
            out.push(e_k[t] - d);
        }
        Ok(out)
    }
}

/// Stack per-sample inputs into one vector.
pub fn stack_inputs(u: &[crate::model::Input]) -> DVector<f64> {
    DVector::from_iterator(u.len() * INPUT_DIM, u.iter().flat_map(|s| s.iter().copied()))
}

/// Inverse of [`stack_inputs`].
pub fn unstack_inputs(z: &DVector<f64>) -> Vec<crate::model::Input> {
    z.as_slice()
        .chunks(INPUT_DIM)
        .map(crate::model::Input::from_column_slice)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{discretize, FootGeometry, Matrix6x4, RobotParams};
    use approx::assert_relative_eq;
    use nalgebra::Vector2;
    use proptest::prelude::*;

    fn toy(a: Matrix6<f64>, n_contact: usize, n_total: usize) -> (DiscreteModel, PhaseSchedule) {
        let b_mats = (0..n_contact)
            .map(|i| Matrix6x4::from_fn(|r, c| (r + 2 * c + i) as f64 * 0.1 + 1.0))
            .collect();
        let schedule = PhaseSchedule {
            n_dc: 1,
            n_sc: n_contact - 1,
            n_fl: n_total - n_contact,
            dt: 0.01,
        };
        (
            DiscreteModel {
                a_mat: a,
                b_mats,
                c_vec: Vector6::zeros(),
                dt: 0.01,
            },
            schedule,
        )
    }

    #[test]
    fn hand_expansion_with_identity_transition() {
        let (model, schedule) = toy(Matrix6::identity(), 2, 3);
        let l = build_lifted(&model, &schedule, FlightErrorModel::Propagated).unwrap();
        let (b0, b1) = (&model.b_mats[0], &model.b_mats[1]);
        let block = |m: usize, n: usize| l.g.view((6 * m, 4 * n), (6, 4)).clone_owned();
        assert_eq!(block(0, 0), *b0);
        assert_eq!(block(0, 1), Matrix6x4::zeros());
        assert_eq!(block(1, 0), *b0);
        assert_eq!(block(1, 1), *b1);
        assert_eq!(block(2, 0), *b0);
        assert_eq!(block(2, 1), *b1);
    }

    #[test]
    fn doubling_transition_doubles_flight_row() {
        let (model, schedule) = toy(Matrix6::identity() * 2.0, 2, 4);
        let l = build_lifted(&model, &schedule, FlightErrorModel::Propagated).unwrap();
        assert_eq!(l.sample_rows(3), l.sample_rows(2) * 2.0);
        assert_eq!(l.sample_rows(4), l.sample_rows(2) * 4.0);
        let frozen = build_lifted(&model, &schedule, FlightErrorModel::Frozen).unwrap();
        assert_eq!(frozen.sample_rows(4), frozen.sample_rows(2));
    }

    #[test]
    fn goal_window_is_the_last_six_rows() {
        let (model, schedule) = toy(Matrix6::identity(), 3, 5);
        let l = build_lifted(&model, &schedule, FlightErrorModel::Propagated).unwrap();
        let last = l.window_rows(5, 5);
        assert_eq!(last.nrows(), 6);
        assert_eq!(last, l.g.rows(l.g.nrows() - 6, 6).clone_owned());
    }

    #[test]
    fn zero_offset_keeps_errors() {
        let (model, schedule) = toy(Matrix6::identity(), 2, 3);
        let l = build_lifted(&model, &schedule, FlightErrorModel::Propagated).unwrap();
        let e: Vec<_> = (0..4).map(|i| Vector6::repeat(i as f64)).collect();
        assert_eq!(l.predict_error(&e, &DVector::zeros(8)).unwrap(), e);
        assert!(l.predict_error(&e[..3], &DVector::zeros(8)).is_err());
    }

    fn srb_model(schedule: &PhaseSchedule, seed: f64) -> DiscreteModel {
        let feet: Vec<_> = (0..schedule.n_contact())
            .map(|t| {
                let s = (t as f64 * 0.37 + seed).sin();
                FootGeometry {
                    r_front: Vector2::new(0.15 + 0.02 * s, -0.27 + 0.01 * s),
                    r_rear: Vector2::new(-0.12 - 0.03 * s, -0.28 - 0.02 * s),
                }
            })
            .collect();
        discretize(&feet, schedule, &RobotParams::default()).unwrap()
    }

    #[test]
    fn impulse_matches_linear_rollout() {
        let schedule = PhaseSchedule {
            n_dc: 4,
            n_sc: 3,
            n_fl: 5,
            dt: 0.01,
        };
        let model = srb_model(&schedule, 0.3);
        let l = build_lifted(&model, &schedule, FlightErrorModel::Propagated).unwrap();
        let j = 2;
        let mut du = DVector::zeros(4 * schedule.n_contact());
        du[4 * j + 3] = 1.0;
        let e0 = vec![Vector6::zeros(); schedule.n_total() + 1];
        let e1 = l.predict_error(&e0, &du).unwrap();
        let mut x = Vector6::zeros();
        for t in 0..schedule.n_total() {
            x = model.a_mat * x;
            if t == j {
                x += model.b_mats[j].column(3);
            }
            assert_relative_eq!(e1[t + 1], -x, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn prediction_equals_rollout_difference(
            seed in -3.0f64..3.0,
            du in proptest::collection::vec(-50.0f64..50.0, 4 * 9),
            u in proptest::collection::vec(-100.0f64..100.0, 4 * 9),
        ) {
            let schedule = PhaseSchedule { n_dc: 5, n_sc: 4, n_fl: 7, dt: 0.01 };
            let model = srb_model(&schedule, seed);
            let l = build_lifted(&model, &schedule, FlightErrorModel::Propagated).unwrap();
            let u_k = unstack_inputs(&DVector::from_vec(u));
            let du = DVector::from_vec(du);
            let u_next = unstack_inputs(&(stack_inputs(&u_k) + &du));
            let x0 = Vector6::new(0.0, 0.27, 0.0, 0.0, 0.0, 0.0);
            let xs_k = model.rollout(&x0, &u_k, schedule.n_total());
            let xs_next = model.rollout(&x0, &u_next, schedule.n_total());
            let reference: Vec<_> = (0..=schedule.n_total()).map(|t| Vector6::repeat(t as f64 * 0.01)).collect();
            let e_k: Vec<_> = reference.iter().zip(&xs_k).map(|(r, x)| r - x).collect();
            let predicted = l.predict_error(&e_k, &du).unwrap();
            for t in 0..=schedule.n_total() {
                let actual = reference[t] - xs_next[t];
                prop_assert!((predicted[t] - actual).amax() < 1e-10);
            }
            let n_c = schedule.n_contact();
            for t in n_c + 1..=schedule.n_total() {
                let power = model.a_mat.pow((t - n_c) as u32);
                let expected = DMatrix::from_fn(6, 6, |r, c| power[(r, c)]) * l.sample_rows(n_c);
                prop_assert!((l.sample_rows(t) - expected).amax() < 1e-12);
            }
        }
    }
}
