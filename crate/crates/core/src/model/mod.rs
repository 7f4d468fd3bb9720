//! Planar single-rigid-body (SRB) model of the trunk.
//!
//! The learner never sees the articulated plant. It reasons with a trunk
//! driven by two lumped contact forces (front and rear planar feet):
//!
//! ```text
//! x = [p_x, p_z, θ, v_x, v_z, ω]
//! p̈ = Σ u_i / m − g e_z
//! I ω̇ = Σ r_i × u_i        (planar cross product r_x f_z − r_z f_x)
//! ```
//!
//! The discrete model is the first-order Taylor step of the above,
//! `x_{t+1} = A x_t + B_t u_t + c`, where the constant `c` carries gravity
//! on the velocity rows. Trial-to-trial differencing cancels `c`, so the
//! learning update only ever sees `A` and `B_t`.

pub mod kinematics;

use nalgebra::{Matrix6, SMatrix, Vector2, Vector4, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kinematics::{LegLinks, LegState};

/// Dimension of the SRB state.
pub const STATE_DIM: usize = 6;
/// Dimension of one contact-force sample: front (f_x, f_z), rear (f_x, f_z).
pub const INPUT_DIM: usize = 4;

pub type Matrix6x4 = SMatrix<f64, 6, 4>;
/// One sample of the ground-reaction-force schedule.
pub type Input = Vector4<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite model input: {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

fn require_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}

/// Planar trunk state. Pitch is positive nose-up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyState {
    pub p_x: f64,
    pub p_z: f64,
    pub theta: f64,
    pub v_x: f64,
    pub v_z: f64,
    pub omega: f64,
}

impl BodyState {
    pub fn at_rest(p_x: f64, p_z: f64, theta: f64) -> Self {
        Self {
            p_x,
            p_z,
            theta,
            ..Self::default()
        }
    }

    /// `[p; θ; ṗ; θ̇]`.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.p_x, self.p_z, self.theta, self.v_x, self.v_z, self.omega)
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self {
            p_x: x[0],
            p_z: x[1],
            theta: x[2],
            v_x: x[3],
            v_z: x[4],
            omega: x[5],
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.p_x, self.p_z)
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.v_x, self.v_z)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Mass and geometry of the robot. Link masses are those of one planar
/// (lumped left/right pair) leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    pub trunk_mass: f64,
    pub trunk_inertia: f64,
    pub body_length: f64,
    pub trunk_height: f64,
    pub thigh_length: f64,
    pub calf_length: f64,
    pub thigh_mass: f64,
    pub calf_mass: f64,
    pub gravity: f64,
}

/// Pitch inertia of a solid box about its centre.
pub fn box_pitch_inertia(mass: f64, length: f64, height: f64) -> f64 {
    mass * (length * length + height * height) / 12.0
}

impl Default for RobotParams {
    fn default() -> Self {
        let trunk_mass = 9.60;
        let body_length = 0.366;
        let trunk_height = 0.114;
        Self {
            trunk_mass,
            trunk_inertia: box_pitch_inertia(trunk_mass, body_length, trunk_height),
            body_length,
            trunk_height,
            thigh_length: 0.2,
            calf_length: 0.2,
            thigh_mass: 1.61,
            calf_mass: 0.66,
            gravity: 9.81,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        require_positive("trunk_mass", self.trunk_mass)?;
        require_positive("trunk_inertia", self.trunk_inertia)?;
        require_positive("body_length", self.body_length)?;
        require_positive("trunk_height", self.trunk_height)?;
        require_positive("thigh_length", self.thigh_length)?;
        require_positive("calf_length", self.calf_length)?;
        require_positive("thigh_mass", self.thigh_mass)?;
        require_positive("calf_mass", self.calf_mass)?;
        require_positive("gravity", self.gravity)
    }

    pub fn links(&self) -> LegLinks {
        LegLinks {
            thigh: self.thigh_length,
            calf: self.calf_length,
        }
    }

    /// Body-frame hip position of the front leg relative to the trunk CoM.
    pub fn front_hip(&self) -> Vector2<f64> {
        Vector2::new(0.5 * self.body_length, 0.0)
    }

    pub fn rear_hip(&self) -> Vector2<f64> {
        Vector2::new(-0.5 * self.body_length, 0.0)
    }

    /// Trunk plus both planar legs.
    pub fn total_mass(&self) -> f64 {
        self.trunk_mass + 2.0 * (self.thigh_mass + self.calf_mass)
    }
}

/// Per-motor actuator limits and the linear voltage model `V = ρτ + σq̇`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct ActuatorParams {
    pub tau_max: f64,
    pub qdot_max: f64,
    pub v_bat: f64,
    /// Volts per N·m, `r / (K_τ g_r)`.
    pub rho: f64,
    /// Volt·s per rad, `K_v g_r`.
    pub sigma: f64,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        let tau_max = 33.5;
        let qdot_max = 21.0;
        let v_bat = 21.5;
        Self {
            tau_max,
            qdot_max,
            v_bat,
            // Stall torque draws the full supply; back-EMF at top speed does too.
            rho: v_bat / tau_max,
            sigma: v_bat / qdot_max,
        }
    }
}

impl ActuatorParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        require_positive("tau_max", self.tau_max)?;
        require_positive("qdot_max", self.qdot_max)?;
        require_positive("v_bat", self.v_bat)?;
        require_positive("rho", self.rho)?;
        require_positive("sigma", self.sigma)?;
        let no_load_speed = self.v_bat / self.sigma;
        if no_load_speed < 0.99 * self.qdot_max {
            return Err(ModelError::InvalidParameter {
                name: "sigma",
                reason: format!(
                    "no-load speed v_bat/sigma = {no_load_speed:.4} rad/s is below qdot_max = {}",
                    self.qdot_max
                ),
            });
        }
        Ok(())
    }

    pub fn voltage(&self, tau: f64, qdot: f64) -> f64 {
        self.rho * tau + self.sigma * qdot
    }

    /// Torque interval allowed by the supply voltage at joint speed `qdot`.
    pub fn mdc_interval(&self, qdot: f64) -> (f64, f64) {
        (
            (-self.v_bat - self.sigma * qdot) / self.rho,
            (self.v_bat - self.sigma * qdot) / self.rho,
        )
    }
}

/// Contact phase of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// All legs on the ground.
    AllLeg,
    /// Rear legs only.
    RearLeg,
    Flight,
}

impl Phase {
    pub fn front_stance(self) -> bool {
        matches!(self, Phase::AllLeg)
    }

    pub fn rear_stance(self) -> bool {
        matches!(self, Phase::AllLeg | Phase::RearLeg)
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::AllLeg => "dc",
            Phase::RearLeg => "sc",
            Phase::Flight => "fl",
        }
    }
}

/// Sample counts of the fixed contact schedule dc → sc → fl.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct PhaseSchedule {
    pub n_dc: usize,
    pub n_sc: usize,
    pub n_fl: usize,
    pub dt: f64,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self {
            n_dc: 30,
            n_sc: 20,
            n_fl: 30,
            dt: 0.01,
        }
    }
}

impl PhaseSchedule {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, n) in [("n_dc", self.n_dc), ("n_sc", self.n_sc), ("n_fl", self.n_fl)] {
            if n == 0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    reason: "must be at least 1".into(),
                });
            }
        }
        require_positive("dt", self.dt)
    }

    /// `N_c = n_dc + n_sc`, the number of input samples.
    pub fn n_contact(&self) -> usize {
        self.n_dc + self.n_sc
    }

    /// `N = N_c + n_fl`, the final sample index.
    pub fn n_total(&self) -> usize {
        self.n_contact() + self.n_fl
    }

    pub fn flight_time(&self) -> f64 {
        self.n_fl as f64 * self.dt
    }

    pub fn contact_time(&self) -> f64 {
        self.n_contact() as f64 * self.dt
    }

    /// Phase of the interval `[t, t + 1)`.
    pub fn phase(&self, t: usize) -> Phase {
        if t < self.n_dc {
            Phase::AllLeg
        } else if t < self.n_contact() {
            Phase::RearLeg
        } else {
            Phase::Flight
        }
    }
}

/// World-frame foot positions relative to the trunk CoM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootGeometry {
    pub r_front: Vector2<f64>,
    pub r_rear: Vector2<f64>,
}

impl FootGeometry {
    pub fn is_finite(&self) -> bool {
        self.r_front.iter().chain(self.r_rear.iter()).all(|v| v.is_finite())
    }
}

fn cross(r: &Vector2<f64>, f: &Vector2<f64>) -> f64 {
    r.x * f.y - r.y * f.x
}

/// Continuous SRB accelerations for per-foot world forces `[front, rear]`.
pub fn srb_continuous_accel(
    state: &BodyState,
    forces: &[Vector2<f64>; 2],
    feet: &FootGeometry,
    params: &RobotParams,
) -> Result<(Vector2<f64>, f64), ModelError> {
    if !state.is_finite() {
        return Err(ModelError::NonFinite("state"));
    }
    if !forces.iter().all(|f| f.iter().all(|v| v.is_finite())) {
        return Err(ModelError::NonFinite("forces"));
    }
    if !feet.is_finite() {
        return Err(ModelError::NonFinite("foot geometry"));
    }
    let total = forces[0] + forces[1];
    let linear = total / params.trunk_mass - Vector2::new(0.0, params.gravity);
    let moment = cross(&feet.r_front, &forces[0]) + cross(&feet.r_rear, &forces[1]);
    Ok((linear, moment / params.trunk_inertia))
}

/// `δt · B_c(r_1, r_2)`: force rows `δt/m`, moment rows `δt · I⁻¹[−r_z, r_x]`.
pub fn input_matrix(feet: &FootGeometry, dt: f64, params: &RobotParams) -> Matrix6x4 {
    let mut b = Matrix6x4::zeros();
    let f = dt / params.trunk_mass;
    let i = dt / params.trunk_inertia;
    for (col, r) in [(0, &feet.r_front), (2, &feet.r_rear)] {
        b[(3, col)] = f;
        b[(4, col + 1)] = f;
        b[(5, col)] = -r.y * i;
        b[(5, col + 1)] = r.x * i;
    }
    b
}

/// `A = I + δt A_c`.
pub fn transition_matrix(dt: f64) -> Matrix6<f64> {
    let mut a = Matrix6::identity();
    for k in 0..3 {
        a[(k, k + 3)] = dt;
    }
    a
}

/// Discrete SRB model of one trial: `x_{t+1} = A x_t + B_t u_t + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub a_mat: Matrix6<f64>,
    /// One input matrix per contact sample, `N_c` entries.
    pub b_mats: Vec<Matrix6x4>,
    /// Gravity offset on the velocity rows.
    pub c_vec: Vector6<f64>,
    pub dt: f64,
}

/// Build the discrete model from one foot geometry per contact sample.
pub fn discretize(
    feet_per_sample: &[FootGeometry],
    schedule: &PhaseSchedule,
    params: &RobotParams,
) -> Result<DiscreteModel, ModelError> {
    schedule.validate()?;
    params.validate()?;
    if feet_per_sample.len() != schedule.n_contact() {
        return Err(ModelError::Dimension {
            what: "foot geometry sequence",
            expected: schedule.n_contact(),
            got: feet_per_sample.len(),
        });
    }
    if let Some(bad) = feet_per_sample.iter().position(|f| !f.is_finite()) {
        log::debug!("non-finite foot geometry at sample {bad}");
        return Err(ModelError::NonFinite("foot geometry"));
    }
    let dt = schedule.dt;
    Ok(DiscreteModel {
        a_mat: transition_matrix(dt),
        b_mats: feet_per_sample
            .iter()
            .map(|f| input_matrix(f, dt, params))
            .collect(),
        c_vec: Vector6::new(0.0, 0.0, 0.0, 0.0, -dt * params.gravity, 0.0),
        dt,
    })
}

impl DiscreteModel {
    pub fn n_contact(&self) -> usize {
        self.b_mats.len()
    }

    /// One step; samples at or beyond `N_c` receive no input.
    pub fn step(&self, x: &Vector6<f64>, t: usize, u: Option<&Input>) -> Vector6<f64> {
        let mut next = self.a_mat * x + self.c_vec;
        if let (Some(b), Some(u)) = (self.b_mats.get(t), u) {
            next += b * u;
        }
        next
    }

    /// States `x_0 .. x_{n_total}` under the input schedule `inputs`.
    pub fn rollout(&self, x0: &Vector6<f64>, inputs: &[Input], n_total: usize) -> Vec<Vector6<f64>> {
        let mut states = Vec::with_capacity(n_total + 1);
        states.push(*x0);
        for t in 0..n_total {
            let next = self.step(&states[t], t, inputs.get(t));
            states.push(next);
        }
        states
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params_with_inertia(inertia: f64) -> RobotParams {
        RobotParams {
            trunk_inertia: inertia,
            ..RobotParams::default()
        }
    }

    fn rear_only(r_rear: Vector2<f64>) -> FootGeometry {
        FootGeometry {
            r_front: Vector2::new(0.183, -0.25),
            r_rear,
        }
    }

    #[test]
    fn default_inertia_is_box_approximation() {
        let p = RobotParams::default();
        assert_relative_eq!(p.trunk_inertia, 0.117_56, epsilon = 1e-4);
        p.validate().unwrap();
    }

    #[test]
    fn free_fall_without_forces() {
        let p = RobotParams::default();
        let (lin, ang) = srb_continuous_accel(
            &BodyState::default(),
            &[Vector2::zeros(); 2],
            &rear_only(Vector2::new(-0.1, -0.25)),
            &p,
        )
        .unwrap();
        assert_eq!(lin, Vector2::new(0.0, -9.81));
        assert_eq!(ang, 0.0);
    }

    #[test]
    fn single_rear_foot_push() {
        let p = params_with_inertia(0.15);
        let forces = [Vector2::zeros(), Vector2::new(0.0, 117.7)];
        let (lin, ang) =
            srb_continuous_accel(&BodyState::default(), &forces, &rear_only(Vector2::new(-0.1, -0.25)), &p)
                .unwrap();
        assert_relative_eq!(lin.y, 117.7 / 9.60 - 9.81, epsilon = 1e-12);
        assert_relative_eq!(lin.y, 2.45, epsilon = 0.01);
        assert_relative_eq!(ang, -0.1 * 117.7 / 0.15, epsilon = 1e-12);
        assert_relative_eq!(ang, -78.5, epsilon = 0.1);
    }

    #[test]
    fn mirrored_horizontal_forces_cancel_but_twist() {
        let p = RobotParams::default();
        // Pitched trunk: mirrored r_x, different foot heights below the CoM.
        let feet = FootGeometry {
            r_front: Vector2::new(0.15, -0.20),
            r_rear: Vector2::new(-0.15, -0.30),
        };
        let forces = [Vector2::new(20.0, 0.0), Vector2::new(-20.0, 0.0)];
        let (lin, ang) = srb_continuous_accel(&BodyState::default(), &forces, &feet, &p).unwrap();
        assert_eq!(lin, Vector2::new(0.0, -9.81));
        let expected = (0.20 * 20.0 + 0.30 * -20.0) / p.trunk_inertia;
        assert_relative_eq!(ang, expected, epsilon = 1e-12);
        assert!(ang.abs() > 1.0);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let p = RobotParams::default();
        let forces = [Vector2::new(f64::NAN, 0.0), Vector2::zeros()];
        let err = srb_continuous_accel(&BodyState::default(), &forces, &rear_only(Vector2::zeros()), &p)
            .unwrap_err();
        assert_eq!(err, ModelError::NonFinite("forces"));
    }

    #[test]
    fn discretize_entries() {
        let schedule = PhaseSchedule {
            n_dc: 1,
            n_sc: 1,
            n_fl: 1,
            dt: 0.01,
        };
        let p = params_with_inertia(0.15);
        let feet = vec![rear_only(Vector2::new(-0.1, -0.25)); 2];
        let m = discretize(&feet, &schedule, &p).unwrap();
        for k in 0..3 {
            assert_eq!(m.a_mat[(k, k + 3)], 0.01);
        }
        assert_eq!(m.a_mat.diagonal(), Vector6::repeat(1.0));
        let b = &m.b_mats[0];
        for (row, col) in [(3, 0), (4, 1), (3, 2), (4, 3)] {
            assert_relative_eq!(b[(row, col)], 0.01 / 9.60, epsilon = 1e-15);
            assert_relative_eq!(b[(row, col)], 1.0417e-3, epsilon = 1e-7);
        }
        assert_relative_eq!(b[(5, 2)], 1.667e-2, epsilon = 1e-5);
        assert_relative_eq!(b[(5, 3)], -6.667e-3, epsilon = 1e-6);
    }

    #[test]
    fn discretize_rejects_wrong_length() {
        let schedule = PhaseSchedule::default();
        let feet = vec![rear_only(Vector2::zeros()); 3];
        let err = discretize(&feet, &schedule, &RobotParams::default()).unwrap_err();
        assert!(matches!(err, ModelError::Dimension { expected: 50, got: 3, .. }));
    }

    #[test]
    fn schedule_identities() {
        let s = PhaseSchedule::default();
        assert_eq!(s.n_contact(), s.n_dc + s.n_sc);
        assert_eq!(s.n_total(), s.n_contact() + s.n_fl);
        assert_eq!(s.phase(0), Phase::AllLeg);
        assert_eq!(s.phase(s.n_dc), Phase::RearLeg);
        assert_eq!(s.phase(s.n_contact()), Phase::Flight);
        assert!(PhaseSchedule { n_sc: 0, ..s }.validate().is_err());
    }

    #[test]
    fn actuator_defaults_are_consistent() {
        let a = ActuatorParams::default();
        a.validate().unwrap();
        assert_relative_eq!(a.voltage(a.tau_max, 0.0), a.v_bat, epsilon = 1e-12);
        assert_relative_eq!(a.voltage(0.0, a.qdot_max), a.v_bat, epsilon = 1e-12);
        let bad = ActuatorParams {
            sigma: 1.2,
            ..a
        };
        assert!(bad.validate().is_err());
    }

    use proptest::prelude::*;

    fn vec2() -> impl Strategy<Value = Vector2<f64>> {
        (-0.5f64..0.5, -0.5f64..0.5).prop_map(|(x, z)| Vector2::new(x, z))
    }

    proptest! {
        #[test]
        fn euler_step_matches_discrete_model(
            x in proptest::array::uniform6(-2.0f64..2.0),
            f in proptest::array::uniform4(-150.0f64..150.0),
            r_front in vec2(),
            r_rear in vec2(),
        ) {
            let p = RobotParams::default();
            let dt = 0.01;
            let feet = FootGeometry { r_front, r_rear };
            let state = BodyState::from_vector(&Vector6::from_row_slice(&x));
            let forces = [Vector2::new(f[0], f[1]), Vector2::new(f[2], f[3])];
            let (lin, ang) = srb_continuous_accel(&state, &forces, &feet, &p).unwrap();
            let xv = state.to_vector();
            let mut euler = xv;
            euler.fixed_rows_mut::<3>(0).axpy(dt, &xv.fixed_rows::<3>(3), 1.0);
            euler[3] += dt * lin.x;
            euler[4] += dt * lin.y;
            euler[5] += dt * ang;
            let schedule = PhaseSchedule { n_dc: 1, n_sc: 1, n_fl: 1, dt };
            let m = discretize(&[feet, feet], &schedule, &p).unwrap();
            let stepped = m.step(&xv, 0, Some(&Input::from_row_slice(&f)));
            prop_assert!((stepped - euler).amax() < 1e-12);
        }

        #[test]
        fn moment_row_is_linear_in_foot_position(rx in -0.4f64..0.4, rz in -0.4f64..0.0, delta in -0.1f64..0.1) {
            let p = RobotParams::default();
            let dt = 0.01;
            let b0 = input_matrix(&rear_only(Vector2::new(rx, rz)), dt, &p);
            let b1 = input_matrix(&rear_only(Vector2::new(rx + delta, rz)), dt, &p);
            prop_assert!((b1[(5, 3)] - b0[(5, 3)] - dt * delta / p.trunk_inertia).abs() < 1e-14);
        }
    }
}
