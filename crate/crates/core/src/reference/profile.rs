use nalgebra::Vector2;

use crate::model::{BodyState, PhaseSchedule};

/// Continuous projectile take-off velocity covering `(dx, dz)` in
/// `flight_time` seconds.
pub fn ballistic_takeoff(dx: f64, dz: f64, flight_time: f64, gravity: f64) -> Vector2<f64> {
    Vector2::new(dx / flight_time, dz / flight_time + 0.5 * gravity * flight_time)
}

/// Take-off velocity that lands exactly on `(dx, dz)` after `steps`
/// explicit-Euler steps of length `dt` (the discrete SRB flight).
pub fn discrete_ballistic_takeoff(dx: f64, dz: f64, steps: usize, dt: f64, gravity: f64) -> Vector2<f64> {
    let n = steps as f64;
    let t = n * dt;
    Vector2::new(dx / t, (dz + gravity * dt * dt * n * (n - 1.0) / 2.0) / t)
}

/// Quintic from `(p0, v0, 0)` to `(p1, v1, 0)` over `duration`, in terms of
/// position, velocity and acceleration at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct Quintic {
    p0: f64,
    dp: f64,
    v0t: f64,
    v1t: f64,
    duration: f64,
}

impl Quintic {
    pub fn new(p0: f64, v0: f64, p1: f64, v1: f64, duration: f64) -> Self {
        Self {
            p0,
            dp: p1 - p0,
            v0t: v0 * duration,
            v1t: v1 * duration,
            duration,
        }
    }

    /// `(p, v, a)` at time `t ∈ [0, duration]`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let s = (t / self.duration).clamp(0.0, 1.0);
        let (s2, s3, s4, s5) = (s * s, s * s * s, s.powi(4), s.powi(5));
        // Rest-to-rest blend, start-velocity and end-velocity bases.
        let b = (10.0 * s3 - 15.0 * s4 + 6.0 * s5, 30.0 * s2 - 60.0 * s3 + 30.0 * s4, 60.0 * s - 180.0 * s2 + 120.0 * s3);
        let h0 = (s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5, 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4, -36.0 * s + 96.0 * s2 - 60.0 * s3);
        let h1 = (-4.0 * s3 + 7.0 * s4 - 3.0 * s5, -12.0 * s2 + 28.0 * s3 - 15.0 * s4, -24.0 * s + 84.0 * s2 - 60.0 * s3);
        let combine = |f: fn(&(f64, f64, f64)) -> f64| self.dp * f(&b) + self.v0t * f(&h0) + self.v1t * f(&h1);
        let p = self.p0 + combine(|x| x.0);
        let v = combine(|x| x.1) / self.duration;
        let a = combine(|x| x.2) / (self.duration * self.duration);
        (p, v, a)
    }
}

/// Contact-phase body profile from `start` to `takeoff`, one quintic per
/// coordinate with zero boundary accelerations, sampled at `0..=N_c`.
pub fn contact_profile(start: &BodyState, takeoff: &BodyState, schedule: &PhaseSchedule) -> Vec<BodyState> {
    let duration = schedule.contact_time();
    let x = Quintic::new(start.p_x, start.v_x, takeoff.p_x, takeoff.v_x, duration);
    let z = Quintic::new(start.p_z, start.v_z, takeoff.p_z, takeoff.v_z, duration);
    let th = Quintic::new(start.theta, start.omega, takeoff.theta, takeoff.omega, duration);
    (0..=schedule.n_contact())
        .map(|t| {
            let time = t as f64 * schedule.dt;
            let (px, vx, _) = x.eval(time);
            let (pz, vz, _) = z.eval(time);
            let (pt, vt, _) = th.eval(time);
            BodyState {
                p_x: px,
                p_z: pz,
                theta: pt,
                v_x: vx,
                v_z: vz,
                omega: vt,
            }
        })
        .collect()
}
