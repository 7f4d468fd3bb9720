//! Planar articulated robot: trunk plus two lumped two-link legs.
//!
//! Generalised coordinates `s = [x, z, θ, q_F1, q_F2, q_R1, q_R2]`, where
//! `(x, z)` is the trunk centre. Every body point is the trunk centre plus a
//! chain of rigid offsets, each attached to a frame whose angle is a sum of
//! coordinates, which gives the Jacobians and the velocity-product terms in
//! closed form.

use nalgebra::{SMatrix, SVector, Vector2};

use crate::model::RobotParams;
use crate::task::Payload;

pub const DOF: usize = 7;
pub type GenVec = SVector<f64, DOF>;
pub type GenMat = SMatrix<f64, DOF, DOF>;
type PointJacobian = SMatrix<f64, 2, DOF>;

/// Coordinate index of the thigh joint of a leg (`0` front, `1` rear).
pub fn thigh_index(leg: usize) -> usize {
    3 + 2 * leg
}

/// Offset `(a, b)` in a frame of angle `φ = Σ s[i]`: `a e(φ) + b e⊥(φ)`.
#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    angle: &'static [usize],
}

const TRUNK: &[usize] = &[2];
const FRONT_THIGH: &[usize] = &[2, 3];
const FRONT_CALF: &[usize] = &[2, 3, 4];
const REAR_THIGH: &[usize] = &[2, 5];
const REAR_CALF: &[usize] = &[2, 5, 6];

fn leg_frames(leg: usize) -> (&'static [usize], &'static [usize]) {
    if leg == 0 {
        (FRONT_THIGH, FRONT_CALF)
    } else {
        (REAR_THIGH, REAR_CALF)
    }
}

#[derive(Debug, Clone)]
struct Body {
    mass: f64,
    inertia: f64,
    chain: Vec<Segment>,
    angle: &'static [usize],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub s: GenVec,
    pub sdot: GenVec,
}

impl PlantState {
    pub fn is_finite(&self) -> bool {
        self.s.iter().chain(self.sdot.iter()).all(|v| v.is_finite())
    }

    pub fn joint_angles(&self, leg: usize) -> [f64; 2] {
        let i = thigh_index(leg);
        [self.s[i], self.s[i + 1]]
    }

    pub fn joint_rates(&self, leg: usize) -> [f64; 2] {
        let i = thigh_index(leg);
        [self.sdot[i], self.sdot[i + 1]]
    }
}

/// Point kinematics: position, Jacobian and `J̇ ṡ`.
#[derive(Debug, Clone, Copy)]
pub struct PointKinematics {
    pub pos: Vector2<f64>,
    pub jac: PointJacobian,
    pub bias: Vector2<f64>,
}

impl PointKinematics {
    pub fn velocity(&self, sdot: &GenVec) -> Vector2<f64> {
        self.jac * sdot
    }
}

fn angle_of(idx: &[usize], v: &GenVec) -> f64 {
    idx.iter().map(|&i| v[i]).sum()
}

fn point(chain: &[Segment], st: &PlantState) -> PointKinematics {
    let mut pos = Vector2::new(st.s[0], st.s[1]);
    let mut jac = PointJacobian::zeros();
    jac[(0, 0)] = 1.0;
    jac[(1, 1)] = 1.0;
    let mut bias = Vector2::zeros();
    for seg in chain {
        let (sn, cs) = angle_of(seg.angle, &st.s).sin_cos();
        let rate = angle_of(seg.angle, &st.sdot);
        let e = Vector2::new(cs, sn);
        let e_perp = Vector2::new(-sn, cs);
        let offset = seg.a * e + seg.b * e_perp;
        pos += offset;
        // ∂offset/∂φ = a e⊥ − b e
        let d = seg.a * e_perp - seg.b * e;
        for &i in seg.angle {
            jac[(0, i)] += d.x;
            jac[(1, i)] += d.y;
        }
        bias -= offset * rate * rate;
    }
    PointKinematics { pos, jac, bias }
}

/// Mass model of the articulated plant, including an optional payload.
#[derive(Debug, Clone)]
pub struct ArticulatedRobot {
    pub params: RobotParams,
    pub payload: Payload,
    bodies: Vec<Body>,
    total_mass: f64,
}

impl ArticulatedRobot {
    pub fn new(params: RobotParams, payload: Payload) -> Self {
        let (l1, l2) = (params.thigh_length, params.calf_length);
        let rod = |m: f64, l: f64| m * l * l / 12.0;
        let mut bodies = vec![Body {
            mass: params.trunk_mass,
            inertia: params.trunk_inertia,
            chain: vec![],
            angle: TRUNK,
        }];
        for leg in 0..2 {
            let hip = Self::hip_segment(&params, leg);
            let (thigh, calf) = leg_frames(leg);
            bodies.push(Body {
                mass: params.thigh_mass,
                inertia: rod(params.thigh_mass, l1),
                chain: vec![
                    hip,
                    Segment {
                        a: 0.5 * l1,
                        b: 0.0,
                        angle: thigh,
                    },
                ],
                angle: thigh,
            });
            bodies.push(Body {
                mass: params.calf_mass,
                inertia: rod(params.calf_mass, l2),
                chain: vec![
                    hip,
                    Segment {
                        a: l1,
                        b: 0.0,
                        angle: thigh,
                    },
                    Segment {
                        a: 0.5 * l2,
                        b: 0.0,
                        angle: calf,
                    },
                ],
                angle: calf,
            });
        }
        if payload.mass > 0.0 {
            bodies.push(Body {
                mass: payload.mass,
                inertia: 0.0,
                chain: vec![Segment {
                    a: payload.offset[0],
                    b: payload.offset[1],
                    angle: TRUNK,
                }],
                angle: TRUNK,
            });
        }
        let total_mass = bodies.iter().map(|b| b.mass).sum();
        Self {
            params,
            payload,
            bodies,
            total_mass,
        }
    }

    fn hip_segment(params: &RobotParams, leg: usize) -> Segment {
        let hip = if leg == 0 { params.front_hip() } else { params.rear_hip() };
        Segment {
            a: hip.x,
            b: hip.y,
            angle: TRUNK,
        }
    }

    fn leg_chain(&self, leg: usize, calf_fraction: Option<f64>) -> Vec<Segment> {
        let (thigh, calf) = leg_frames(leg);
        let mut chain = vec![
            Self::hip_segment(&self.params, leg),
            Segment {
                a: self.params.thigh_length,
                b: 0.0,
                angle: thigh,
            },
        ];
        if let Some(f) = calf_fraction {
            chain.push(Segment {
                a: f * self.params.calf_length,
                b: 0.0,
                angle: calf,
            });
        }
        chain
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn foot(&self, leg: usize, st: &PlantState) -> PointKinematics {
        point(&self.leg_chain(leg, Some(1.0)), st)
    }

    pub fn knee(&self, leg: usize, st: &PlantState) -> Vector2<f64> {
        point(&self.leg_chain(leg, None), st).pos
    }

    pub fn hip(&self, leg: usize, st: &PlantState) -> Vector2<f64> {
        point(&[Self::hip_segment(&self.params, leg)], st).pos
    }

    /// World positions of the four trunk corners.
    pub fn trunk_corners(&self, st: &PlantState) -> [Vector2<f64>; 4] {
        let (hl, hh) = (0.5 * self.params.body_length, 0.5 * self.params.trunk_height);
        [(hl, hh), (hl, -hh), (-hl, -hh), (-hl, hh)].map(|(a, b)| {
            point(
                &[Segment {
                    a,
                    b,
                    angle: TRUNK,
                }],
                st,
            )
            .pos
        })
    }

    /// Whole-robot centre of mass and its velocity.
    pub fn com(&self, st: &PlantState) -> (Vector2<f64>, Vector2<f64>) {
        let mut p = Vector2::zeros();
        let mut v = Vector2::zeros();
        for b in &self.bodies {
            let k = point(&b.chain, st);
            p += b.mass * k.pos;
            v += b.mass * k.velocity(&st.sdot);
        }
        (p / self.total_mass, v / self.total_mass)
    }

    /// Pitch inertia of the whole robot about its CoM with the joints locked.
    pub fn composite_inertia(&self, st: &PlantState) -> f64 {
        let (c, _) = self.com(st);
        self.bodies
            .iter()
            .map(|b| b.inertia + b.mass * (point(&b.chain, st).pos - c).norm_squared())
            .sum()
    }

    /// Kinetic plus gravitational potential energy.
    pub fn energy(&self, st: &PlantState) -> f64 {
        let mut e = 0.0;
        for b in &self.bodies {
            let k = point(&b.chain, st);
            let v = k.velocity(&st.sdot);
            let w = angle_of(b.angle, &st.sdot);
            e += 0.5 * b.mass * v.norm_squared() + 0.5 * b.inertia * w * w + b.mass * self.params.gravity * k.pos.y;
        }
        e
    }

    /// Generalised accelerations for lumped joint torques
    /// `[τ_F1, τ_F2, τ_R1, τ_R2]` and world foot forces `[front, rear]`.
    pub fn acceleration(&self, st: &PlantState, joint_torque: &[f64; 4], foot_forces: &[Vector2<f64>; 2]) -> Option<GenVec> {
        let mut mass = GenMat::zeros();
        let mut force = GenVec::zeros();
        for (i, tau) in joint_torque.iter().enumerate() {
            force[3 + i] = *tau;
        }
        for b in &self.bodies {
            let k = point(&b.chain, st);
            mass += b.mass * k.jac.transpose() * k.jac;
            if b.inertia > 0.0 {
                for &i in b.angle {
                    for &j in b.angle {
                        mass[(i, j)] += b.inertia;
                    }
                }
            }
            let weight = Vector2::new(0.0, -b.mass * self.params.gravity);
            force += k.jac.transpose() * (weight - b.mass * k.bias);
        }
        for (leg, f) in foot_forces.iter().enumerate() {
            if f.x != 0.0 || f.y != 0.0 {
                force += self.foot(leg, st).jac.transpose() * f;
            }
        }
        mass.cholesky().map(|c| c.solve(&force))
    }

    /// Standing state whose centre of mass is at `com`, trunk pitch `theta`,
    /// with joint angles `q`, at rest.
    pub fn state_with_com(&self, com: Vector2<f64>, theta: f64, q: [[f64; 2]; 2]) -> PlantState {
        let mut st = PlantState::default();
        st.s[2] = theta;
        st.s[3] = q[0][0];
        st.s[4] = q[0][1];
        st.s[5] = q[1][0];
        st.s[6] = q[1][1];
        let (c0, _) = self.com(&st);
        st.s[0] = com.x - c0.x;
        st.s[1] = com.y - c0.y;
        st
    }
}
