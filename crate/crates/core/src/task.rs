//! Jump task description shared by the plant, the reference generator and
//! the learners.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ilc::LearnerConfig;
use crate::model::{ActuatorParams, ModelError, PhaseSchedule, RobotParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("invalid task field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(field: &str, reason: impl Into<String>) -> TaskError {
    TaskError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Spring-damper ground with a stiction spring for the tangential force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundModel {
    /// Normal stiffness, N/m.
    pub k_p: f64,
    /// Normal damping, N·s/m.
    pub k_d: f64,
    pub mu: f64,
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
}

impl GroundModel {
    pub const DEFAULT_MU: f64 = 0.6;

    pub fn soft() -> Self {
        Self::with_normal(2e3, 5e2)
    }

    pub fn hard() -> Self {
        Self::with_normal(2e4, 3e3)
    }

    /// Tangential spring and damper default to the normal ones.
    pub fn with_normal(k_p: f64, k_d: f64) -> Self {
        Self {
            k_p,
            k_d,
            mu: Self::DEFAULT_MU,
            tangential_stiffness: k_p,
            tangential_damping: k_d,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "soft" => Some(Self::soft()),
            "hard" => Some(Self::hard()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        for (name, v) in [
            ("ground.k_p", self.k_p),
            ("ground.k_d", self.k_d),
            ("ground.mu", self.mu),
            ("ground.tangential_stiffness", self.tangential_stiffness),
            ("ground.tangential_damping", self.tangential_damping),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for GroundModel {
    fn default() -> Self {
        Self::hard()
    }
}

/// Point mass rigidly attached to the trunk, unknown to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct Payload {
    pub mass: f64,
    /// Body-frame offset from the trunk centre, m.
    pub offset: [f64; 2],
}

impl Payload {
    pub fn offset(&self) -> Vector2<f64> {
        Vector2::new(self.offset[0], self.offset[1])
    }
}

/// Per-motor joint PD gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct LowLevelGains {
    pub kp_joint: f64,
    pub kd_joint: f64,
}

impl Default for LowLevelGains {
    fn default() -> Self {
        Self {
            kp_joint: 100.0,
            kd_joint: 2.0,
        }
    }
}

/// Box obstacle: flat top at `height` for every `x ≥ face_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxObstacle {
    pub height: f64,
    pub face_x: f64,
}

/// Terminal CoM displacement from the standing pose, and terminal pitch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub x: f64,
    pub z: f64,
    pub theta: f64,
}

/// Standing pose and the hand-designed parts of the nominal jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct StandConfig {
    /// CoM height above the ground while standing, m.
    pub height: f64,
    /// Foothold x of the front and rear feet relative to the standing CoM.
    pub front_foot_x: f64,
    pub rear_foot_x: f64,
    /// CoM displacement from the standing pose at lift-off.
    pub takeoff_dx: f64,
    pub takeoff_dz: f64,
    /// Flight tuck: fraction of the full leg reach, foot under the hip.
    pub tuck_fraction: f64,
    /// Share of each motor's torque window the nominal forces may use.
    pub torque_fraction: f64,
}

impl Default for StandConfig {
    fn default() -> Self {
        Self {
            height: 0.27,
            front_foot_x: 0.13,
            rear_foot_x: -0.12,
            takeoff_dx: 0.06,
            takeoff_dz: 0.07,
            tuck_fraction: 0.6,
            torque_fraction: 0.8,
        }
    }
}

/// Contact-force limits per lumped foot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct ForceLimits {
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for ForceLimits {
    fn default() -> Self {
        Self {
            f_min: 5.0,
            f_max: 250.0,
        }
    }
}

/// Everything needed to run and learn one jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct JumpTask {
    pub id: String,
    pub target: Target,
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub obstacle: Option<BoxObstacle>,
    pub ground: GroundModel,
    pub payload: Payload,
    pub robot: RobotParams,
    pub actuator: ActuatorParams,
    pub gains: LowLevelGains,
    pub schedule: PhaseSchedule,
    pub stand: StandConfig,
    pub limits: ForceLimits,
    pub learner: LearnerConfig,
}

impl Default for JumpTask {
    fn default() -> Self {
        Self {
            id: "jump".into(),
            target: Target {
                x: 0.6,
                z: 0.0,
                theta: 0.0,
            },
            obstacle: None,
            ground: GroundModel::default(),
            payload: Payload::default(),
            robot: RobotParams::default(),
            actuator: ActuatorParams::default(),
            gains: LowLevelGains::default(),
            schedule: PhaseSchedule::default(),
            stand: StandConfig::default(),
            limits: ForceLimits::default(),
            learner: LearnerConfig::default(),
        }
    }
}

impl JumpTask {
    /// Forward jump of `dx` metres on the given ground.
    pub fn forward(id: &str, dx: f64, ground: GroundModel) -> Self {
        Self {
            id: id.to_string(),
            target: Target {
                x: dx,
                z: 0.0,
                theta: 0.0,
            },
            ground,
            ..Self::default()
        }
    }

    /// Jump onto a box `height` high whose face is at `face_x`, landing
    /// `dx` metres ahead.
    pub fn onto_box(id: &str, dx: f64, height: f64, face_x: f64, ground: GroundModel) -> Self {
        Self {
            id: id.to_string(),
            target: Target {
                x: dx,
                z: height,
                theta: 0.0,
            },
            obstacle: Some(BoxObstacle { height, face_x }),
            ground,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        self.robot.validate()?;
        self.actuator.validate()?;
        self.schedule.validate()?;
        self.ground.validate()?;
        if !(self.payload.mass.is_finite() && self.payload.mass >= 0.0) {
            return Err(invalid("payload.mass", "must be finite and ≥ 0"));
        }
        if self.gains.kp_joint < 0.0 || self.gains.kd_joint < 0.0 {
            return Err(invalid("gains", "joint gains must be ≥ 0"));
        }
        if !(self.limits.f_min > 0.0 && self.limits.f_max > self.limits.f_min) {
            return Err(invalid("limits", "need 0 < f_min < f_max"));
        }
        for (name, v) in [
            ("target.x", self.target.x),
            ("target.z", self.target.z),
            ("target.theta", self.target.theta),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if let Some(b) = &self.obstacle {
            if !(b.height.is_finite() && b.height >= 0.0 && b.face_x.is_finite()) {
                return Err(invalid("box", "height must be ≥ 0 and face_x finite"));
            }
        }
        let reach = self.robot.thigh_length + self.robot.calf_length;
        if !(self.stand.height > 0.0 && self.stand.height < reach) {
            return Err(invalid("stand.height", format!("must lie in (0, {reach})")));
        }
        if !(self.stand.tuck_fraction > 0.0 && self.stand.tuck_fraction <= 1.0) {
            return Err(invalid("stand.tuck_fraction", "must lie in (0, 1]"));
        }
        if !(self.stand.torque_fraction > 0.0 && self.stand.torque_fraction <= 1.0) {
            return Err(invalid("stand.torque_fraction", "must lie in (0, 1]"));
        }
        self.learner.validate().map_err(|reason| invalid("learner", reason))?;
        Ok(())
    }
}
