//! The "real robot": a planar articulated quadruped on compliant ground,
//! driven by a 1 kHz joint PD loop with force or torque feedforward and
//! voltage-limited motors.

pub mod actuator;
pub mod articulated;
pub mod controller;
pub mod ground;
pub mod trial;

pub use actuator::actuator_clamp;
pub use articulated::{ArticulatedRobot, PlantState};
pub use controller::{low_level_step, MotorCommand, TickFeedforward};
pub use ground::ground_reaction;
pub use trial::{attach_payload, run_trial, Feedforward, TrialFailure, TrialMeta, TrialRecord};
