//! Staged iterative learning control for planar quadruped target jumping.
//!
//! The crate is organised the way the learning loop runs:
//!
//! - [`model`]: the single-rigid-body model the learner reasons with, plus
//!   leg kinematics and the force-to-torque map.
//! - [`plant`]: the articulated planar robot that actually jumps, with
//!   compliant ground, motor voltage limits and the joint PD controller.
//! - [`reference`]: nominal body/joint references and first-trial forces.
//! - [`qp`]: a dense convex QP solver.
//! - [`ilc`]: the trial-to-trial error model, the staged QP update, the
//!   goal-priority transfer and the two baseline learners.
//! - [`experiment`]: task files, learning campaigns and their on-disk logs.
//!
//! Runnable walkthroughs live in `examples/`; the `jumpilc` binary exposes
//! the experiment harness on the command line.

pub mod experiment;
pub mod ilc;
pub mod model;
pub mod plant;
pub mod qp;
pub mod reference;
pub mod task;

pub use model::{BodyState, Input, PhaseSchedule, RobotParams};
pub use task::JumpTask;

