//! Trial-to-trial learning.
//!
//! The staged learner models how an input offset `Δu` between two trials
//! changes the tracking error, `e_{k+1} = e_k − G_k Δu`, and picks `Δu` from
//! a constrained QP whose error weighting moves from the contact phase
//! (stage 1) over the rear-leg and flight phases (stage 2) to the final
//! sample only (stage 3, goal priority). Two baselines share the plant: a
//! full-horizon variant of the same QP and a model-free PD-type learner on
//! joint torques.

pub mod constraints;
pub mod learning;
pub mod lifted;
pub mod pd;
pub mod update;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use constraints::{assemble_constraints, ConstraintSet};
pub use learning::{run_learning, transfer_learning, LearningHistory, StopReason, TrialSummary};
pub use lifted::{build_lifted, FlightErrorModel, LiftedModel};
pub use pd::{pd_type_ilc_step, run_pd_learning};
pub use update::{ilc_mpc_step, ilc_step, IlcUpdate, Window};

use crate::model::{ModelError, PhaseSchedule};
use crate::qp::QpError;

#[derive(Debug, Error)]
pub enum IlcError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("error window {first}..={last} is not inside 1..={n_total}")]
    Window { first: usize, last: usize, n_total: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Reference(#[from] crate::reference::ReferenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    /// Staged constrained ILC.
    #[default]
    Proposed,
    /// Model-free PD-type ILC on joint torques.
    PdIlc,
    /// Full-horizon ILC (every sample weighted from the first trial).
    IlcMpc,
}

impl LearnerKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::PdIlc => "pd-ilc",
            Self::IlcMpc => "ilc-mpc",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "pd-ilc" => Ok(Self::PdIlc),
            "ilc-mpc" => Ok(Self::IlcMpc),
            other => Err(format!("unknown learner `{other}` (expected proposed|pd-ilc|ilc-mpc)")),
        }
    }
}

/// Number of trials spent in stages 1 and 2; stage 3 runs until
/// convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct StageSchedule {
    pub stage1_trials: usize,
    pub stage2_trials: usize,
}

impl Default for StageSchedule {
    fn default() -> Self {
        Self {
            stage1_trials: 5,
            stage2_trials: 5,
        }
    }
}

impl StageSchedule {
    /// Stage (1, 2 or 3) of the update computed after trial `k` (0-based).
    pub fn stage(&self, k: usize) -> u8 {
        if k < self.stage1_trials {
            1
        } else if k < self.stage1_trials + self.stage2_trials {
            2
        } else {
            3
        }
    }

    /// Error window of `stage`: `[1, N_c]`, `[N_dc, N]` or `{N}`.
    pub fn window(stage: u8, schedule: &PhaseSchedule) -> Window {
        let n = schedule.n_total();
        match stage {
            1 => Window {
                first: 1,
                last: schedule.n_contact(),
            },
            2 => Window {
                first: schedule.n_dc,
                last: n,
            },
            _ => Window { first: n, last: n },
        }
    }
}

/// Diagonal per-sample error weight and input-offset weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct IlcWeights {
    pub q_e: [f64; 6],
    pub q_u: [f64; 4],
}

impl Default for IlcWeights {
    fn default() -> Self {
        Self {
            q_e: [1.0, 3.0, 3.0, 0.01, 0.01, 0.01],
            q_u: [1e-5; 4],
        }
    }
}

/// Terminal tolerances of the stop rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub x: f64,
    pub z: f64,
    pub theta_deg: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            x: 0.02,
            z: 0.03,
            theta_deg: 2.0,
        }
    }
}

impl Tolerances {
    pub fn satisfied(&self, e: &nalgebra::Vector6<f64>) -> bool {
        e[0].abs() <= self.x && e[1].abs() <= self.z && e[2].abs().to_degrees() <= self.theta_deg
    }
}

/// Learning gains of the PD-type baseline, per motor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct PdIlcGains {
    pub l_p: f64,
    pub l_d: f64,
}

impl Default for PdIlcGains {
    fn default() -> Self {
        Self { l_p: 50.0, l_d: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub stages: StageSchedule,
    pub weights: IlcWeights,
    pub tolerances: Tolerances,
    /// Number of learning updates; trial 0 always runs.
    pub max_trials: usize,
    pub flight_error_model: FlightErrorModel,
    pub pd_gains: PdIlcGains,
    /// Optional bound on each input change per update, N.
    pub step_limit: Option<f64>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            kind: LearnerKind::Proposed,
            stages: StageSchedule::default(),
            weights: IlcWeights::default(),
            tolerances: Tolerances::default(),
            max_trials: 25,
            flight_error_model: FlightErrorModel::Propagated,
            pd_gains: PdIlcGains::default(),
            step_limit: None,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.weights.q_e.iter().chain(self.weights.q_u.iter()).any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err("weights must be finite and ≥ 0".into());
        }
        if self.weights.q_u.iter().any(|w| *w <= 0.0) {
            return Err("q_u must be strictly positive".into());
        }
        let t = &self.tolerances;
        if !(t.x > 0.0 && t.z > 0.0 && t.theta_deg > 0.0) {
            return Err("tolerances must be > 0".into());
        }
        if self.pd_gains.l_p < 0.0 || self.pd_gains.l_d < 0.0 {
            return Err("PD learning gains must be ≥ 0".into());
        }
        if self.step_limit.is_some_and(|d| d.is_nan() || d <= 0.0) {
            return Err("step_limit must be > 0".into());
        }
        Ok(())
    }
}
