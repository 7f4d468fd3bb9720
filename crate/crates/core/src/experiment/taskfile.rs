use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::ilc::{FlightErrorModel, IlcWeights, LearnerConfig, LearnerKind, PdIlcGains, StageSchedule, Tolerances};
use crate::model::{ActuatorParams, PhaseSchedule, RobotParams};
use crate::task::{BoxObstacle, ForceLimits, GroundModel, JumpTask, LowLevelGains, Payload, StandConfig, Target};

use super::ExperimentError;

/// Ground given as a table; missing keys fall back to the hard preset, or
/// to `preset` when one is named.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTable {
    preset: Option<String>,
    k_p: Option<f64>,
    k_d: Option<f64>,
    mu: Option<f64>,
    tangential_stiffness: Option<f64>,
    tangential_damping: Option<f64>,
}

/// On-disk task description (TOML).
///
/// ```toml
/// id = "forward-60-hard"
/// ground = "hard"              # or [ground] k_p = 2e4, k_d = 3e3, mu = 0.6
/// learner = "proposed"
/// max_trials = 25
///
/// [target]
/// x = 0.6
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub id: String,
    pub target: Target,
    #[serde(rename = "box")]
    pub obstacle: Option<BoxObstacle>,
    ground: Option<toml::Value>,
    #[serde(default)]
    pub payload: Payload,
    #[serde(default)]
    pub learner: LearnerKind,
    #[serde(default)]
    pub stages: StageSchedule,
    #[serde(default)]
    pub weights: IlcWeights,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub max_trials: Option<usize>,
    pub flight_error_model: Option<FlightErrorModel>,
    pub step_limit: Option<f64>,
    #[serde(default)]
    pub pd_gains: PdIlcGains,
    /// Run directory of a converged campaign to transfer from, relative
    /// to the task file.
    pub transfer_source: Option<PathBuf>,

    pub schedule: Option<PhaseSchedule>,
    pub stand: Option<StandConfig>,
    pub gains: Option<LowLevelGains>,
    pub limits: Option<ForceLimits>,
    pub robot: Option<RobotParams>,
    pub actuator: Option<ActuatorParams>,
}

fn invalid(field: &str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::Field {
        field: field.into(),
        reason: reason.into(),
    }
}

fn resolve_ground(value: Option<&toml::Value>) -> Result<GroundModel, ExperimentError> {
    let preset = |name: &str| {
        GroundModel::preset(name).ok_or_else(|| invalid("ground", format!("unknown preset `{name}` (expected soft or hard)")))
    };
    match value {
        None => Ok(GroundModel::default()),
        Some(toml::Value::String(name)) => preset(name),
        Some(v @ toml::Value::Table(_)) => {
            let t: GroundTable = v.clone().try_into().map_err(|e: toml::de::Error| invalid("ground", e.message()))?;
            let mut g = match &t.preset {
                Some(name) => preset(name)?,
                None => GroundModel::hard(),
            };
            if let Some(k) = t.k_p {
                g.k_p = k;
                g.tangential_stiffness = k;
            }
            if let Some(k) = t.k_d {
                g.k_d = k;
                g.tangential_damping = k;
            }
            g.mu = t.mu.unwrap_or(g.mu);
            g.tangential_stiffness = t.tangential_stiffness.unwrap_or(g.tangential_stiffness);
            g.tangential_damping = t.tangential_damping.unwrap_or(g.tangential_damping);
            Ok(g)
        }
        Some(other) => Err(invalid("ground", format!("expected a preset name or a table, got {}", other.type_str()))),
    }
}

impl TaskFile {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Parse {
            path: None,
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Parse {
            path: Some(path.to_path_buf()),
            message: format!("cannot read task file: {e}"),
        })?;
        Self::parse(&text).map_err(|e| match e {
            ExperimentError::Parse { message, .. } => ExperimentError::Parse {
                path: Some(path.to_path_buf()),
                message,
            },
            other => other,
        })
    }

    /// Expand presets and defaults into a validated task.
    pub fn to_task(&self) -> Result<JumpTask, ExperimentError> {
        let defaults = JumpTask::default();
        let learner = LearnerConfig {
            kind: self.learner,
            stages: self.stages,
            weights: self.weights,
            tolerances: self.tolerances,
            max_trials: self.max_trials.unwrap_or(defaults.learner.max_trials),
            flight_error_model: self.flight_error_model.unwrap_or(defaults.learner.flight_error_model),
            pd_gains: self.pd_gains,
            step_limit: self.step_limit,
        };
        let task = JumpTask {
            id: self.id.clone(),
            target: self.target,
            obstacle: self.obstacle,
            ground: resolve_ground(self.ground.as_ref())?,
            payload: self.payload,
            robot: self.robot.unwrap_or(defaults.robot),
            actuator: self.actuator.unwrap_or(defaults.actuator),
            gains: self.gains.unwrap_or(defaults.gains),
            schedule: self.schedule.unwrap_or(defaults.schedule),
            stand: self.stand.unwrap_or(defaults.stand),
            limits: self.limits.unwrap_or(defaults.limits),
            learner,
        };
        if task.id.trim().is_empty() {
            return Err(invalid("id", "must not be empty"));
        }
        task.validate()?;
        Ok(task)
    }
}

/// Parse and resolve a task file. The transfer source, if any, is
/// returned relative to the current directory.
pub fn load_task(path: &Path) -> Result<(JumpTask, Option<PathBuf>), ExperimentError> {
    let file = TaskFile::load(path)?;
    let task = file.to_task()?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok((task, file.transfer_source.map(|p| base.join(p))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_defaults() {
        let f = TaskFile::parse("id = \"a\"\n[target]\nx = 0.4\n").unwrap();
        let t = f.to_task().unwrap();
        assert_eq!(t.target.x, 0.4);
        assert_eq!(t.ground, GroundModel::hard());
        assert_eq!(t.learner.kind, LearnerKind::Proposed);
        assert_eq!(t.learner.max_trials, 25);
    }

    #[test]
    fn ground_preset_and_overrides() {
        let f = TaskFile::parse("id = \"a\"\nground = \"soft\"\n[target]\nx = 0.6\n").unwrap();
        assert_eq!(f.to_task().unwrap().ground, GroundModel::soft());
        let f = TaskFile::parse("id = \"a\"\n[target]\nx = 0.6\n[ground]\npreset = \"soft\"\nmu = 0.4\n").unwrap();
        let g = f.to_task().unwrap().ground;
        assert_eq!((g.k_p, g.mu), (2e3, 0.4));
        let f = TaskFile::parse("id = \"a\"\n[target]\nx = 0.6\n[ground]\nk_p = 5e3\nk_d = 1e3\n").unwrap();
        let g = f.to_task().unwrap().ground;
        assert_eq!((g.k_p, g.k_d, g.tangential_stiffness), (5e3, 1e3, 5e3));
    }

    #[test]
    fn errors_name_the_field() {
        let e = TaskFile::parse("id = \"a\"\n[target]\nx = 0.6\nwhat = 1\n").unwrap_err().to_string();
        assert!(e.contains("what") && e.contains("line 4"), "{e}");
        let e = TaskFile::parse("id = \"a\"\nlearner = \"nope\"\n[target]\n").unwrap_err().to_string();
        assert!(e.contains("learner") || e.contains("nope"), "{e}");
        let f = TaskFile::parse("id = \"a\"\nground = \"ice\"\n[target]\n").unwrap();
        assert!(f.to_task().unwrap_err().to_string().contains("ground"));
        let f = TaskFile::parse("id = \"a\"\n[target]\n[payload]\nmass = -1.0\n").unwrap();
        assert!(f.to_task().unwrap_err().to_string().contains("payload.mass"));
    }
}
