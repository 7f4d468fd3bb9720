use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ilc::{run_learning, transfer_learning, FlightErrorModel, LearnerKind, LearningHistory};
use crate::reference::generate;
use crate::task::JumpTask;

use super::output::{read_run, write_index, write_run, RunSummary};
use super::ExperimentError;

/// Command-line overrides applied on top of a task file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub max_trials: Option<usize>,
    pub flight_error_model: Option<FlightErrorModel>,
}

impl Overrides {
    pub fn apply(&self, mut task: JumpTask) -> JumpTask {
        if let Some(n) = self.max_trials {
            task.learner.max_trials = n;
        }
        if let Some(m) = self.flight_error_model {
            task.learner.flight_error_model = m;
        }
        task
    }
}

/// Learn `task` from its nominal jump and write the run into `out`.
pub fn learn(task: &JumpTask, out: &Path) -> Result<(RunSummary, LearningHistory), ExperimentError> {
    let refs = generate(task)?;
    let history = run_learning(task, &refs, &task.learner)?;
    let summary = write_run(out, task, &history)?;
    Ok((summary, history))
}

/// Goal-priority transfer from the converged run in `from`.
pub fn transfer(task: &JumpTask, from: &Path, out: &Path) -> Result<(RunSummary, LearningHistory), ExperimentError> {
    let source = read_run(from)?;
    if !source.summary.converged {
        return Err(ExperimentError::SourceNotConverged(from.to_path_buf()));
    }
    if source.final_u.is_empty() {
        return Err(ExperimentError::Usage(format!(
            "{} holds no learned contact forces (learner {})",
            from.display(),
            source.summary.learner.label()
        )));
    }
    if source.task.schedule != task.schedule {
        return Err(ExperimentError::Field {
            field: "schedule".into(),
            reason: "must match the transfer source's contact schedule".into(),
        });
    }
    let history = transfer_learning(task, &source.reference, &source.final_u, &task.learner)?;
    let summary = write_run(out, task, &history)?;
    Ok((summary, history))
}

/// Trials shown in the comparison table.
pub const COMPARE_TRIALS: [usize; 5] = [1, 5, 10, 15, 20];

/// One learner's line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub learner: LearnerKind,
    pub converged: bool,
    pub n_trials: usize,
    /// Trials landing with |θ_N| > 70°.
    pub bad_landings: usize,
    /// `(trial, [e_x m, e_z m, e_θ deg])`; campaigns that stopped early
    /// repeat their last trial.
    pub errors: Vec<(usize, [f64; 3])>,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub task_id: String,
    pub rows: Vec<CompareRow>,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "task {}", self.task_id)?;
        write!(f, "{:<10}", "learner")?;
        for k in COMPARE_TRIALS {
            write!(f, " {:>24}", format!("trial {k} (cm, cm, deg)"))?;
        }
        writeln!(f, " {:>5} {:>9}", "bad", "converged")?;
        for row in &self.rows {
            write!(f, "{:<10}", row.learner.label())?;
            for (_, e) in &row.errors {
                write!(f, " {:>24}", format!("{:.1}, {:.1}, {:.1}", 100.0 * e[0], 100.0 * e[1], e[2]))?;
            }
            let conv = if row.converged {
                format!("yes ({})", row.n_trials)
            } else {
                "no".into()
            };
            writeln!(f, " {:>5} {:>9}", row.bad_landings, conv)?;
        }
        Ok(())
    }
}

/// Run every learner on the same task, one run directory each.
pub fn compare(task: &JumpTask, learners: &[LearnerKind], out: &Path) -> Result<Comparison, ExperimentError> {
    if learners.is_empty() {
        return Err(ExperimentError::Usage("--learners needs at least one learner".into()));
    }
    let refs = generate(task)?;
    let rows = learners
        .par_iter()
        .map(|&kind| {
            let mut task = task.clone();
            task.learner.kind = kind;
            let history = run_learning(&task, &refs, &task.learner)?;
            let dir = out.join(kind.label());
            let summary = write_run(&dir, &task, &history)?;
            let last = summary.trials.len() - 1;
            Ok(CompareRow {
                learner: kind,
                converged: summary.converged,
                n_trials: summary.n_trials,
                bad_landings: summary.bad_landings,
                errors: COMPARE_TRIALS
                    .iter()
                    .map(|&k| {
                        let t = &summary.trials[k.min(last)];
                        (k, [t.e_x, t.e_z, t.e_theta_deg])
                    })
                    .collect(),
                dir,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let cmp = Comparison {
        task_id: task.id.clone(),
        rows,
    };
    write_index(&out.join("compare.json"), &cmp)?;
    let mut w = csv::Writer::from_path(out.join("compare.csv"))?;
    w.write_record(["learner", "trial", "e_x", "e_z", "e_theta_deg", "bad_landings", "converged"])?;
    for row in &cmp.rows {
        for (k, e) in &row.errors {
            w.write_record([
                row.learner.label().to_string(),
                k.to_string(),
                e[0].to_string(),
                e[1].to_string(),
                e[2].to_string(),
                row.bad_landings.to_string(),
                row.converged.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| ExperimentError::io(out, e))?;
    Ok(cmp)
}

/// Copy of `task` with the numeric field at dotted `path` set to `value`.
/// Paths address the resolved task, e.g. `ground.k_p`, `payload.mass`,
/// `learner.max_trials`, `learner.weights.q_e.2`.
pub fn set_numeric(task: &JumpTask, path: &str, value: f64) -> Result<JumpTask, ExperimentError> {
    let unknown = || ExperimentError::Usage(format!("unknown numeric task field `{path}`"));
    let mut json = serde_json::to_value(task)?;
    let mut node = &mut json;
    for key in path.split('.') {
        node = match node {
            serde_json::Value::Object(map) => map.get_mut(key).ok_or_else(unknown)?,
            serde_json::Value::Array(items) => {
                let i: usize = key.parse().map_err(|_| unknown())?;
                items.get_mut(i).ok_or_else(unknown)?
            }
            _ => return Err(unknown()),
        };
    }
    let serde_json::Value::Number(old) = node else {
        return Err(unknown());
    };
    *node = if old.is_f64() {
        serde_json::Number::from_f64(value)
            .ok_or_else(|| ExperimentError::Usage(format!("`{value}` is not a finite number")))?
            .into()
    } else if value.fract() == 0.0 && value >= 0.0 && value <= u64::MAX as f64 {
        (value as u64).into()
    } else {
        return Err(ExperimentError::Usage(format!("`{path}` takes a non-negative integer, got {value}")));
    };
    let task: JumpTask = serde_json::from_value(json)?;
    task.validate()?;
    Ok(task)
}

/// One finished sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: String,
    pub dir: PathBuf,
    pub converged: bool,
    pub n_trials: usize,
}

/// Learn `task` once per value of `param`, in parallel; writes `index.json`
/// mapping each value to its run directory.
pub fn sweep(task: &JumpTask, param: &str, values: &[String], out: &Path) -> Result<Vec<SweepEntry>, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::Usage("--values needs at least one value".into()));
    }
    // Resolve every point before running any of them.
    let points = values
        .iter()
        .map(|token| {
            let v: f64 = token
                .trim()
                .parse()
                .map_err(|_| ExperimentError::Usage(format!("`{token}` is not a number")))?;
            let mut t = set_numeric(task, param, v)?;
            t.id = format!("{}[{param}={}]", task.id, token.trim());
            Ok((token.trim().to_string(), t))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let entries = points
        .par_iter()
        .map(|(token, t)| {
            let dir = out.join(format!("{param}={token}"));
            let (summary, _) = learn(t, &dir)?;
            Ok(SweepEntry {
                value: token.clone(),
                dir,
                converged: summary.converged,
                n_trials: summary.n_trials,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let index: BTreeMap<&str, &Path> = entries.iter().map(|e| (e.value.as_str(), e.dir.as_path())).collect();
    write_index(&out.join("index.json"), &index)?;
    Ok(entries)
}
