use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jumpilc::experiment::{self, ExperimentError, Overrides, RunSummary};
use jumpilc::ilc::{FlightErrorModel, LearnerKind};

/// Exit status when the campaign ran but did not converge, or a trial blew up.
const NOT_CONVERGED: u8 = 3;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "jumpilc", version, about = "Learn planar quadruped target jumps trial by trial")]
struct Cli {
    /// Output directory (default: runs/<task id>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the task's update budget.
    #[arg(long, global = true)]
    max_trials: Option<usize>,
    /// Refuse to run anything that draws random numbers (nothing does).
    #[arg(long, global = true)]
    seedless: bool,
    #[arg(long, global = true, value_name = "frozen|propagated")]
    flight_error_model: Option<FlightErrorModel>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a task from its nominal jump.
    Learn { task: PathBuf },
    /// Reuse a converged run's forces for a new target.
    Transfer {
        task: PathBuf,
        /// Run directory of the source campaign (default: the task file's
        /// transfer_source).
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Run several learners on one task.
    Compare {
        task: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "proposed,pd-ilc,ilc-mpc")]
        learners: Vec<String>,
    },
    /// One run per value of a numeric task field, in parallel.
    Sweep {
        task: PathBuf,
        /// Dotted path into the task, e.g. ground.k_p.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn report(summary: &RunSummary, dir: &Path) -> u8 {
    let last = summary.trials.last().expect("at least one trial");
    println!(
        "{} [{}]: {} after {} trials; final error ({:+.2} cm, {:+.2} cm, {:+.2}°); {} limit violations -> {}",
        summary.task_id,
        summary.learner.label(),
        if summary.converged { "converged" } else { "not converged" },
        summary.n_trials,
        100.0 * last.e_x,
        100.0 * last.e_z,
        last.e_theta_deg,
        summary.constraint_violations,
        dir.display()
    );
    if summary.converged && !summary.any_diverged() {
        0
    } else {
        NOT_CONVERGED
    }
}

fn run(cli: Cli) -> Result<u8, ExperimentError> {
    if cli.seedless {
        log::info!("seedless: no random number generator is used by any run");
    }
    let overrides = Overrides {
        max_trials: cli.max_trials,
        flight_error_model: cli.flight_error_model,
    };
    let load = |path: &Path| -> Result<_, ExperimentError> {
        let (task, source) = experiment::load_task(path)?;
        Ok((overrides.apply(task), source))
    };
    let out_for = |id: &str, suffix: &str| cli.out.clone().unwrap_or_else(|| Path::new("runs").join(format!("{id}{suffix}")));
    match &cli.command {
        Command::Learn { task } => {
            let (task, _) = load(task)?;
            let dir = out_for(&task.id, "");
            let (summary, _) = experiment::learn(&task, &dir)?;
            Ok(report(&summary, &dir))
        }
        Command::Transfer { task, from } => {
            let (task, source) = load(task)?;
            let from = from
                .clone()
                .or(source)
                .ok_or_else(|| ExperimentError::Usage("transfer needs --from or transfer_source in the task file".into()))?;
            let dir = out_for(&task.id, "");
            let (summary, _) = experiment::transfer(&task, &from, &dir)?;
            Ok(report(&summary, &dir))
        }
        Command::Compare { task, learners } => {
            let (task, _) = load(task)?;
            let kinds = learners
                .iter()
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<LearnerKind>().map_err(ExperimentError::Usage))
                .collect::<Result<Vec<_>, _>>()?;
            let dir = out_for(&task.id, "-compare");
            let cmp = experiment::compare(&task, &kinds, &dir)?;
            print!("{cmp}");
            Ok(0)
        }
        Command::Sweep { task, param, values } => {
            let (task, _) = load(task)?;
            let dir = out_for(&task.id, "-sweep");
            for e in experiment::sweep(&task, param, values, &dir)? {
                println!(
                    "{param} = {}: {} after {} trials -> {}",
                    e.value,
                    if e.converged { "converged" } else { "not converged" },
                    e.n_trials,
                    e.dir.display()
                );
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { USAGE } else { 1 })
        }
    }
}
