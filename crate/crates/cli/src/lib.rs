//! Experiment commands for switch-scheduled recurrent models: dataset
//! generation, training, evaluation, ablations, drop and scale studies,
//! attention importance and a sequence-length benchmark.
//!
//! Every command writes CSV files that the tool can read back, plus an SVG
//! chart, into its output directory.

pub mod args;
pub mod bench;
pub mod commands;
pub mod experiment;
pub mod importance;
pub mod report;
pub mod settings;
pub mod svg;

use std::path::PathBuf;

use args::{AblateArgs, AblationKind, Cli, Command};
use experiment::RunFailure;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("path not found: {}", .0.display())]
    MissingPath(PathBuf),
    #[error("{} of {total} runs failed: {}", failures.len(), describe(failures))]
    PartialFailure { failures: Vec<RunFailure>, total: usize },
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

fn describe(failures: &[RunFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("({}, seed {}): {}", f.variant, f.seed, f.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl CliError {
    /// Process exit code: 2 for a missing input path, 3 when only some runs
    /// of a grid failed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::MissingPath(_) => 2,
            Self::PartialFailure { .. } => 3,
            Self::Other(_) => 1,
        }
    }
}

/// Caps the global worker pool at `SLAN_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    if let Some(n) = settings::threads_from_env()? {
        // A pool built earlier in the same process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::AblateAgg(a) => commands::ablate(&AblateArgs { kind: AblationKind::Agg, run: a.clone() }),
        Command::AblateImpute(a) => commands::ablate(&AblateArgs { kind: AblationKind::Impute, run: a.clone() }),
        Command::AblateConcat(a) => commands::ablate(&AblateArgs { kind: AblationKind::Concat, run: a.clone() }),
        Command::DropStudy(a) => commands::drop_study(a),
        Command::ScaleStudy(a) => commands::scale_study(a),
        Command::Importance(a) => commands::importance(a),
        Command::Bench(a) => commands::bench(a),
    }
}
