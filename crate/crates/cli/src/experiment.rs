use std::path::{Path, PathBuf};

use anyhow::Context;
use slan_core::data::{drop_dataset, load_splits, prefix, ImputeMode, Splits};
use slan_core::model::save_checkpoint;
use slan_core::train::{evaluate, prepare_splits, train, EpochRecord, PreparedData, TrainConfig};
use slan_core::SlanParams64;

use crate::report::{write_csv, RunRow, TraceRow};
use crate::CliError;

/// One cell of an experiment grid: a training configuration plus the data
/// transforms applied before training.
#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub name: String,
    pub train: TrainConfig,
    pub impute: ImputeMode,
    /// Share of observations dropped from every split.
    pub drop: f64,
    /// Share of the training split kept, as a prefix.
    pub train_fraction: f64,
}

impl Variant {
    pub fn new(name: impl Into<String>, train: TrainConfig, impute: ImputeMode) -> Self {
        Self {
            name: name.into(),
            train,
            impute,
            drop: 0.0,
            train_fraction: 1.0,
        }
    }
}

/// Everything produced by one (variant, seed) run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub row: RunRow,
    pub trace: Vec<EpochRecord>,
    pub params: SlanParams64,
}

/// A run that ended in an error.
#[derive(Clone, Debug, PartialEq)]
pub struct RunFailure {
    pub variant: String,
    pub seed: u64,
    pub message: String,
}

/// Loads the split directory, failing with [`CliError::MissingPath`] for
/// an absent directory or file.
pub fn load_data(dir: &Path) -> Result<Splits, CliError> {
    if !dir.is_dir() {
        return Err(CliError::MissingPath(dir.to_path_buf()));
    }
    for name in ["train.jsonl", "val.jsonl", "test.jsonl", "meta.json"] {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(CliError::MissingPath(path));
        }
    }
    Ok(load_splits(dir).map_err(anyhow::Error::from)?)
}

/// Drop seed of split `split` (0 train, 1 validation, 2 test).
fn drop_seed(seed: u64, split: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(split)
}

/// Applies the variant's drop and prefix transforms and prepares every split.
pub fn prepare_variant(splits: &Splits, variant: &Variant, seed: u64) -> anyhow::Result<(PreparedData, usize)> {
    let mut capped = 0;
    let mut transformed = splits.clone();
    if variant.drop > 0.0 {
        for (k, part) in [&mut transformed.train, &mut transformed.val, &mut transformed.test]
            .into_iter()
            .enumerate()
        {
            let (kept, n) = drop_dataset(part, variant.drop, drop_seed(seed, k as u64))?;
            *part = kept;
            capped += n;
        }
    }
    if variant.train_fraction < 1.0 {
        transformed.train = prefix(&transformed.train, variant.train_fraction);
    }
    Ok((prepare_splits(&transformed, variant.impute)?, capped))
}

/// Trains and tests one variant for one seed.
pub fn run_one(splits: &Splits, variant: &Variant, seed: u64, progress: bool) -> anyhow::Result<RunOutput> {
    let (data, capped) = prepare_variant(splits, variant, seed)?;
    if capped > 0 && progress {
        eprintln!("[{} seed {seed}] {capped} instances kept a single event after dropping", variant.name);
    }
    let cfg = TrainConfig {
        seed,
        ..variant.train.clone()
    };
    let outcome = train::<f64>(&data.train, &data.val, data.sensor_count, data.static_count, &cfg, |r| {
        if !progress {
            return;
        }
        eprintln!(
            "[{} seed {seed}] epoch {:>3}  loss {:.4}  val auprc {:.4}  lr {:.2e}  {:.1}s",
            variant.name, r.epoch, r.train_loss, r.val_auprc, r.lr, r.seconds
        );
    })?;
    let test = evaluate(&outcome.params, &data.test, "test")?;
    Ok(RunOutput {
        row: RunRow {
            variant: variant.name.clone(),
            seed,
            auroc: test.auroc,
            auprc: test.auprc,
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.trace.len(),
        },
        trace: outcome.trace,
        params: outcome.params,
    })
}

/// Writes `trace_<seed>.csv` and `checkpoint_<seed>.bin` into `dir`.
pub fn write_run_files(dir: &Path, output: &RunOutput) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let seed = output.row.seed;
    let trace: Vec<TraceRow> = output.trace.iter().map(TraceRow::from).collect();
    write_csv(&dir.join(format!("trace_{seed}.csv")), &trace)?;
    save_checkpoint(&output.params, &dir.join(format!("checkpoint_{seed}.bin")))?;
    Ok(())
}

/// Results of a variant × seed grid.
#[derive(Clone, Debug, Default)]
pub struct GridOutcome {
    pub runs: Vec<RunOutput>,
    pub failures: Vec<RunFailure>,
}

impl GridOutcome {
    pub fn rows(&self) -> Vec<RunRow> {
        self.runs.iter().map(|r| r.row.clone()).collect()
    }

    /// Traces of the successful runs of `variant`, by seed.
    pub fn traces(&self, variant: &str) -> Vec<(u64, &[EpochRecord])> {
        self.runs
            .iter()
            .filter(|r| r.row.variant == variant)
            .map(|r| (r.row.seed, r.trace.as_slice()))
            .collect()
    }

    /// `Err` listing every failed pair, `Ok` when all runs finished.
    pub fn into_result(self, total: usize) -> Result<Self, CliError> {
        if self.failures.is_empty() {
            Ok(self)
        } else {
            Err(CliError::PartialFailure {
                failures: self.failures,
                total,
            })
        }
    }
}

/// Runs every (variant, seed) pair in order. Per-run files go to
/// `dir_of(variant)`; a failing run is recorded and the grid continues.
pub fn run_grid(
    splits: &Splits,
    variants: &[Variant],
    seeds: &[u64],
    progress: bool,
    dir_of: impl Fn(&Variant) -> PathBuf,
) -> GridOutcome {
    let mut outcome = GridOutcome::default();
    for variant in variants {
        for &seed in seeds {
            let result = run_one(splits, variant, seed, progress).and_then(|out| {
                write_run_files(&dir_of(variant), &out)?;
                Ok(out)
            });
            match result {
                Ok(out) => outcome.runs.push(out),
                Err(e) => {
                    if progress {
                        eprintln!("[{} seed {seed}] failed: {e:#}", variant.name);
                    }
                    outcome.failures.push(RunFailure {
                        variant: variant.name.clone(),
                        seed,
                        message: format!("{e:#}"),
                    });
                }
            }
        }
    }
    outcome
}
