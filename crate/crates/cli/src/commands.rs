use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use slan_core::data::{generate_synthetic, save_splits, split_dataset, ImputeMode, IstsInstance, Splits};
use slan_core::model::{load_checkpoint, AggregationKind, ConcatMode};
use slan_core::train::{evaluate, TrainConfig};
use slan_core::SlanParams64;

use crate::args::{AblateArgs, AblationKind, BenchArgs, EvalArgs, GenerateArgs, ImportanceArgs, RunArgs, StudyArgs};
use crate::bench::{run_bench, BenchConfig};
use crate::experiment::{load_data, prepare_variant, run_grid, GridOutcome, Variant};
use crate::importance::sensor_importance;
use crate::report::{ci95_half_width, format_table, mean_std, pm, write_csv, RunRow, SummaryRow};
use crate::settings::{synthetic_config, RunSettings};
use crate::svg::{bar_chart, line_chart, Bar, Series};
use crate::CliError;

/// Fractions of observations removed by `drop-study` unless overridden.
pub const DROP_FRACTIONS: [f64; 4] = [0.0, 0.25, 0.5, 0.75];
/// Training-prefix fractions of `scale-study` unless overridden.
pub const SCALE_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn summary_table(rows: &[SummaryRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.variant.clone(), r.runs.to_string(), r.auroc.clone(), r.auprc.clone()])
        .collect();
    format_table(&["variant", "runs", "AUROC", "AUPRC"], &body)
}

/// Dataset statistics in the layout of a dataset overview table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub instances: usize,
    pub sensors: usize,
    pub statics: usize,
    /// Mean number of observations per instance.
    pub avg_observations: f64,
    /// Share of label 1, in percent.
    pub positive_percent: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl DatasetStats {
    pub fn of(splits: &Splits) -> Self {
        let all: Vec<&IstsInstance> = splits.train.iter().chain(&splits.val).chain(&splits.test).collect();
        let n = all.len();
        let events: usize = all.iter().map(|i| i.events.len()).sum();
        let positives = all.iter().filter(|i| i.label == 1).count();
        Self {
            instances: n,
            sensors: splits.info.sensor_count,
            statics: splits.info.static_count,
            avg_observations: events as f64 / n.max(1) as f64,
            positive_percent: 100.0 * positives as f64 / n.max(1) as f64,
            train: splits.train.len(),
            val: splits.val.len(),
            test: splits.test.len(),
        }
    }
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let cfg = synthetic_config(args)?;
    let data = generate_synthetic(&cfg).map_err(anyhow::Error::from)?;
    let splits = split_dataset(data.info, data.instances, cfg.seed);
    create_dir(&args.out)?;
    save_splits(&splits, &args.out).map_err(anyhow::Error::from)?;
    let stats = DatasetStats::of(&splits);
    write_csv(&args.out.join("stats.csv"), std::slice::from_ref(&stats))?;
    print!(
        "{}",
        format_table(
            &["#Instances", "#Sensors", "#Statics", "#Avg obs", "Imbalance %", "train/val/test"],
            &[vec![
                stats.instances.to_string(),
                stats.sensors.to_string(),
                stats.statics.to_string(),
                format!("{:.2}", stats.avg_observations),
                format!("{:.2}", stats.positive_percent),
                format!("{}/{}/{}", stats.train, stats.val, stats.test),
            ]],
        )
    );
    Ok(())
}

fn finish_grid(
    out: &Path,
    grid: GridOutcome,
    variants: &[Variant],
    seeds: &[u64],
    runs_file: &str,
) -> Result<(GridOutcome, Vec<SummaryRow>), CliError> {
    let rows = grid.rows();
    write_csv(&out.join(runs_file), &rows)?;
    let summary: Vec<SummaryRow> = variants
        .iter()
        .filter(|v| rows.iter().any(|r| r.variant == v.name))
        .map(|v| SummaryRow::from_runs(&v.name, &rows))
        .collect();
    write_csv(&out.join("summary.csv"), &summary)?;
    let total = variants.len() * seeds.len();
    let grid = grid.into_result(total)?;
    Ok((grid, summary))
}

pub fn train(args: &RunArgs) -> Result<(), CliError> {
    let settings = RunSettings::resolve(&args.train)?;
    let splits = load_data(&args.data)?;
    create_dir(&args.out)?;
    let mut variant = Variant::new("slan", settings.train.clone(), settings.impute);
    variant.drop = settings.drop;
    let variants = [variant];
    let grid = run_grid(&splits, &variants, &settings.seeds, settings.progress, |_| args.out.clone());
    let series: Vec<Series> = grid
        .traces("slan")
        .into_iter()
        .map(|(seed, trace)| Series {
            label: format!("seed {seed}"),
            points: trace.iter().map(|r| (r.epoch as f64, r.val_auprc)).collect(),
            errors: None,
        })
        .collect();
    write_text(&args.out.join("chart.svg"), &line_chart("Validation AUPRC", "epoch", "AUPRC", &series))?;
    let (_, summary) = finish_grid(&args.out, grid, &variants, &settings.seeds, "runs.csv")?;
    print!("{}", summary_table(&summary));
    Ok(())
}

/// `checkpoint_<seed>.bin` files of a run directory, ordered by seed.
pub fn checkpoints_in(dir: &Path) -> Result<Vec<(u64, PathBuf)>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::MissingPath(dir.to_path_buf()));
    }
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry.map_err(anyhow::Error::from)?.path();
        let seed = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("checkpoint_"))
            .and_then(|n| n.strip_suffix(".bin"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(seed) = seed {
            found.push((seed, path));
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(anyhow::anyhow!("no checkpoint_<seed>.bin files in {}", dir.display()).into());
    }
    Ok(found)
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let splits = load_data(&args.data)?;
    let checkpoints = checkpoints_in(&args.run)?;
    create_dir(&args.out)?;
    let impute = args.impute.unwrap_or_default();
    let mut rows = Vec::new();
    for (seed, path) in &checkpoints {
        let params: SlanParams64 = load_checkpoint(path).map_err(anyhow::Error::from)?;
        let mut variant = Variant::new("eval", TrainConfig::default(), impute);
        variant.drop = args.drop.unwrap_or(0.0);
        let (data, _) = prepare_variant(&splits, &variant, *seed)?;
        let report = evaluate(&params, &data.test, "test").map_err(anyhow::Error::from)?;
        rows.push(RunRow {
            variant: "eval".into(),
            seed: *seed,
            auroc: report.auroc,
            auprc: report.auprc,
            best_epoch: 0,
            epochs_run: 0,
        });
    }
    write_csv(&args.out.join("eval.csv"), &rows)?;
    let summary = vec![SummaryRow::from_runs("eval", &rows)];
    write_csv(&args.out.join("summary.csv"), &summary)?;
    print!("{}", summary_table(&summary));
    Ok(())
}

/// Variant grid of an ablation, in table order.
pub fn ablation_variants(kind: AblationKind, settings: &RunSettings) -> Vec<Variant> {
    let base = |name: &str, train: TrainConfig, impute: ImputeMode| {
        let mut v = Variant::new(name, train, impute);
        v.drop = settings.drop;
        v
    };
    match kind {
        AblationKind::Agg => AggregationKind::ALL
            .iter()
            .map(|&a| {
                let train = TrainConfig { aggregation: a, ..settings.train.clone() };
                base(a.name(), train, settings.impute)
            })
            .collect(),
        AblationKind::Impute => [ImputeMode::Ffill, ImputeMode::Mean, ImputeMode::Interpolation, ImputeMode::None]
            .iter()
            .map(|&m| base(m.name(), settings.train.clone(), m))
            .collect(),
        AblationKind::Concat => [ConcatMode::Global, ConcatMode::Local, ConcatMode::Both]
            .iter()
            .map(|&c| {
                let train = TrainConfig { concat: c, ..settings.train.clone() };
                base(c.name(), train, settings.impute)
            })
            .collect(),
    }
}

pub fn ablate(args: &AblateArgs) -> Result<(), CliError> {
    let settings = RunSettings::resolve(&args.run.train)?;
    let splits = load_data(&args.run.data)?;
    let out = &args.run.out;
    create_dir(out)?;
    let variants = ablation_variants(args.kind, &settings);
    let grid = run_grid(&splits, &variants, &settings.seeds, settings.progress, |v| out.join(&v.name));
    let rows = grid.rows();
    let bars: Vec<Bar> = variants
        .iter()
        .filter(|v| rows.iter().any(|r| r.variant == v.name))
        .map(|v| {
            let s = SummaryRow::from_runs(&v.name, &rows);
            Bar { label: v.name.clone(), value: s.auprc_mean, error: Some(s.auprc_std) }
        })
        .collect();
    let title = match args.kind {
        AblationKind::Agg => "Aggregation function",
        AblationKind::Impute => "Imputation",
        AblationKind::Concat => "Concat layer",
    };
    write_text(&out.join("chart.svg"), &bar_chart(title, "test AUPRC ×100", &bars))?;
    let (_, summary) = finish_grid(out, grid, &variants, &settings.seeds, "runs.csv")?;
    print!("{}", summary_table(&summary));
    Ok(())
}

/// One row of `drop_study.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropRow {
    pub fraction: f64,
    pub seed: u64,
    pub auroc: f64,
    pub auprc: f64,
}

/// Seed aggregate of one drop fraction, ×100 scale, with the change
/// relative to the smallest fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropSummary {
    pub fraction: f64,
    pub runs: usize,
    pub auroc_mean: f64,
    pub auprc_mean: f64,
    pub auprc_std: f64,
    pub auprc: String,
    /// AUPRC points gained relative to the baseline fraction.
    pub delta_abs: f64,
    /// Percent change relative to the baseline fraction.
    pub delta_rel: f64,
}

fn check_fractions(fractions: &[f64], upper_inclusive: bool) -> Result<(), CliError> {
    let ok = !fractions.is_empty()
        && fractions
            .iter()
            .all(|&f| f >= 0.0 && if upper_inclusive { f <= 1.0 && f > 0.0 } else { f < 1.0 });
    if ok {
        Ok(())
    } else {
        Err(anyhow::anyhow!("invalid fraction list {fractions:?}").into())
    }
}

fn fraction_name(prefix: &str, f: f64) -> String {
    format!("{prefix}-{f}")
}

pub fn drop_study(args: &StudyArgs) -> Result<(), CliError> {
    let settings = RunSettings::resolve(&args.run.train)?;
    let fractions = args.fractions.clone().unwrap_or_else(|| DROP_FRACTIONS.to_vec());
    check_fractions(&fractions, false)?;
    let splits = load_data(&args.run.data)?;
    let out = &args.run.out;
    create_dir(out)?;
    let variants: Vec<Variant> = fractions
        .iter()
        .map(|&f| {
            let mut v = Variant::new(fraction_name("drop", f), settings.train.clone(), settings.impute);
            v.drop = f;
            v
        })
        .collect();
    let grid = run_grid(&splits, &variants, &settings.seeds, settings.progress, |v| out.join(&v.name));
    let frac_of = |name: &str| fractions[variants.iter().position(|v| v.name == name).expect("known variant")];
    let rows: Vec<DropRow> = grid
        .rows()
        .iter()
        .map(|r| DropRow { fraction: frac_of(&r.variant), seed: r.seed, auroc: r.auroc, auprc: r.auprc })
        .collect();
    write_csv(&out.join("drop_study.csv"), &rows)?;
    let mut summary: Vec<DropSummary> = Vec::new();
    for &f in &fractions {
        let mine: Vec<&DropRow> = rows.iter().filter(|r| r.fraction == f).collect();
        if mine.is_empty() {
            continue;
        }
        let (auprc_mean, auprc_std) = mean_std(&mine.iter().map(|r| 100.0 * r.auprc).collect::<Vec<_>>());
        let (auroc_mean, _) = mean_std(&mine.iter().map(|r| 100.0 * r.auroc).collect::<Vec<_>>());
        let base = summary.first().map_or(auprc_mean, |b| b.auprc_mean);
        summary.push(DropSummary {
            fraction: f,
            runs: mine.len(),
            auroc_mean,
            auprc_mean,
            auprc_std,
            auprc: pm(auprc_mean, auprc_std),
            delta_abs: auprc_mean - base,
            delta_rel: 100.0 * (auprc_mean - base) / base,
        });
    }
    write_csv(&out.join("summary.csv"), &summary)?;
    let series = Series {
        label: "mean AUPRC".into(),
        points: summary.iter().map(|s| (s.fraction, s.auprc_mean)).collect(),
        errors: Some(summary.iter().map(|s| s.auprc_std).collect()),
    };
    write_text(&out.join("chart.svg"), &line_chart("AUPRC vs dropped observations", "dropped fraction", "test AUPRC ×100", &[series]))?;
    let body: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            vec![
                format!("{}", s.fraction),
                s.runs.to_string(),
                s.auprc.clone(),
                format!("{:+.2}", s.delta_abs),
                format!("{:+.2}%", s.delta_rel),
            ]
        })
        .collect();
    print!("{}", format_table(&["fraction", "runs", "AUPRC", "Δ abs", "Δ rel"], &body));
    grid.into_result(variants.len() * settings.seeds.len())?;
    Ok(())
}

/// One row of `scale_study.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub fraction: f64,
    pub seed: u64,
    pub train_size: usize,
    pub auroc: f64,
    pub auprc: f64,
}

/// Seed aggregate of one training fraction with a 95% interval, ×100 scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub fraction: f64,
    pub runs: usize,
    pub auprc_mean: f64,
    pub auprc_ci95: f64,
    pub auroc_mean: f64,
    pub auroc_ci95: f64,
    pub auprc: String,
}

pub fn scale_study(args: &StudyArgs) -> Result<(), CliError> {
    let settings = RunSettings::resolve(&args.run.train)?;
    let fractions = args.fractions.clone().unwrap_or_else(|| SCALE_FRACTIONS.to_vec());
    check_fractions(&fractions, true)?;
    let splits = load_data(&args.run.data)?;
    let out = &args.run.out;
    create_dir(out)?;
    let variants: Vec<Variant> = fractions
        .iter()
        .map(|&f| {
            let mut v = Variant::new(fraction_name("train", f), settings.train.clone(), settings.impute);
            v.drop = settings.drop;
            v.train_fraction = f;
            v
        })
        .collect();
    let grid = run_grid(&splits, &variants, &settings.seeds, settings.progress, |v| out.join(&v.name));
    let frac_of = |name: &str| fractions[variants.iter().position(|v| v.name == name).expect("known variant")];
    let rows: Vec<ScaleRow> = grid
        .rows()
        .iter()
        .map(|r| {
            let f = frac_of(&r.variant);
            ScaleRow {
                fraction: f,
                seed: r.seed,
                train_size: slan_core::data::prefix(&splits.train, f).len(),
                auroc: r.auroc,
                auprc: r.auprc,
            }
        })
        .collect();
    write_csv(&out.join("scale_study.csv"), &rows)?;
    let mut summary = Vec::new();
    for &f in &fractions {
        let auprc: Vec<f64> = rows.iter().filter(|r| r.fraction == f).map(|r| 100.0 * r.auprc).collect();
        let auroc: Vec<f64> = rows.iter().filter(|r| r.fraction == f).map(|r| 100.0 * r.auroc).collect();
        if auprc.is_empty() {
            continue;
        }
        let (auprc_mean, _) = mean_std(&auprc);
        let (auroc_mean, _) = mean_std(&auroc);
        let auprc_ci95 = ci95_half_width(&auprc);
        summary.push(ScaleSummary {
            fraction: f,
            runs: auprc.len(),
            auprc_mean,
            auprc_ci95,
            auroc_mean,
            auroc_ci95: ci95_half_width(&auroc),
            auprc: pm(auprc_mean, auprc_ci95),
        });
    }
    write_csv(&out.join("summary.csv"), &summary)?;
    let series = Series {
        label: "mean ± 95% CI".into(),
        points: summary.iter().map(|s| (s.fraction, s.auprc_mean)).collect(),
        errors: Some(summary.iter().map(|s| s.auprc_ci95).collect()),
    };
    write_text(&out.join("chart.svg"), &line_chart("AUPRC vs training data", "training fraction", "test AUPRC ×100", &[series]))?;
    let body: Vec<Vec<String>> = summary
        .iter()
        .map(|s| vec![format!("{}", s.fraction), s.runs.to_string(), s.auprc.clone()])
        .collect();
    print!("{}", format_table(&["fraction", "runs", "AUPRC (95% CI)"], &body));
    grid.into_result(variants.len() * settings.seeds.len())?;
    Ok(())
}

pub fn importance(args: &ImportanceArgs) -> Result<(), CliError> {
    let splits = load_data(&args.data)?;
    if !args.checkpoint.is_file() {
        return Err(CliError::MissingPath(args.checkpoint.clone()));
    }
    let params: SlanParams64 = load_checkpoint(&args.checkpoint).map_err(anyhow::Error::from)?;
    let variant = Variant::new("importance", TrainConfig::default(), args.impute.unwrap_or_default());
    let (data, _) = prepare_variant(&splits, &variant, 0)?;
    let report = sensor_importance(&params, &data.test, &splits.info.sensor_names).map_err(anyhow::Error::from)?;
    create_dir(&args.out)?;
    write_csv(&args.out.join("importance.csv"), &report.rows)?;
    let bars: Vec<Bar> = report
        .rows
        .iter()
        .map(|r| Bar { label: r.name.clone(), value: r.norm_i, error: None })
        .collect();
    write_text(&args.out.join("chart.svg"), &bar_chart("Normalized attention importance", "normI", &bars))?;
    let body: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.count.to_string(),
                format!("{:.3}", r.rate_per_hour),
                format!("{:.4}", r.norm_i),
                r.importance_rank.to_string(),
                r.rate_rank.to_string(),
            ]
        })
        .collect();
    print!("{}", format_table(&["sensor", "count", "rate/h", "normI", "rank", "rate rank"], &body));
    for name in &report.excluded {
        println!("note: {name} is never measured in the test split and is excluded");
    }
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let cfg = BenchConfig {
        n: args.n,
        sensors: args.sensors,
        batch: args.batch,
        hidden: args.hidden,
        t2v_dim: args.t2v_dim,
        repeats: args.repeats,
        seed: args.seed,
    };
    let rows = run_bench(&cfg, &args.steps)?;
    create_dir(&args.out)?;
    write_csv(&args.out.join("bench.csv"), &rows)?;
    let series = Series {
        label: "seconds / epoch".into(),
        points: rows.iter().map(|r| (r.mean_steps, r.seconds_per_epoch)).collect(),
        errors: None,
    };
    write_text(&args.out.join("chart.svg"), &line_chart("Epoch time vs sequence length", "mean steps", "seconds", &[series]))?;
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.max_steps.to_string(),
                format!("{:.1}", r.mean_steps),
                r.events.to_string(),
                format!("{:.3}", r.seconds_per_epoch),
                format!("{:.2}", r.time_ratio),
                format!("{:.2}", r.linearity),
            ]
        })
        .collect();
    print!(
        "{}",
        format_table(&["max steps", "mean steps", "events", "s/epoch", "time ratio", "vs linear"], &body)
    );
    Ok(())
}
