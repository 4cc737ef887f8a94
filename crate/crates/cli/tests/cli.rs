use std::path::Path;
use std::process::{Command, Output};

use slan_cli::commands::{DatasetStats, DropRow, ScaleRow};
use slan_cli::importance::ImportanceRow;
use slan_cli::report::{read_csv, write_csv, RunRow, SummaryRow, TraceRow};
use slan_core::data::load_splits;
use tempfile::TempDir;

const TINY: [&str; 7] = ["--epochs", "2", "--hidden", "4", "--t2v-dim", "2", "--quiet"];

fn slan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slan")).args(args).output().expect("running slan")
}

fn ok(args: &[&str]) -> String {
    let out = slan(args);
    assert!(out.status.success(), "slan {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn tiny_data(root: &TempDir) -> std::path::PathBuf {
    let data = root.path().join("data");
    ok(&["generate", "--out", s(&data), "--n", "80", "--max-steps", "6", "--statics", "1", "--seed", "4"]);
    data
}

fn run(cmd: &[&str], data: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args: Vec<&str> = cmd.to_vec();
    args.extend(["--data", s(data), "--out", s(out)]);
    args.extend(TINY);
    if !extra.contains(&"--seeds") {
        args.extend(["--seeds", "5,6"]);
    }
    args.extend(extra);
    ok(&args)
}

#[test]
fn generate_is_deterministic_and_reports_matching_stats() {
    let root = TempDir::new().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    let table = ok(&["generate", "--out", s(&a), "--n", "50", "--seed", "9"]);
    ok(&["generate", "--out", s(&b), "--n", "50", "--seed", "9"]);
    for file in ["train.jsonl", "val.jsonl", "test.jsonl", "meta.json", "stats.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert!(table.contains("#Sensors"));
    let stats: Vec<DatasetStats> = read_csv(&a.join("stats.csv")).unwrap();
    assert_eq!(stats, vec![DatasetStats::of(&load_splits(&a).unwrap())]);
    assert_eq!(stats[0].instances, 50);
    assert_eq!(stats[0].train + stats[0].val + stats[0].test, 50);
}

#[test]
fn missing_data_exits_with_code_two_and_names_the_path() {
    let root = TempDir::new().unwrap();
    let missing = root.path().join("nowhere");
    let out = slan(&["train", "--data", s(&missing), "--out", s(&root.path().join("o")), "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));

    let data = tiny_data(&root);
    std::fs::remove_file(data.join("val.jsonl")).unwrap();
    let out = slan(&["train", "--data", s(&data), "--out", s(&root.path().join("o")), "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("val.jsonl"));
}

#[test]
fn train_writes_per_seed_traces_and_one_summary_row() {
    let root = TempDir::new().unwrap();
    let data = tiny_data(&root);
    let out = root.path().join("train");
    run(&["train"], &data, &out, &["--seeds", "1,2,3"]);
    for seed in 1..=3 {
        let trace: Vec<TraceRow> = read_csv(&out.join(format!("trace_{seed}.csv"))).unwrap();
        assert!(!trace.is_empty() && trace.len() <= 2);
        assert!(out.join(format!("checkpoint_{seed}.bin")).is_file());
    }
    let runs: Vec<RunRow> = read_csv(&out.join("runs.csv")).unwrap();
    assert_eq!(runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![1, 2, 3]);
    let summary: Vec<SummaryRow> = read_csv(&out.join("summary.csv")).unwrap();
    assert_eq!(summary.len(), 1);
    assert_eq!(summary[0].runs, 3);
    let mean = runs.iter().map(|r| 100.0 * r.auprc).sum::<f64>() / 3.0;
    assert!((summary[0].auprc_mean - mean).abs() < 1e-9);
    assert!(out.join("chart.svg").is_file());

    let eval_out = root.path().join("eval");
    ok(&["eval", "--data", s(&data), "--run", s(&out), "--out", s(&eval_out)]);
    let evals: Vec<RunRow> = read_csv(&eval_out.join("eval.csv")).unwrap();
    for (e, r) in evals.iter().zip(&runs) {
        assert_eq!((e.seed, e.auroc, e.auprc), (r.seed, r.auroc, r.auprc));
    }
}

#[test]
fn concat_ablation_covers_the_grid_and_its_default_matches_train() {
    let root = TempDir::new().unwrap();
    let data = tiny_data(&root);
    let ablate = root.path().join("ablate");
    run(&["ablate", "concat"], &data, &ablate, &[]);
    let runs: Vec<RunRow> = read_csv(&ablate.join("runs.csv")).unwrap();
    let pairs: Vec<(String, u64)> = runs.iter().map(|r| (r.variant.clone(), r.seed)).collect();
    let expected: Vec<(String, u64)> = ["global", "local", "both"]
        .iter()
        .flat_map(|v| [5, 6].map(|seed| (v.to_string(), seed)))
        .collect();
    assert_eq!(pairs, expected);
    for v in ["global", "local", "both"] {
        assert!(ablate.join(v).join("trace_5.csv").is_file());
    }
    let summary: Vec<SummaryRow> = read_csv(&ablate.join("summary.csv")).unwrap();
    let shorthand = root.path().join("shorthand");
    run(&["ablate-concat"], &data, &shorthand, &[]);
    assert_eq!(std::fs::read(ablate.join("summary.csv")).unwrap(), std::fs::read(shorthand.join("summary.csv")).unwrap());
    assert_eq!(summary.iter().map(|r| r.variant.as_str()).collect::<Vec<_>>(), ["global", "local", "both"]);

    let train = root.path().join("train");
    run(&["train"], &data, &train, &[]);
    let baseline: Vec<RunRow> = read_csv(&train.join("runs.csv")).unwrap();
    let both: Vec<&RunRow> = runs.iter().filter(|r| r.variant == "both").collect();
    for (b, t) in both.iter().zip(&baseline) {
        assert_eq!((b.seed, b.auroc, b.auprc, b.best_epoch), (t.seed, t.auroc, t.auprc, t.best_epoch));
    }
}

#[test]
fn drop_study_starts_at_the_baseline() {
    let root = TempDir::new().unwrap();
    let data = tiny_data(&root);
    let out = root.path().join("drop");
    run(&["drop-study"], &data, &out, &[]);
    let rows: Vec<DropRow> = read_csv(&out.join("drop_study.csv")).unwrap();
    let keys: Vec<(f64, u64)> = rows.iter().map(|r| (r.fraction, r.seed)).collect();
    let expected: Vec<(f64, u64)> = [0.0, 0.25, 0.5, 0.75].iter().flat_map(|&f| [(f, 5), (f, 6)]).collect();
    assert_eq!(keys, expected);

    let train = root.path().join("train");
    run(&["train"], &data, &train, &[]);
    let baseline: Vec<RunRow> = read_csv(&train.join("runs.csv")).unwrap();
    for (d, t) in rows.iter().zip(&baseline) {
        assert_eq!((d.seed, d.auroc, d.auprc), (t.seed, t.auroc, t.auprc));
    }
}

#[test]
fn scale_study_grows_the_training_prefix() {
    let root = TempDir::new().unwrap();
    let data = tiny_data(&root);
    let out = root.path().join("scale");
    run(&["scale-study"], &data, &out, &[]);
    let rows: Vec<ScaleRow> = read_csv(&out.join("scale_study.csv")).unwrap();
    assert_eq!(rows.len(), 4 * 2);
    let sizes: Vec<usize> = rows.iter().step_by(2).map(|r| r.train_size).collect();
    assert!(sizes.windows(2).all(|w| w[0] < w[1]), "{sizes:?}");
    assert_eq!(*sizes.last().unwrap(), load_splits(&data).unwrap().train.len());
}

#[test]
fn importance_needs_attention_and_normalizes() {
    let root = TempDir::new().unwrap();
    let data = tiny_data(&root);
    let mean_run = root.path().join("mean");
    run(&["train"], &data, &mean_run, &["--agg", "mean"]);
    let out = slan(&[
        "importance",
        "--data",
        s(&data),
        "--checkpoint",
        s(&mean_run.join("checkpoint_5.bin")),
        "--out",
        s(&root.path().join("imp")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("attention"));

    let att_run = root.path().join("attention");
    run(&["train"], &data, &att_run, &["--agg", "attention"]);
    let imp = root.path().join("imp");
    ok(&["importance", "--data", s(&data), "--checkpoint", s(&att_run.join("checkpoint_6.bin")), "--out", s(&imp)]);
    let rows: Vec<ImportanceRow> = read_csv(&imp.join("importance.csv")).unwrap();
    let total: f64 = rows.iter().map(|r| r.norm_i).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let mut ranks: Vec<usize> = rows.iter().map(|r| r.importance_rank).collect();
    ranks.sort();
    assert_eq!(ranks, (1..=rows.len()).collect::<Vec<_>>());
}

#[test]
fn single_class_validation_split_is_a_partial_failure() {
    let root = TempDir::new().unwrap();
    let data = tiny_data(&root);
    let val = data.join("val.jsonl");
    let kept: String = std::fs::read_to_string(&val)
        .unwrap()
        .lines()
        .filter(|l| l.contains("\"label\":0"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&val, kept).unwrap();
    let out_dir = root.path().join("out");
    let mut args = vec!["ablate", "agg", "--data", s(&data), "--out", s(&out_dir)];
    args.extend(TINY);
    args.extend(["--seeds", "5,6"]);
    let out = slan(&args);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for pair in ["(mean, seed 5)", "(max, seed 6)", "(attention, seed 5)"] {
        assert!(stderr.contains(pair), "{pair} missing from {stderr}");
    }
}

#[test]
fn csv_rows_round_trip() {
    let root = TempDir::new().unwrap();
    let path = root.path().join("runs.csv");
    let rows = vec![
        RunRow { variant: "a,b".into(), seed: 1, auroc: 0.75, auprc: 0.1 + 0.2, best_epoch: 3, epochs_run: 8 },
        RunRow { variant: "a,b".into(), seed: u64::MAX, auroc: 1.0, auprc: 1e-300, best_epoch: 1, epochs_run: 1 },
    ];
    write_csv(&path, &rows).unwrap();
    assert_eq!(read_csv::<RunRow>(&path).unwrap(), rows);
    let summary = vec![SummaryRow::from_runs("a,b", &rows)];
    write_csv(&path, &summary).unwrap();
    assert_eq!(read_csv::<SummaryRow>(&path).unwrap(), summary);
}
