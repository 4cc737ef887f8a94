use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use slan_core::train::EpochRecord;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// One line of `trace_<seed>.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auprc: f64,
    pub val_auroc: f64,
    pub lr: f64,
    pub seconds: f64,
}

impl From<&EpochRecord> for TraceRow {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            train_loss: r.train_loss,
            val_auprc: r.val_auprc,
            val_auroc: r.val_auroc,
            lr: r.lr,
            seconds: r.seconds,
        }
    }
}

/// Test metrics of one (variant, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub variant: String,
    pub seed: u64,
    pub auroc: f64,
    pub auprc: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Seed aggregate of one variant. Numeric columns are on the ×100 scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub runs: usize,
    pub auroc_mean: f64,
    pub auroc_std: f64,
    pub auprc_mean: f64,
    pub auprc_std: f64,
    /// `mean ± std` with two decimals.
    pub auroc: String,
    pub auprc: String,
}

impl SummaryRow {
    /// Aggregates every row of `runs` whose variant is `variant`.
    pub fn from_runs(variant: &str, runs: &[RunRow]) -> Self {
        let mine: Vec<&RunRow> = runs.iter().filter(|r| r.variant == variant).collect();
        let scaled = |f: fn(&RunRow) -> f64| mine.iter().map(|r| 100.0 * f(r)).collect::<Vec<_>>();
        let (auroc_mean, auroc_std) = mean_std(&scaled(|r| r.auroc));
        let (auprc_mean, auprc_std) = mean_std(&scaled(|r| r.auprc));
        Self {
            variant: variant.to_string(),
            runs: mine.len(),
            auroc_mean,
            auroc_std,
            auprc_mean,
            auprc_std,
            auroc: pm(auroc_mean, auroc_std),
            auprc: pm(auprc_mean, auprc_std),
        }
    }
}

/// `12.34 ± 0.56`.
pub fn pm(mean: f64, spread: f64) -> String {
    format!("{mean:.2} ± {spread:.2}")
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Half-width of the two-sided 95% Student-t interval for the mean;
/// NaN with fewer than two values.
pub fn ci95_half_width(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let (_, sd) = mean_std(values);
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    t * sd / (n as f64).sqrt()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Left-aligned plain-text table.
pub fn format_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(&line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for row in rows {
        out.push('\n');
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out.push('\n');
    out
}
