use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;
use slan_core::data::{ImputeMode, SyntheticConfig};
use slan_core::model::{AggregationKind, ConcatMode, InitKind};
use slan_core::train::TrainConfig;

use crate::args::{GenerateArgs, TrainOverrides};
use crate::CliError;

/// Seeds used when neither a flag nor a config file names any.
pub const DEFAULT_SEEDS: [u64; 3] = [2024, 2025, 2026];

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SLAN_THREADS";

/// Everything a training command needs besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub train: TrainConfig,
    pub impute: ImputeMode,
    pub drop: f64,
    pub seeds: Vec<u64>,
    /// Per-epoch progress on stderr.
    pub progress: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            impute: ImputeMode::None,
            drop: 0.0,
            seeds: DEFAULT_SEEDS.to_vec(),
            progress: true,
        }
    }
}

/// Keys accepted in a training config file. Names follow the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seeds: Option<Vec<u64>>,
    epochs: Option<usize>,
    patience: Option<usize>,
    lr: Option<f64>,
    lr_decay: Option<f64>,
    batch: Option<usize>,
    hidden: Option<usize>,
    t2v_dim: Option<usize>,
    agg: Option<AggregationKind>,
    impute: Option<ImputeMode>,
    concat: Option<ConcatMode>,
    drop: Option<f64>,
    init: Option<InitKind>,
    clip: Option<f64>,
    weight_decay: Option<f64>,
    min_improvement: Option<f64>,
}

pub(crate) fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    if !path.exists() {
        return Err(CliError::MissingPath(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

/// Worker thread cap from the environment, if set.
pub fn threads_from_env() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => bail!("{THREADS_ENV} must be a positive integer, got {v:?}"),
        },
        Err(_) => Ok(None),
    }
}

impl RunSettings {
    /// Built-in defaults, then the config file, then flags.
    pub fn resolve(flags: &TrainOverrides) -> Result<Self, CliError> {
        let file: FileConfig = match &flags.config {
            Some(path) => read_toml(path)?,
            None => FileConfig::default(),
        };
        let mut s = Self::default();
        let t = &mut s.train;
        macro_rules! layer {
            ($target:expr, $file:expr, $flag:expr) => {
                if let Some(v) = $file {
                    $target = v;
                }
                if let Some(v) = $flag {
                    $target = v;
                }
            };
        }
        layer!(s.seeds, file.seeds, flags.seeds.clone());
        layer!(t.epochs, file.epochs, flags.epochs);
        layer!(t.patience, file.patience, flags.patience);
        layer!(t.lr, file.lr, flags.lr);
        layer!(t.batch_size, file.batch, flags.batch);
        layer!(t.hidden, file.hidden, flags.hidden);
        layer!(t.t2v_dim, file.t2v_dim, flags.t2v_dim);
        layer!(t.aggregation, file.agg, flags.agg);
        layer!(t.concat, file.concat, flags.concat);
        layer!(t.init, file.init, flags.init);
        layer!(s.impute, file.impute, flags.impute);
        layer!(s.drop, file.drop, flags.drop);
        layer!(t.lr_decay, file.lr_decay, None);
        layer!(t.weight_decay, file.weight_decay, None);
        layer!(t.min_improvement, file.min_improvement, None);
        if let Some(c) = flags.clip.or(file.clip) {
            t.clip = Some(c);
        }
        // A patience left at its default is capped by the epoch budget.
        if flags.patience.is_none() && file.patience.is_none() {
            t.patience = t.patience.min(t.epochs);
        }
        t.threads = threads_from_env()?;
        s.progress = !flags.quiet;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(anyhow::anyhow!("at least one seed is required").into());
        }
        if !(0.0..1.0).contains(&self.drop) {
            return Err(anyhow::anyhow!("drop fraction must lie in [0, 1), got {}", self.drop).into());
        }
        self.train.validate().map_err(anyhow::Error::from)?;
        Ok(())
    }
}

/// Generator settings: preset, then config file, then flags.
pub fn synthetic_config(args: &GenerateArgs) -> Result<SyntheticConfig, CliError> {
    let mut cfg: SyntheticConfig = match &args.config {
        Some(path) => read_toml(path)?,
        None => SyntheticConfig::default(),
    };
    if args.separable {
        cfg.drift = 1.0;
        cfg.noise = 0.0;
    }
    macro_rules! flag {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                cfg.$field = v;
            }
        };
    }
    flag!(n, args.n);
    flag!(sensors, args.sensors);
    flag!(max_steps, args.max_steps);
    flag!(missing_rate, args.missing_rate);
    flag!(drift, args.drift);
    flag!(noise, args.noise);
    flag!(kappa, args.kappa);
    flag!(positive_rate, args.positive_rate);
    flag!(static_count, args.statics);
    flag!(seed, args.seed);
    if args.informative {
        cfg.informative = true;
    }
    cfg.validate().map_err(anyhow::Error::from)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flags_then_file_then_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "epochs = 7\nlr = 0.01\nagg = \"max\"\nseeds = [1, 2]\n").unwrap();
        let flags = TrainOverrides {
            config: Some(path),
            lr: Some(0.02),
            ..Default::default()
        };
        let s = RunSettings::resolve(&flags).unwrap();
        assert_eq!(s.train.epochs, 7);
        assert_eq!(s.train.lr, 0.02);
        assert_eq!(s.train.aggregation, AggregationKind::Max);
        assert_eq!(s.seeds, vec![1, 2]);
        assert_eq!(s.train.hidden, TrainConfig::default().hidden);
        assert_eq!(s.train.patience, 5);
    }

    #[test]
    fn unknown_keys_and_missing_files_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "learning_rate = 0.1\n").unwrap();
        let flags = TrainOverrides {
            config: Some(path),
            ..Default::default()
        };
        assert!(RunSettings::resolve(&flags).is_err());
        let missing = TrainOverrides {
            config: Some(dir.path().join("absent.toml")),
            ..Default::default()
        };
        assert!(matches!(RunSettings::resolve(&missing), Err(CliError::MissingPath(_))));
    }

    #[test]
    fn small_epoch_budget_caps_default_patience() {
        let flags = TrainOverrides {
            epochs: Some(2),
            ..Default::default()
        };
        assert_eq!(RunSettings::resolve(&flags).unwrap().train.patience, 2);
    }
}
