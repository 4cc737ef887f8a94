use crate::data::{
    build_schedule, impute, standardize, DataError, DatasetMeta, ImputeMode, IstsInstance, Splits,
    SwitchSchedule,
};

/// Model-ready view of one split: schedules, statics and labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedSplit {
    pub ids: Vec<String>,
    pub schedules: Vec<SwitchSchedule>,
    pub statics: Vec<Option<Vec<f64>>>,
    pub labels: Vec<u8>,
}

impl PreparedSplit {
    pub fn new(instances: &[IstsInstance], sensor_count: usize) -> Result<Self, DataError> {
        let schedules = instances
            .iter()
            .map(|i| build_schedule(i, sensor_count))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            ids: instances.iter().map(|i| i.id.clone()).collect(),
            schedules,
            statics: instances.iter().map(|i| i.statics.clone()).collect(),
            labels: instances.iter().map(|i| i.label).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The first `k` instances.
    pub fn truncate(&self, k: usize) -> Self {
        let k = k.min(self.len());
        Self {
            ids: self.ids[..k].to_vec(),
            schedules: self.schedules[..k].to_vec(),
            statics: self.statics[..k].to_vec(),
            labels: self.labels[..k].to_vec(),
        }
    }
}

/// Standardized and optionally imputed train/validation/test splits.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedData {
    pub sensor_count: usize,
    pub static_count: usize,
    /// Statistics of the raw training split.
    pub meta: DatasetMeta,
    pub train: PreparedSplit,
    pub val: PreparedSplit,
    pub test: PreparedSplit,
}

/// Standardizes every split with training statistics, then imputes with
/// `mode` (training means of the standardized data fill leading gaps).
pub fn prepare_splits(splits: &Splits, mode: ImputeMode) -> Result<PreparedData, DataError> {
    let info = &splits.info;
    let meta = DatasetMeta::from_train(&splits.train, info);
    let train = standardize(&splits.train, &meta);
    let val = standardize(&splits.val, &meta);
    let test = standardize(&splits.test, &meta);
    let fill_meta = DatasetMeta::from_train(&train, info);
    let finish = |xs: Vec<IstsInstance>| -> Result<PreparedSplit, DataError> {
        let filled: Vec<IstsInstance> = xs.iter().map(|x| impute(x, mode, &fill_meta)).collect();
        PreparedSplit::new(&filled, info.sensor_count)
    };
    Ok(PreparedData {
        sensor_count: info.sensor_count,
        static_count: info.static_count,
        meta,
        train: finish(train)?,
        val: finish(val)?,
        test: finish(test)?,
    })
}
