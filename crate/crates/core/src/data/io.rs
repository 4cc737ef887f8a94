use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{DataError, DatasetInfo, IstsInstance, Splits};

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads one instance per nonblank line. Event ordering is validated; sensor
/// range and static length are checked against `info` when given.
pub fn read_jsonl(path: &Path, info: Option<&DatasetInfo>) -> Result<Vec<IstsInstance>, DataError> {
    let file = File::open(path).map_err(io_error(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_error(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: IstsInstance = serde_json::from_str(&line).map_err(|source| DataError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        let (sensors, statics) = match info {
            Some(info) => (info.sensor_count, info.static_count),
            None => (usize::MAX, inst.statics.as_ref().map_or(0, Vec::len)),
        };
        inst.validate(sensors, statics)?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_jsonl(instances: &[IstsInstance], path: &Path) -> Result<(), DataError> {
    let file = File::create(path).map_err(io_error(path))?;
    let mut w = BufWriter::new(file);
    for inst in instances {
        serde_json::to_writer(&mut w, inst).map_err(|source| DataError::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })?;
        w.write_all(b"\n").map_err(io_error(path))?;
    }
    w.flush().map_err(io_error(path))
}

pub fn read_info(path: &Path) -> Result<DatasetInfo, DataError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|source| DataError::Json {
        path: path.to_path_buf(),
        line: source.line(),
        source,
    })
}

pub fn write_info(info: &DatasetInfo, path: &Path) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(info).expect("info serializes");
    fs::write(path, text + "\n").map_err(io_error(path))
}

const SPLIT_FILES: [&str; 3] = ["train.jsonl", "val.jsonl", "test.jsonl"];

/// Writes `train.jsonl`, `val.jsonl`, `test.jsonl` and `meta.json` into `dir`.
pub fn save_splits(splits: &Splits, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    write_info(&splits.info, &dir.join("meta.json"))?;
    for (name, part) in SPLIT_FILES.iter().zip([&splits.train, &splits.val, &splits.test]) {
        write_jsonl(part, &dir.join(name))?;
    }
    Ok(())
}

/// Loads the layout written by [`save_splits`].
pub fn load_splits(dir: &Path) -> Result<Splits, DataError> {
    let info = read_info(&dir.join("meta.json"))?;
    let load = |name: &str| -> Result<Vec<IstsInstance>, DataError> {
        let path: PathBuf = dir.join(name);
        read_jsonl(&path, Some(&info))
    };
    Ok(Splits {
        train: load(SPLIT_FILES[0])?,
        val: load(SPLIT_FILES[1])?,
        test: load(SPLIT_FILES[2])?,
        info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, split_dataset, SyntheticConfig};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SyntheticConfig {
            n: 40,
            static_count: 2,
            ..Default::default()
        };
        let d = generate_synthetic(&cfg).unwrap();
        let splits = split_dataset(d.info, d.instances, 1);
        save_splits(&splits, dir.path()).unwrap();
        assert_eq!(load_splits(dir.path()).unwrap(), splits);
    }

    #[test]
    fn errors_carry_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = r#"{"id":"a","label":0,"statics":null,"events":[[0.0,0,1.0]]}"#;
        fs::write(&path, format!("{good}\n{{oops\n")).unwrap();
        match read_jsonl(&path, None) {
            Err(DataError::Json { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let unsorted = r#"{"id":"late","label":1,"statics":null,"events":[[2.0,0,1.0],[1.0,0,1.0]]}"#;
        fs::write(&path, unsorted).unwrap();
        let err = read_jsonl(&path, None).unwrap_err();
        assert!(err.to_string().contains("late"), "{err}");
        fs::write(&path, "").unwrap();
        assert!(read_jsonl(&path, None).unwrap().is_empty());
    }
}
