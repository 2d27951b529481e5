use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, Sample, FEATURE_COUNT};
use crate::engine::TRAJECTORY_HEADER;
use crate::error::{FdiError, Result};

/// Sidecar next to a dataset CSV holding what the CSV cannot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub scenario: String,
    pub class_names: Vec<String>,
}

/// `data.csv` -> `data.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes the trajectory columns plus `label,run_id`, and the class-name
/// sidecar.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},label,run_id", TRAJECTORY_HEADER.join(","))?;
    for s in &dataset.samples {
        let mut line = format!("{:.6}", s.t);
        for v in s.features {
            line.push_str(&format!(",{v:.6}"));
        }
        writeln!(w, "{line},{},{}", s.label, s.run_id)?;
    }
    w.flush()?;
    let meta = DatasetMeta {
        scenario: dataset.scenario.clone(),
        class_names: dataset.class_names.clone(),
    };
    std::fs::write(meta_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Reads a dataset CSV. Without a sidecar the classes are named
/// `Healthy, Fault1, ...` up to the largest label present.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected: Vec<&str> = TRAJECTORY_HEADER.iter().copied().chain(["label", "run_id"]).collect();
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(FdiError::DataQuality(format!(
            "{}: header must be {}",
            path.display(),
            expected.join(",")
        )));
    }
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .map(str::trim)
                .ok_or_else(|| FdiError::DataQuality(format!("row {}: missing column {i}", row + 1)))
        };
        let num = |i: usize| -> Result<f64> {
            let text = field(i)?;
            text.parse::<f64>()
                .map_err(|_| FdiError::DataQuality(format!("row {}: '{text}' is not a number", row + 1)))
        };
        let mut features = [0.0; FEATURE_COUNT];
        for (f, v) in features.iter_mut().enumerate() {
            *v = num(f + 1)?;
        }
        let label = field(FEATURE_COUNT + 1)?
            .parse()
            .map_err(|_| FdiError::DataQuality(format!("row {}: bad label", row + 1)))?;
        let run_id = field(FEATURE_COUNT + 2)?
            .parse()
            .map_err(|_| FdiError::DataQuality(format!("row {}: bad run_id", row + 1)))?;
        samples.push(Sample {
            features,
            label,
            t: num(0)?,
            run_id,
        });
    }
    let meta_file = meta_path(path);
    let meta = if meta_file.exists() {
        serde_json::from_str(&std::fs::read_to_string(&meta_file)?)?
    } else {
        let max = samples.iter().map(|s| s.label).max().unwrap_or(0);
        DatasetMeta {
            scenario: String::new(),
            class_names: std::iter::once("Healthy".to_string())
                .chain((1..=max).map(|i| format!("Fault{i}")))
                .collect(),
        }
    };
    Dataset::new(samples, meta.class_names, meta.scenario)
}
