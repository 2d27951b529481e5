//! Labeled datasets built from simulated runs, plus the preprocessing steps
//! applied before training: cleaning, z-score normalization, correlation and
//! stratified folds.

mod clean;
mod generate;
mod io;
mod normalize;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::{FdiError, Result};
use crate::signals::{signal_names, SIGNAL_COUNT};

pub use clean::{clean, CleanReport, DroppedRow, WinsorizedValue};
pub use generate::{generate_dataset, generate_runs, plan_run, GenerationConfig, RunPlan, Scenario};
pub use io::{meta_path, read_dataset, write_dataset, DatasetMeta};
pub use normalize::{denormalize, normalize_apply, normalize_fit, FeatureStats, NormStats};
pub use stats::{correlation_matrix, kfold_split, CorrelationMatrix, Fold};

pub const FEATURE_COUNT: usize = SIGNAL_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: [f64; FEATURE_COUNT],
    pub label: usize,
    pub t: f64,
    pub run_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub class_names: Vec<String>,
    /// Set once the features have been normalized.
    pub norm_stats: Option<NormStats>,
    pub scenario: String,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, class_names: Vec<String>, scenario: impl Into<String>) -> Result<Self> {
        let ds = Self {
            samples,
            class_names,
            norm_stats: None,
            scenario: scenario.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n_class = self.class_names.len();
        if n_class == 0 {
            return Err(FdiError::Configuration("dataset declares no classes".into()));
        }
        for (index, s) in self.samples.iter().enumerate() {
            if s.label >= n_class {
                return Err(FdiError::LabelOutOfRange {
                    index,
                    label: s.label,
                    n_class,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_names() -> Vec<String> {
        signal_names()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Indices of the features a model sees: all of them for raw data, the
    /// retained ones once normalized.
    pub fn feature_indices(&self) -> Vec<usize> {
        match &self.norm_stats {
            Some(ns) => ns.retained_indices(),
            None => (0..FEATURE_COUNT).collect(),
        }
    }

    /// Row-major matrix of the model-visible features.
    pub fn design_matrix(&self) -> Vec<Vec<f64>> {
        let cols = self.feature_indices();
        self.samples
            .iter()
            .map(|s| cols.iter().map(|&c| s.features[c]).collect())
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i]).collect(),
            class_names: self.class_names.clone(),
            norm_stats: self.norm_stats.clone(),
            scenario: self.scenario.clone(),
        }
    }

    /// One-vs-rest view: class `positive` becomes 1 under `name`, everything
    /// else becomes 0 (`Healthy`).
    pub fn relabel_binary(&self, positive: usize, name: &str) -> Result<Dataset> {
        if positive == 0 || positive >= self.n_classes() {
            return Err(FdiError::Configuration(format!(
                "positive class {positive} must be a fault class of {:?}",
                self.class_names
            )));
        }
        Ok(Dataset {
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    label: usize::from(s.label == positive),
                    ..*s
                })
                .collect(),
            class_names: vec![self.class_names[0].clone(), name.to_string()],
            norm_stats: self.norm_stats.clone(),
            scenario: self.scenario.clone(),
        })
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c.eq_ignore_ascii_case(name))
    }

    pub fn run_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.samples.iter().map(|s| s.run_id).collect();
        ids.dedup();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}
