use serde::{Deserialize, Serialize};

use super::{Dataset, FEATURE_COUNT};
use crate::error::{FdiError, Result};
use crate::signals::Signal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub retained: bool,
}

/// Per-feature z-score statistics fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub features: Vec<FeatureStats>,
}

impl NormStats {
    pub fn retained_indices(&self) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.retained.then_some(i))
            .collect()
    }

    pub fn n_retained(&self) -> usize {
        self.features.iter().filter(|f| f.retained).count()
    }

    pub fn dropped_names(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| !f.retained)
            .map(|f| f.name.as_str())
            .collect()
    }

    /// Normalizes a raw feature vector and keeps only retained features.
    pub fn transform(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.features.len() {
            return Err(FdiError::Shape {
                expected: self.features.len(),
                got: raw.len(),
            });
        }
        Ok(self
            .features
            .iter()
            .zip(raw)
            .filter(|(f, _)| f.retained)
            .map(|(f, v)| (v - f.mean) / f.std)
            .collect())
    }

    fn normalize_full(&self, raw: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for (i, f) in self.features.iter().enumerate() {
            if f.retained {
                out[i] = (raw[i] - f.mean) / f.std;
            }
        }
        out
    }
}

/// Fits per-feature mean and (population) standard deviation. Features
/// without variance are flagged as not retained.
pub fn normalize_fit(dataset: &Dataset) -> Result<NormStats> {
    let n = dataset.len();
    if n == 0 {
        return Err(FdiError::DataQuality(
            "cannot fit normalization on an empty dataset".into(),
        ));
    }
    let names = Dataset::feature_names();
    let mut features = Vec::with_capacity(FEATURE_COUNT);
    for (f, name) in names.into_iter().enumerate() {
        let mean = dataset.samples.iter().map(|s| s.features[f]).sum::<f64>() / n as f64;
        let var = dataset
            .samples
            .iter()
            .map(|s| (s.features[f] - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        let retained = std > 1e-12 * mean.abs().max(1.0);
        if !retained {
            // ambient channels are constant by design
            let level = if Signal::ALL[f].is_ambient() {
                log::Level::Info
            } else {
                log::Level::Warn
            };
            log::log!(level, "feature {name} has zero variance and is dropped");
        }
        features.push(FeatureStats {
            name,
            mean,
            std: if retained { std } else { 1.0 },
            retained,
        });
    }
    if features.iter().all(|f| !f.retained) {
        return Err(FdiError::DataQuality("every feature is constant".into()));
    }
    Ok(NormStats { features })
}

/// Applies fitted statistics. Dropped features are set to zero.
pub fn normalize_apply(dataset: &Dataset, stats: &NormStats) -> Result<Dataset> {
    if stats.features.len() != FEATURE_COUNT {
        return Err(FdiError::Shape {
            expected: FEATURE_COUNT,
            got: stats.features.len(),
        });
    }
    let mut out = dataset.clone();
    for s in &mut out.samples {
        s.features = stats.normalize_full(&s.features);
    }
    out.norm_stats = Some(stats.clone());
    Ok(out)
}

/// Inverse of the z-score map; dropped features come back as their mean.
pub fn denormalize(features: &[f64; FEATURE_COUNT], stats: &NormStats) -> [f64; FEATURE_COUNT] {
    let mut out = [0.0; FEATURE_COUNT];
    for (i, f) in stats.features.iter().enumerate() {
        out[i] = if f.retained {
            features[i] * f.std + f.mean
        } else {
            f.mean
        };
    }
    out
}
