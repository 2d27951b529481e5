use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Dataset, FEATURE_COUNT};
use crate::error::{FdiError, Result};

const CLIP_SIGMAS: f64 = 6.0;
const MAX_DROP_FRACTION: f64 = 0.10;
/// Scales the median absolute deviation to a normal standard deviation.
const MAD_TO_SIGMA: f64 = 1.482_602_218_505_602;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub run_id: u32,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinsorizedValue {
    pub run_id: u32,
    pub t: f64,
    pub feature: usize,
    pub original: f64,
    pub clamped: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub dropped: Vec<DroppedRow>,
    pub winsorized: Vec<WinsorizedValue>,
}

impl CleanReport {
    pub fn is_empty(&self) -> bool {
        self.dropped.is_empty() && self.winsorized.is_empty()
    }
}

/// Drops rows with non-finite features, then clamps each feature to within
/// six standard deviations of its run median.
///
/// The deviation is estimated robustly from the median absolute deviation so
/// that the outliers being removed do not widen their own bound; when the
/// MAD vanishes the ordinary standard deviation is used, and features that
/// are constant within a run are left alone.
pub fn clean(dataset: &Dataset) -> Result<(Dataset, CleanReport)> {
    let mut report = CleanReport::default();
    let mut kept = Vec::with_capacity(dataset.len());
    for s in &dataset.samples {
        if s.features.iter().all(|v| v.is_finite()) {
            kept.push(*s);
        } else {
            report.dropped.push(DroppedRow {
                run_id: s.run_id,
                t: s.t,
            });
        }
    }
    let n = dataset.len();
    if n > 0 && report.dropped.len() as f64 > MAX_DROP_FRACTION * n as f64 {
        return Err(FdiError::DataQuality(format!(
            "{} of {} rows have non-finite values (limit {:.0}%)",
            report.dropped.len(),
            n,
            MAX_DROP_FRACTION * 100.0
        )));
    }

    let mut runs: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, s) in kept.iter().enumerate() {
        runs.entry(s.run_id).or_default().push(i);
    }
    for rows in runs.values() {
        for f in 0..FEATURE_COUNT {
            let values: Vec<f64> = rows.iter().map(|&i| kept[i].features[f]).collect();
            let Some((lo, hi)) = bounds(&values) else { continue };
            for &i in rows {
                let v = kept[i].features[f];
                let c = v.clamp(lo, hi);
                if c != v {
                    kept[i].features[f] = c;
                    report.winsorized.push(WinsorizedValue {
                        run_id: kept[i].run_id,
                        t: kept[i].t,
                        feature: f,
                        original: v,
                        clamped: c,
                    });
                }
            }
        }
    }
    let mut out = Dataset::new(kept, dataset.class_names.clone(), dataset.scenario.clone())?;
    out.norm_stats = dataset.norm_stats.clone();
    Ok((out, report))
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn bounds(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 3 {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mut sigma = MAD_TO_SIGMA * median(&dev);
    if sigma <= 0.0 {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        sigma = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    }
    (sigma > 0.0).then_some((med - CLIP_SIGMAS * sigma, med + CLIP_SIGMAS * sigma))
}
