use serde::{Deserialize, Serialize};

use super::check_training_set;
use crate::error::{FdiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub metric: Metric,
    pub n_class: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub fn fit(x: &[Vec<f64>], y: &[usize], n_class: usize, k: usize, metric: Metric) -> Result<KnnModel> {
    check_training_set(x, y, n_class)?;
    if k == 0 || k > x.len() {
        return Err(FdiError::Configuration(format!(
            "k = {k} must lie in 1..={} (training size)",
            x.len()
        )));
    }
    Ok(KnnModel {
        k,
        metric,
        n_class,
        points: x.to_vec(),
        labels: y.to_vec(),
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

impl KnnModel {
    pub fn n_features(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Indices of the `k` nearest training points, nearest first; equal
    /// distances are ordered by index.
    pub fn neighbors(&self, x: &[f64]) -> Vec<(f64, usize)> {
        let mut d: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, x), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d
    }

    /// Majority vote; ties go to the smaller summed distance, then to the
    /// lower class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_class];
        let mut dist = vec![0.0f64; self.n_class];
        for (d2, i) in self.neighbors(x) {
            let l = self.labels[i];
            votes[l] += 1;
            dist[l] += d2.sqrt();
        }
        let mut best = 0;
        for c in 1..self.n_class {
            if votes[c] > votes[best] || (votes[c] == votes[best] && dist[c] < dist[best]) {
                best = c;
            }
        }
        best
    }
}
