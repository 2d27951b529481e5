use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, FEATURE_COUNT};
use crate::error::{FdiError, Result};
use crate::signals::Signal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Features with zero variance; their off-diagonal entries are zero.
    pub constant: Vec<bool>,
}

impl CorrelationMatrix {
    /// Pearson correlation of the columns of `columns`.
    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        let m = columns.len();
        if names.len() != m {
            return Err(FdiError::Shape {
                expected: m,
                got: names.len(),
            });
        }
        let n = columns.first().map_or(0, Vec::len);
        if n < 2 {
            return Err(FdiError::DataQuality(format!(
                "correlation needs at least 2 samples, got {n}"
            )));
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(FdiError::Shape {
                expected: n,
                got: bad.len(),
            });
        }
        let centered: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| {
                let mean = c.iter().sum::<f64>() / n as f64;
                c.iter().map(|v| v - mean).collect()
            })
            .collect();
        let norms: Vec<f64> = centered
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let constant: Vec<bool> = norms
            .iter()
            .zip(columns)
            .map(|(&s, c)| {
                let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                s <= 1e-12 * scale * (n as f64).sqrt()
            })
            .collect();
        for (name, _) in names.iter().zip(&constant).filter(|(_, &c)| c) {
            let ambient = name.parse::<Signal>().is_ok_and(Signal::is_ambient);
            let level = if ambient { log::Level::Info } else { log::Level::Warn };
            log::log!(level, "feature {name} is constant; its correlations are set to zero");
        }
        let mut values = vec![vec![0.0; m]; m];
        for i in 0..m {
            values[i][i] = 1.0;
            for j in i + 1..m {
                let r = if constant[i] || constant[j] {
                    0.0
                } else {
                    let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                    (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
                };
                values[i][j] = r;
                values[j][i] = r;
            }
        }
        Ok(Self {
            names,
            values,
            constant,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, ",{}", self.names.join(","))?;
        for (name, row) in self.names.iter().zip(&self.values) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(w, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Correlation matrix of the 12 monitored signals.
pub fn correlation_matrix(dataset: &Dataset) -> Result<CorrelationMatrix> {
    let columns: Vec<Vec<f64>> = (0..FEATURE_COUNT)
        .map(|f| dataset.samples.iter().map(|s| s.features[f]).collect())
        .collect();
    CorrelationMatrix::from_columns(Dataset::feature_names(), &columns)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified k-fold partition of sample indices.
///
/// Indices of each class are shuffled and dealt round-robin over the folds;
/// each class continues where the previous one stopped so that total fold
/// sizes also differ by at most one.
pub fn kfold_split(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(FdiError::Configuration(format!(
            "k must satisfy 2 <= k <= {n}, got {k}"
        )));
    }
    let n_class = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); n_class];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut validation = vec![Vec::new(); k];
    let mut next = 0;
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(FdiError::Stratification(format!(
                "class {class} has {} samples, fewer than k = {k}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for &i in members.iter() {
            validation[next].push(i);
            next = (next + 1) % k;
        }
    }
    Ok(validation
        .into_iter()
        .map(|mut val| {
            val.sort_unstable();
            let mut in_val = vec![false; n];
            for &i in &val {
                in_val[i] = true;
            }
            Fold {
                train: (0..n).filter(|&i| !in_val[i]).collect(),
                validation: val,
            }
        })
        .collect())
}
