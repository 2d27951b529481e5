use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::check_training_set;
use crate::error::{FdiError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub means: Vec<Vec<f64>>,
    /// Inverse of the shrunk pooled covariance, row-major.
    pub cov_inv: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
}

/// Linear discriminant analysis with a shared covariance.
///
/// The pooled within-class covariance is shrunk towards its diagonal,
/// `(1 - lambda) S + lambda diag(S)`, before inversion.
pub fn fit(x: &[Vec<f64>], y: &[usize], n_class: usize, shrinkage: f64) -> Result<LdaModel> {
    let d = check_training_set(x, y, n_class)?;
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(FdiError::Configuration(format!(
            "LDA shrinkage must lie in [0, 1], got {shrinkage}"
        )));
    }
    let mut counts = vec![0usize; n_class];
    let mut means = vec![vec![0.0; d]; n_class];
    for (row, &label) in x.iter().zip(y) {
        counts[label] += 1;
        for (m, v) in means[label].iter_mut().zip(row) {
            *m += v;
        }
    }
    if let Some(k) = counts.iter().position(|&c| c < 2) {
        return Err(FdiError::Configuration(format!(
            "LDA needs at least 2 samples per class; class {k} has {}",
            counts[k]
        )));
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        for v in m.iter_mut() {
            *v /= c as f64;
        }
    }
    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for (row, &label) in x.iter().zip(y) {
        let centered = DVector::from_iterator(d, row.iter().zip(&means[label]).map(|(v, m)| v - m));
        scatter.ger(1.0, &centered, &centered, 1.0);
    }
    let n = x.len();
    let mut cov = scatter / (n - n_class).max(1) as f64;
    let diag = cov.diagonal();
    cov *= 1.0 - shrinkage;
    for i in 0..d {
        cov[(i, i)] += shrinkage * diag[i];
    }
    let chol = cov.clone().cholesky().ok_or_else(|| {
        FdiError::Numerical(format!(
            "pooled covariance is singular with shrinkage {shrinkage}; use a larger value"
        ))
    })?;
    let inv = chol.inverse();
    let inv = (&inv + inv.transpose()) * 0.5;
    Ok(LdaModel {
        means,
        cov_inv: (0..d).map(|i| inv.row(i).iter().copied().collect()).collect(),
        priors: counts.iter().map(|&c| c as f64 / n as f64).collect(),
    })
}

impl LdaModel {
    pub fn n_features(&self) -> usize {
        self.cov_inv.len()
    }

    fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.cov_inv
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Discriminant scores `x' S^-1 mu_k - mu_k' S^-1 mu_k / 2 + ln pi_k`.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.means
            .iter()
            .zip(&self.priors)
            .map(|(mu, prior)| {
                let w = self.solve(mu);
                let lin: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                let quad: f64 = mu.iter().zip(&w).map(|(a, b)| a * b).sum();
                lin - 0.5 * quad + prior.ln()
            })
            .collect()
    }

    /// Normal of the boundary between classes `a` and `b`: `S^-1 (mu_b - mu_a)`.
    pub fn direction(&self, a: usize, b: usize) -> Vec<f64> {
        let diff: Vec<f64> = self.means[b].iter().zip(&self.means[a]).map(|(p, q)| p - q).collect();
        self.solve(&diff)
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        super::argmax(&self.scores(x))
    }
}
