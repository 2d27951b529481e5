use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::check_training_set;
use crate::error::{FdiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Inverse regularization strength; `lambda = 1 / (C n)`.
    pub c: f64,
    pub epochs: usize,
    /// Initial learning rate of the schedule `eta0 / (1 + eta0 lambda t)`.
    pub eta0: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 200,
            eta0: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// One weight vector per class (one-vs-rest).
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    /// Per class, the lowest primal objective of the averaged iterate seen
    /// up to each epoch.
    pub objective_trace: Vec<Vec<f64>>,
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let m = self.margins(x);
        if m.len() == 1 {
            return usize::from(m[0] > 0.0);
        }
        super::argmax(&m)
    }
}

/// `lambda/2 |w|^2 + mean(hinge)` with the bias folded into `w` as the last
/// component.
fn objective(w: &[f64], x: &[Vec<f64>], targets: &[f64], lambda: f64) -> f64 {
    let d = x[0].len();
    let loss: f64 = x
        .iter()
        .zip(targets)
        .map(|(row, &t)| {
            let f: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[d];
            (1.0 - t * f).max(0.0)
        })
        .sum::<f64>()
        / x.len() as f64;
    0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>() + loss
}

/// Averaged stochastic subgradient descent on the regularized hinge loss
/// for one binary problem. The averaged iterate is scored after every epoch
/// and the best one is returned with its non-increasing objective trace.
fn train_binary(
    x: &[Vec<f64>],
    targets: &[f64],
    params: &SvmParams,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let d = x[0].len();
    let lambda = 1.0 / (params.c * n as f64);
    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;
    let mut trace = Vec::with_capacity(params.epochs);
    let mut best = (f64::INFINITY, avg.clone());
    for _ in 0..params.epochs {
        order.shuffle(rng);
        for &i in &order {
            let eta = params.eta0 / (1.0 + params.eta0 * lambda * t as f64);
            let row = &x[i];
            let f: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[d];
            let shrink = 1.0 - eta * lambda;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            if targets[i] * f < 1.0 {
                let step = eta * targets[i];
                for (v, a) in w.iter_mut().zip(row) {
                    *v += step * a;
                }
                w[d] += step;
            }
            t += 1;
            let mu = 1.0 / t as f64;
            for (a, v) in avg.iter_mut().zip(&w) {
                *a += mu * (v - *a);
            }
        }
        let obj = objective(&avg, x, targets, lambda);
        if !obj.is_finite() {
            return Err(FdiError::Divergence(format!(
                "SVM objective became non-finite with learning rate eta0 = {:e}",
                params.eta0
            )));
        }
        if obj < best.0 {
            best = (obj, avg.clone());
        }
        trace.push(best.0);
    }
    Ok((best.1, trace))
}

/// One-vs-rest linear SVM. Two-class problems train a single machine whose
/// positive side is class 1.
pub fn fit(x: &[Vec<f64>], y: &[usize], n_class: usize, params: &SvmParams, seed: u64) -> Result<SvmModel> {
    check_training_set(x, y, n_class)?;
    if !(params.c > 0.0 && params.eta0 > 0.0 && params.epochs > 0) {
        return Err(FdiError::Configuration(
            "SVM needs C > 0, eta0 > 0 and epochs > 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let machines: Vec<usize> = if n_class == 2 { vec![1] } else { (0..n_class).collect() };
    let mut model = SvmModel {
        weights: Vec::new(),
        biases: Vec::new(),
        objective_trace: Vec::new(),
    };
    for class in machines {
        let targets: Vec<f64> = y.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        let (mut w, trace) = train_binary(x, &targets, params, &mut rng)?;
        model.biases.push(w.pop().unwrap_or(0.0));
        model.weights.push(w);
        model.objective_trace.push(trace);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separable_pair() {
        let x = vec![vec![-1.0], vec![1.0]];
        let m = fit(&x, &[0, 1], 2, &SvmParams::default(), 0).unwrap();
        assert_eq!(m.predict(&[-1.0]), 0);
        assert_eq!(m.predict(&[1.0]), 1);
    }

    #[test]
    fn xor_is_not_linearly_separable() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = [0, 0, 1, 1];
        let m = fit(&x, &y, 2, &SvmParams::default(), 4).unwrap();
        let correct = x.iter().zip(&y).filter(|(r, &l)| m.predict(r) == l).count();
        assert!(correct <= 3);
    }

    #[test]
    fn huge_learning_rate_diverges_with_a_named_rate() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 1e300, 1.0]).collect();
        let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let params = SvmParams {
            eta0: 1e300,
            epochs: 3,
            ..SvmParams::default()
        };
        match fit(&x, &y, 2, &params, 0) {
            Err(FdiError::Divergence(msg)) => assert!(msg.contains("1e300")),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn objective_trace_never_increases(
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 10..60),
            seed in any::<u64>(),
        ) {
            let x: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
            let y: Vec<usize> = pts.iter().map(|&(a, b)| (a - b > 0.3) as usize + (a + b > 1.0) as usize).collect();
            prop_assume!((0..3).all(|c| y.contains(&c)));
            let params = SvmParams { epochs: 30, ..SvmParams::default() };
            let m = fit(&x, &y, 3, &params, seed).unwrap();
            for trace in &m.objective_trace {
                prop_assert_eq!(trace.len(), 30);
                for w in trace.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-6);
                }
            }
        }
    }

    #[test]
    fn three_classes_use_three_machines() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i / 10) as f64 * 3.0 + (i % 10) as f64 * 0.1])
            .collect();
        let y: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let m = fit(&x, &y, 3, &SvmParams::default(), 1).unwrap();
        assert_eq!(m.weights.len(), 3);
        assert_eq!(m.predict(&[0.3]), 0);
        assert_eq!(m.predict(&[6.5]), 2);
    }
}
