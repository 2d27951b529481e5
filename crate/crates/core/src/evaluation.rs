//! Confusion matrices, accuracy and F1, cross-validation and the classifier
//! comparison report.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Algorithm, Hyperparams, TrainedModel};
use crate::dataset::{kfold_split, normalize_apply, normalize_fit, Dataset};
use crate::error::{FdiError, Result};

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

/// Binary reduction of a confusion matrix around one positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

pub fn confusion(actual: &[usize], predicted: &[usize], n_class: usize) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(FdiError::Shape {
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(FdiError::Configuration("confusion matrix of zero samples".into()));
    }
    let mut counts = vec![vec![0u64; n_class]; n_class];
    for (index, (&a, &p)) in actual.iter().zip(predicted).enumerate() {
        if let Some(label) = [a, p].into_iter().find(|&l| l >= n_class) {
            return Err(FdiError::LabelOutOfRange { index, label, n_class });
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix {
        class_names: (0..n_class).map(|c| format!("class{c}")).collect(),
        counts,
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn with_class_names(mut self, names: &[String]) -> Result<Self> {
        if names.len() != self.n_class() {
            return Err(FdiError::Shape {
                expected: self.n_class(),
                got: names.len(),
            });
        }
        self.class_names = names.to_vec();
        Ok(self)
    }

    pub fn n_class(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_class()).map(|i| self.counts[i][i]).sum()
    }

    pub fn binary(&self, positive: usize) -> BinaryCounts {
        let tp = self.counts[positive][positive];
        let actual_pos: u64 = self.counts[positive].iter().sum();
        let predicted_pos: u64 = self.counts.iter().map(|r| r[positive]).sum();
        let fn_ = actual_pos - tp;
        let fp = predicted_pos - tp;
        BinaryCounts {
            tp,
            tn: self.total() - tp - fn_ - fp,
            fp,
            fn_,
        }
    }

    /// Percentage of samples on the diagonal.
    pub fn accuracy(&self) -> f64 {
        100.0 * ratio(self.trace(), self.total())
    }

    /// `2TP / (2TP + FP + FN)`, zero when the denominator is zero.
    pub fn f1(&self, positive: usize) -> f64 {
        let b = self.binary(positive);
        ratio(2 * b.tp, 2 * b.tp + b.fp + b.fn_)
    }

    pub fn macro_f1(&self) -> f64 {
        (0..self.n_class()).map(|c| self.f1(c)).sum::<f64>() / self.n_class() as f64
    }

    pub fn precision(&self, class: usize) -> f64 {
        let b = self.binary(class);
        ratio(b.tp, b.tp + b.fp)
    }

    pub fn recall(&self, class: usize) -> f64 {
        let b = self.binary(class);
        ratio(b.tp, b.tp + b.fn_)
    }

    /// Each row as percentages of its actual class; empty rows are zero.
    pub fn row_percentages(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let n: u64 = row.iter().sum();
                row.iter().map(|&c| 100.0 * ratio(c, n)).collect()
            })
            .collect()
    }

    /// Row-normalized percentages in an aligned text grid.
    pub fn render_percentages(&self) -> String {
        let corner = "actual \\ predicted";
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(corner.len());
        let mut out = format!("{corner:<width$}");
        for name in &self.class_names {
            let _ = write!(out, "  {name:>10}");
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(self.row_percentages()) {
            let _ = write!(out, "{name:<width$}");
            for v in row {
                let _ = write!(out, "  {v:>10.2}");
            }
            out.push('\n');
        }
        out
    }

    /// Raw counts with class names as header row and first column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["actual\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        wr.write_record(&header)?;
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(u64::to_string));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    cm.accuracy()
}

pub fn f1(cm: &ConfusionMatrix, positive: usize) -> f64 {
    cm.f1(positive)
}

pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    cm.macro_f1()
}

/// Per-class figures derived from a confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

pub fn class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.n_class())
        .map(|c| ClassMetrics {
            class: cm.class_names[c].clone(),
            precision: cm.precision(c),
            recall: cm.recall(c),
            f1: cm.f1(c),
            support: cm.counts[c].iter().sum(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    /// Misclassification-based accuracy of each validation fold, percent.
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold accuracies.
    pub std: f64,
    /// Pooled over all validation folds; every sample appears once.
    pub confusion: ConfusionMatrix,
}

/// Stratified k-fold cross-validation of an arbitrary learner.
///
/// `fit_predict` receives the training part and the validation part of a
/// fold and returns one predicted label per validation sample. Errors are
/// annotated with the fold index.
pub fn cross_validate_with<F>(dataset: &Dataset, k: usize, seed: u64, fit_predict: F) -> Result<CvReport>
where
    F: Fn(&Dataset, &Dataset) -> Result<Vec<usize>>,
{
    let labels = dataset.labels();
    let folds = kfold_split(&labels, k, seed)?;
    let n_class = dataset.n_classes();
    let mut pooled = vec![vec![0u64; n_class]; n_class];
    let mut fold_accuracies = Vec::with_capacity(k);
    for (fold, f) in folds.iter().enumerate() {
        let wrap = |e| FdiError::Fold {
            fold,
            source: Box::new(e),
        };
        let train = dataset.subset(&f.train);
        let validation = dataset.subset(&f.validation);
        let predicted = fit_predict(&train, &validation).map_err(wrap)?;
        let cm = confusion(&validation.labels(), &predicted, n_class).map_err(wrap)?;
        for (p, r) in pooled.iter_mut().zip(&cm.counts) {
            for (a, b) in p.iter_mut().zip(r) {
                *a += b;
            }
        }
        fold_accuracies.push(cm.accuracy());
    }
    let mean = fold_accuracies.iter().sum::<f64>() / k as f64;
    let std = (fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / k as f64).sqrt();
    Ok(CvReport {
        k,
        fold_accuracies,
        mean,
        std,
        confusion: ConfusionMatrix {
            class_names: dataset.class_names.clone(),
            counts: pooled,
        },
    })
}

/// Cross-validates one algorithm. Raw datasets are normalized per fold with
/// statistics of the fold's training part.
pub fn cross_validate(
    algorithm: Algorithm,
    dataset: &Dataset,
    k: usize,
    seed: u64,
    hp: &Hyperparams,
) -> Result<CvReport> {
    cross_validate_with(dataset, k, seed, |train, validation| {
        TrainedModel::fit(algorithm, train, hp)?.predict_batch(validation)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    /// Test accuracy, percent.
    pub accuracy: f64,
    pub macro_f1: f64,
    pub training_time_s: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub cv: Option<CvReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algorithm: Algorithm,
    /// `Err` holds the message of a failed fit.
    pub outcome: std::result::Result<ClassifierMetrics, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    /// Successful rows by decreasing test accuracy, failed rows last.
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// Also cross-validate each algorithm on the training set.
    pub cv_folds: Option<usize>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { cv_folds: Some(5) }
    }
}

/// Evaluates a fitted model on a dataset (raw or normalized with the
/// model's statistics).
pub fn evaluate_model(model: &TrainedModel, test: &Dataset) -> Result<ConfusionMatrix> {
    if test.class_names.len() != model.class_names.len() {
        return Err(FdiError::Configuration(format!(
            "model knows {} classes, dataset has {}",
            model.class_names.len(),
            test.class_names.len()
        )));
    }
    let predicted = model.predict_batch(test)?;
    confusion(&test.labels(), &predicted, model.class_names.len())?.with_class_names(&model.class_names)
}

/// Fits every algorithm on `train` and scores it on `test`. Both sets are
/// normalized with statistics fitted on `train` alone. A failed fit marks
/// its row failed and the others proceed.
pub fn compare(
    algorithms: &[Algorithm],
    train: &Dataset,
    test: &Dataset,
    hp: &Hyperparams,
    options: CompareOptions,
) -> Result<MetricsReport> {
    if train.class_names != test.class_names {
        return Err(FdiError::Configuration(
            "train and test datasets declare different classes".into(),
        ));
    }
    let stats = normalize_fit(train)?;
    let train_n = normalize_apply(train, &stats)?;
    let test_n = normalize_apply(test, &stats)?;
    let run = |&algorithm: &Algorithm| -> Result<ClassifierMetrics> {
        let model = TrainedModel::fit_prepared(algorithm, &train_n, hp)?;
        let cm = evaluate_model(&model, &test_n)?;
        let cv = match options.cv_folds {
            Some(k) => Some(cross_validate(algorithm, train, k, hp.seed, hp)?),
            None => None,
        };
        Ok(ClassifierMetrics {
            accuracy: cm.accuracy(),
            macro_f1: cm.macro_f1(),
            training_time_s: model.training_time_s,
            per_class: class_metrics(&cm),
            confusion: cm,
            cv,
        })
    };
    let mut rows: Vec<ComparisonRow> = algorithms
        .par_iter()
        .map(|a| ComparisonRow {
            algorithm: *a,
            outcome: run(a).map_err(|e| e.to_string()),
        })
        .collect();
    let key = |r: &ComparisonRow| r.outcome.as_ref().map_or(f64::NEG_INFINITY, |m| m.accuracy);
    rows.sort_by(|a, b| key(b).total_cmp(&key(a)));
    Ok(MetricsReport {
        scenario: train.scenario.clone(),
        rows,
    })
}

impl MetricsReport {
    pub fn row(&self, algorithm: Algorithm) -> Option<&ClassifierMetrics> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm)
            .and_then(|r| r.outcome.as_ref().ok())
    }

    /// Aligned text table in the layout of the comparison tables.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<15} {:>12} {:>8} {:>15} {:>16}\n",
            "Classifier", "Accuracy (%)", "F1", "Train time (s)", "CV accuracy (%)"
        );
        for row in &self.rows {
            let name = row.algorithm.display_name();
            match &row.outcome {
                Ok(m) => {
                    let cv =
                        m.cv.as_ref()
                            .map_or("-".to_string(), |c| format!("{:.2} ± {:.2}", c.mean, c.std));
                    let _ = writeln!(
                        out,
                        "{name:<15} {:>12.2} {:>8.3} {:>15.3} {cv:>16}",
                        m.accuracy, m.macro_f1, m.training_time_s
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, "{name:<15} failed: {e}");
                }
            }
        }
        out
    }

    /// `classifier,accuracy,f1,train_time_s`; failed rows leave the numbers
    /// empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["classifier", "accuracy", "f1", "train_time_s"])?;
        for row in &self.rows {
            let tag = row.algorithm.tag();
            match &row.outcome {
                Ok(m) => wr.write_record([
                    tag.to_string(),
                    format!("{:.4}", m.accuracy),
                    format!("{:.4}", m.macro_f1),
                    format!("{:.6}", m.training_time_s),
                ])?,
                Err(_) => wr.write_record([tag, "", "", ""])?,
            }
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Sample, FEATURE_COUNT};
    use proptest::prelude::*;

    #[test]
    fn hand_counted_matrix() {
        let cm = confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(cm.accuracy(), 75.0);
    }

    #[test]
    fn out_of_range_label_names_its_index() {
        match confusion(&[0, 1, 2], &[0, 1, 1], 2) {
            Err(FdiError::LabelOutOfRange { index: 2, label: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(confusion(&[0], &[0, 1], 2).is_err());
        assert!(confusion(&[], &[], 2).is_err());
    }

    #[test]
    fn binary_formulas() {
        // TP=8, FN=2, FP=2, TN=8 with class 1 positive
        let cm = ConfusionMatrix {
            class_names: vec!["neg".into(), "pos".into()],
            counts: vec![vec![8, 2], vec![2, 8]],
        };
        assert_eq!(
            cm.binary(1),
            BinaryCounts {
                tp: 8,
                tn: 8,
                fp: 2,
                fn_: 2
            }
        );
        assert!((cm.accuracy() - 80.0).abs() < 1e-12);
        assert!((cm.f1(1) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn f1_is_zero_without_positives() {
        let cm = confusion(&[0, 0], &[0, 0], 2).unwrap();
        assert_eq!(cm.f1(1), 0.0);
        assert_eq!(cm.f1(0), 1.0);
    }

    #[test]
    fn row_percentages_and_csv() {
        let cm = ConfusionMatrix {
            class_names: vec!["Healthy".into(), "Faulty".into()],
            counts: vec![vec![100, 0], vec![13, 87]],
        };
        assert_eq!(cm.row_percentages(), vec![vec![100.0, 0.0], vec![13.0, 87.0]]);
        let mut buf = Vec::new();
        cm.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "actual\\predicted,Healthy,Faulty\nHealthy,100,0\nFaulty,13,87\n"
        );
        assert!(cm.render_percentages().contains("87.00"));
    }

    fn balanced_binary(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| Sample {
                features: [i as f64; FEATURE_COUNT],
                label: i % 2,
                t: i as f64,
                run_id: 0,
            })
            .collect();
        Dataset::new(samples, vec!["a".into(), "b".into()], "test").unwrap()
    }

    #[test]
    fn constant_classifier_scores_chance() {
        let ds = balanced_binary(1000);
        let rep = cross_validate_with(&ds, 5, 3, |_, v| Ok(vec![0; v.len()])).unwrap();
        assert_eq!(rep.fold_accuracies.len(), 5);
        assert!((rep.mean - 50.0).abs() < 1e-9);
        assert_eq!(rep.confusion.total(), 1000);
    }

    #[test]
    fn cv_validates_every_sample_once() {
        let ds = balanced_binary(1000);
        let seen = std::sync::Mutex::new(Vec::new());
        cross_validate_with(&ds, 5, 11, |_, v| {
            assert_eq!(v.len(), 200);
            seen.lock().unwrap().extend(v.samples.iter().map(|s| s.t as usize));
            Ok(vec![0; v.len()])
        })
        .unwrap();
        let mut seen = seen.into_inner().unwrap();
        seen.sort_unstable();
        assert_eq!(seen, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn fold_errors_carry_the_fold_index() {
        let ds = balanced_binary(100);
        let err = cross_validate_with(&ds, 5, 0, |_, _| Err(FdiError::Numerical("boom".into()))).unwrap_err();
        assert!(matches!(err, FdiError::Fold { fold: 0, .. }));
    }

    #[test]
    fn memorizing_tree_scores_100_on_its_training_data() {
        let ds = balanced_binary(200);
        let hp = Hyperparams {
            tree: crate::classifiers::TreeParams {
                max_depth: None,
                min_leaf: 1,
                ..Hyperparams::default().tree
            },
            ..Default::default()
        };
        let rep = compare(&[Algorithm::Tree], &ds, &ds, &hp, CompareOptions { cv_folds: None }).unwrap();
        assert_eq!(rep.row(Algorithm::Tree).unwrap().accuracy, 100.0);
    }

    #[test]
    fn failed_fit_marks_only_its_row() {
        let ds = balanced_binary(20);
        let hp = Hyperparams {
            knn: crate::classifiers::KnnParams {
                k: 1000,
                ..Hyperparams::default().knn
            },
            ..Default::default()
        };
        let rep = compare(
            &[Algorithm::Knn, Algorithm::Tree],
            &ds,
            &ds,
            &hp,
            CompareOptions { cv_folds: None },
        )
        .unwrap();
        assert_eq!(rep.rows[0].algorithm, Algorithm::Tree);
        assert!(rep.rows[1].outcome.is_err());
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("classifier,accuracy,f1,train_time_s\ntree,"));
        assert!(text.ends_with("knn,,,\n"));
        assert!(rep.render_table().contains("failed"));
    }

    proptest! {
        #[test]
        fn self_confusion_is_perfect(labels in proptest::collection::vec(0usize..4, 1..200)) {
            let cm = confusion(&labels, &labels, 4).unwrap();
            prop_assert_eq!(cm.accuracy(), 100.0);
        }

        #[test]
        fn shuffling_pairs_keeps_the_matrix(
            pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..100),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let split = |p: &[(usize, usize)]| -> (Vec<usize>, Vec<usize>) { p.iter().copied().unzip() };
            let (a, p) = split(&pairs);
            let (sa, sp) = split(&shuffled);
            prop_assert_eq!(confusion(&a, &p, 3).unwrap(), confusion(&sa, &sp, 3).unwrap());
        }

        #[test]
        fn binary_identity_and_f1_bounds(tp in 0u64..500, tn in 0u64..500, fp in 0u64..500, fn_ in 0u64..500) {
            prop_assume!(tp + tn + fp + fn_ > 0);
            let cm = ConfusionMatrix {
                class_names: vec!["n".into(), "p".into()],
                counts: vec![vec![tn, fp], vec![fn_, tp]],
            };
            let direct = (tp + tn) as f64 / (tp + tn + fp + fn_) as f64 * 100.0;
            prop_assert!((cm.accuracy() - direct).abs() <= 1e-12 * direct.max(1.0));
            let f = cm.f1(1);
            prop_assert!((0.0..=1.0).contains(&f));
            if tp > 0 {
                prop_assert_eq!(f == 1.0, fp == 0 && fn_ == 0);
            }
        }
    }
}
