//! LDA, linear SVM, KNN and CART classifiers behind one model type.
//!
//! Every algorithm works on a dense row-major feature matrix. The
//! [`TrainedModel`] wrapper adds the normalization statistics, class names,
//! training time and the persisted JSON form.

pub mod knn;
pub mod lda;
pub mod svm;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{normalize_apply, normalize_fit, Dataset, NormStats};
use crate::error::{FdiError, Result};
use crate::util::sha256_hex;

pub use knn::{KnnModel, Metric};
pub use lda::LdaModel;
pub use svm::{SvmModel, SvmParams};
pub use tree::{Impurity, Node, TreeModel};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lda,
    Svm,
    Knn,
    Tree,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Lda, Algorithm::Svm, Algorithm::Knn, Algorithm::Tree];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Lda => "lda",
            Algorithm::Svm => "svm",
            Algorithm::Knn => "knn",
            Algorithm::Tree => "tree",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::Lda => "LDA",
            Algorithm::Svm => "Linear SVM",
            Algorithm::Knn => "KNN",
            Algorithm::Tree => "Decision tree",
        }
    }

    /// Parses a comma-separated list such as `lda,svm,knn,tree`.
    pub fn parse_list(s: &str) -> Result<Vec<Algorithm>> {
        s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = FdiError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| FdiError::Configuration(format!("unknown algorithm '{s}' (expected lda, svm, knn or tree)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub shrinkage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub metric: Metric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until purity or `min_leaf`.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub impurity: Impurity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lda: LdaParams,
    pub svm: SvmParams,
    pub knn: KnnParams,
    pub tree: TreeParams,
    /// Seeds SVM example shuffling.
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lda: LdaParams { shrinkage: 1e-3 },
            svm: SvmParams::default(),
            knn: KnnParams {
                k: 5,
                metric: Metric::Euclidean,
            },
            tree: TreeParams {
                max_depth: Some(12),
                min_leaf: 5,
                impurity: Impurity::Gini,
            },
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.lda.shrinkage)
            && self.svm.c > 0.0
            && self.svm.eta0 > 0.0
            && self.svm.epochs > 0
            && self.knn.k > 0
            && self.tree.min_leaf > 0
            && self.tree.max_depth != Some(0);
        if ok {
            Ok(())
        } else {
            Err(FdiError::Configuration(format!("invalid hyperparameters: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum Payload {
    Lda(LdaModel),
    Svm(SvmModel),
    Knn(KnnModel),
    Tree(TreeModel),
}

impl Payload {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Payload::Lda(_) => Algorithm::Lda,
            Payload::Svm(_) => Algorithm::Svm,
            Payload::Knn(_) => Algorithm::Knn,
            Payload::Tree(_) => Algorithm::Tree,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Payload::Lda(m) => m.n_features(),
            Payload::Svm(m) => m.n_features(),
            Payload::Knn(m) => m.n_features(),
            Payload::Tree(m) => m.n_features,
        }
    }

    fn predict(&self, x: &[f64]) -> usize {
        match self {
            Payload::Lda(m) => m.predict(x),
            Payload::Svm(m) => m.predict(x),
            Payload::Knn(m) => m.predict(x),
            Payload::Tree(m) => m.predict(x),
        }
    }
}

/// Fits one algorithm on a feature matrix.
pub fn fit_payload(
    algorithm: Algorithm,
    x: &[Vec<f64>],
    y: &[usize],
    n_class: usize,
    hp: &Hyperparams,
) -> Result<Payload> {
    hp.validate()?;
    Ok(match algorithm {
        Algorithm::Lda => Payload::Lda(lda::fit(x, y, n_class, hp.lda.shrinkage)?),
        Algorithm::Svm => Payload::Svm(svm::fit(x, y, n_class, &hp.svm, hp.seed)?),
        Algorithm::Knn => Payload::Knn(knn::fit(x, y, n_class, hp.knn.k, hp.knn.metric)?),
        Algorithm::Tree => Payload::Tree(tree::fit(x, y, n_class, hp.tree.max_depth, hp.tree.min_leaf)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub class_names: Vec<String>,
    pub n_features: usize,
    /// Statistics the inputs must be normalized with; `None` for models
    /// trained on raw features.
    pub norm_stats: Option<NormStats>,
    pub hyperparams: Hyperparams,
    pub training_time_s: f64,
    pub dataset_checksum: String,
    pub payload: Payload,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    checksum: String,
    model: TrainedModel,
}

impl TrainedModel {
    /// Fits on a dataset. Raw datasets are normalized first with statistics
    /// fitted on them; normalized datasets are used as they are.
    pub fn fit(algorithm: Algorithm, train: &Dataset, hp: &Hyperparams) -> Result<Self> {
        let normalized = match &train.norm_stats {
            Some(_) => train.clone(),
            None => normalize_apply(train, &normalize_fit(train)?)?,
        };
        Self::fit_prepared(algorithm, &normalized, hp)
    }

    /// Fits on the dataset's model-visible features without normalizing.
    pub fn fit_prepared(algorithm: Algorithm, train: &Dataset, hp: &Hyperparams) -> Result<Self> {
        let x = train.design_matrix();
        let y = train.labels();
        let start = Instant::now();
        let payload = fit_payload(algorithm, &x, &y, train.n_classes(), hp)?;
        let training_time_s = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
        Ok(Self {
            class_names: train.class_names.clone(),
            n_features: payload.n_features(),
            norm_stats: train.norm_stats.clone(),
            hyperparams: *hp,
            training_time_s,
            dataset_checksum: dataset_checksum(train),
            payload,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.payload.algorithm()
    }

    /// Predicts from a vector in model space (normalized, dropped features
    /// removed).
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(FdiError::Shape {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.payload.predict(x))
    }

    /// Predicts from raw measurements, normalizing with the model's stats.
    pub fn predict_raw(&self, raw: &[f64]) -> Result<usize> {
        match &self.norm_stats {
            Some(ns) => self.predict(&ns.transform(raw)?),
            None => self.predict(raw),
        }
    }

    /// Predicts every sample. A normalized dataset must carry the model's
    /// statistics; a raw one is normalized on the fly.
    pub fn predict_batch(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        match (&dataset.norm_stats, &self.norm_stats) {
            (Some(d), Some(m)) if d != m => Err(FdiError::Configuration(
                "dataset was normalized with statistics other than the model's".into(),
            )),
            (Some(_), _) | (None, None) => dataset.design_matrix().par_iter().map(|x| self.predict(x)).collect(),
            (None, Some(_)) => dataset
                .samples
                .par_iter()
                .map(|s| self.predict_raw(&s.features))
                .collect(),
        }
    }

    /// SHA-256 of the model document with the training time zeroed.
    pub fn checksum(&self) -> Result<String> {
        let mut content = self.clone();
        content.training_time_s = 0.0;
        Ok(sha256_hex(serde_json::to_string(&content)?.as_bytes()))
    }

    /// Versioned JSON document. The checksum covers everything except the
    /// wall-clock training time.
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            checksum: self.checksum()?,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| FdiError::ModelLoad(format!("malformed model document: {e}")))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(FdiError::ModelLoad(format!(
                "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        let actual = file.model.checksum()?;
        if actual != file.checksum {
            return Err(FdiError::ModelLoad(format!(
                "checksum mismatch: recorded {}, computed {actual}",
                file.checksum
            )));
        }
        if file.model.payload.n_features() != file.model.n_features {
            return Err(FdiError::ModelLoad(
                "payload dimension disagrees with n_features".into(),
            ));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| FdiError::ModelLoad(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    TrainedModel::load(path)
}

/// SHA-256 over the samples' bit patterns, labels and run ids.
pub fn dataset_checksum(dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    for s in &dataset.samples {
        h.update(s.t.to_le_bytes());
        for v in s.features {
            h.update(v.to_le_bytes());
        }
        h.update((s.label as u64).to_le_bytes());
        h.update(s.run_id.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Validates a training matrix and returns its feature dimension.
fn check_training_set(x: &[Vec<f64>], y: &[usize], n_class: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(FdiError::Configuration("empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(FdiError::Shape {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(FdiError::Configuration("training set has no features".into()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(FdiError::Shape {
            expected: d,
            got: row.len(),
        });
    }
    if let Some(index) = y.iter().position(|&l| l >= n_class) {
        return Err(FdiError::LabelOutOfRange {
            index,
            label: y[index],
            n_class,
        });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(FdiError::DataQuality("training features must be finite".into()));
    }
    Ok(d)
}

/// Index of the largest value; the first one on ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Sample, FEATURE_COUNT};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|i| {
                let label = i % 3;
                let mut features = [0.0; FEATURE_COUNT];
                for (f, v) in features.iter_mut().enumerate() {
                    *v = 10.0 * f as f64 + label as f64 * (f % 3) as f64 + rng.random_range(-1.0..1.0);
                }
                features[1] = 101.0;
                Sample {
                    features,
                    label,
                    t: i as f64,
                    run_id: 0,
                }
            })
            .collect();
        Dataset::new(samples, vec!["Healthy".into(), "A".into(), "B".into()], "test").unwrap()
    }

    #[test]
    fn save_load_round_trip_predicts_identically() {
        let ds = blobs(300, 1);
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let probes: Vec<[f64; FEATURE_COUNT]> = (0..1000)
            .map(|_| {
                let mut p = [0.0; FEATURE_COUNT];
                for (f, v) in p.iter_mut().enumerate() {
                    *v = 10.0 * f as f64 + rng.random_range(-3.0..3.0);
                }
                p
            })
            .collect();
        for algorithm in Algorithm::ALL {
            let m = TrainedModel::fit(algorithm, &ds, &Hyperparams::default()).unwrap();
            assert!(m.training_time_s > 0.0);
            let path = dir.path().join(format!("{algorithm}.json"));
            m.save(&path).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back, m);
            for p in &probes {
                assert_eq!(m.predict_raw(p).unwrap(), back.predict_raw(p).unwrap());
            }
        }
    }

    #[test]
    fn truncated_or_tampered_files_do_not_load() {
        let m = TrainedModel::fit(Algorithm::Lda, &blobs(90, 3), &Hyperparams::default()).unwrap();
        let text = m.to_json().unwrap();
        assert!(matches!(
            TrainedModel::from_json(&text[..text.len() / 2]),
            Err(FdiError::ModelLoad(_))
        ));
        let tampered = text.replacen("\"Healthy\"", "\"Fine\"", 1);
        assert!(matches!(
            TrainedModel::from_json(&tampered),
            Err(FdiError::ModelLoad(_))
        ));
        let old = text.replacen("\"format_version\": 1", "\"format_version\": 0", 1);
        assert!(matches!(TrainedModel::from_json(&old), Err(FdiError::ModelLoad(_))));
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let m = TrainedModel::fit(Algorithm::Tree, &blobs(90, 3), &Hyperparams::default()).unwrap();
        assert!(matches!(m.predict(&[0.0; 3]), Err(FdiError::Shape { .. })));
        assert!(matches!(
            m.predict_raw(&[0.0; 5]),
            Err(FdiError::Shape { expected: 12, .. })
        ));
    }

    #[test]
    fn fits_are_deterministic_apart_from_time() {
        let ds = blobs(150, 5);
        for algorithm in Algorithm::ALL {
            let mut a = TrainedModel::fit(algorithm, &ds, &Hyperparams::default()).unwrap();
            let mut b = TrainedModel::fit(algorithm, &ds, &Hyperparams::default()).unwrap();
            a.training_time_s = 0.0;
            b.training_time_s = 0.0;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn algorithm_lists_parse() {
        assert_eq!(
            Algorithm::parse_list("lda,svm,knn,tree").unwrap(),
            Algorithm::ALL.to_vec()
        );
        assert!(Algorithm::parse_list("lda,qda").is_err());
    }
}
