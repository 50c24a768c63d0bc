//! Embedding-feature classifiers with a uniform train/predict contract.
//!
//! Every model is trained on the classes actually present in its training
//! labels and reports predictions in the dataset's full class index space;
//! classes absent from training are never predicted. A training set with a
//! single class yields a constant predictor.

mod boosting;
mod forest;
mod knn;
mod mlp;
mod naive_bayes;
pub mod softmax;
mod svm;
mod tree;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use boosting::BoostingParams;
pub use forest::ForestParams;
pub use knn::KnnParams;
pub use mlp::MlpParams;
pub use naive_bayes::NaiveBayesParams;
pub use softmax::SoftmaxParams;
pub use svm::SvmParams;

/// Feature rows with class labels in `[0, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if features.ncols() == 0 {
            return Err(Error::Empty("dataset has no feature columns".into()));
        }
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("features must be finite".into()));
        }
        Ok(Self {
            features,
            labels,
            class_names,
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Model family and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    SoftmaxRegression(SoftmaxParams),
    LinearSvm(SvmParams),
    GaussianNb(NaiveBayesParams),
    RandomForest(ForestParams),
    GradientBoosting(BoostingParams),
    Mlp(MlpParams),
    Knn(KnnParams),
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::SoftmaxRegression(_) => "softmax_regression",
            ModelSpec::LinearSvm(_) => "linear_svm",
            ModelSpec::GaussianNb(_) => "gaussian_nb",
            ModelSpec::RandomForest(_) => "random_forest",
            ModelSpec::GradientBoosting(_) => "gradient_boosting",
            ModelSpec::Mlp(_) => "mlp",
            ModelSpec::Knn(_) => "knn",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("{}: {msg}", self.kind())));
        match self {
            ModelSpec::SoftmaxRegression(p) => {
                if !(p.l2 >= 0.0) || !(p.learning_rate > 0.0) || !(p.tol >= 0.0) {
                    return bad("l2 >= 0, learning_rate > 0 and tol >= 0 required");
                }
            }
            ModelSpec::LinearSvm(p) => {
                if !(p.c > 0.0) || p.epochs == 0 {
                    return bad("c > 0 and epochs >= 1 required");
                }
            }
            ModelSpec::GaussianNb(p) => {
                if !(p.var_smoothing > 0.0) {
                    return bad("var_smoothing > 0 required");
                }
            }
            ModelSpec::RandomForest(p) => {
                if p.n_trees == 0 || p.min_leaf == 0 || p.features_per_split == Some(0) {
                    return bad("n_trees, min_leaf and features_per_split must be positive");
                }
            }
            ModelSpec::GradientBoosting(p) => {
                if p.n_rounds == 0
                    || p.max_depth == 0
                    || !(p.learning_rate > 0.0)
                    || !(p.subsample > 0.0 && p.subsample <= 1.0)
                {
                    return bad("n_rounds, max_depth, learning_rate positive and subsample in (0, 1]");
                }
            }
            ModelSpec::Mlp(p) => {
                if p.hidden == 0 || p.epochs == 0 || p.batch_size == 0 || !(p.learning_rate > 0.0) {
                    return bad("hidden, epochs, batch_size and learning_rate must be positive");
                }
            }
            ModelSpec::Knn(p) => {
                if p.k == 0 {
                    return bad("k must be positive");
                }
            }
        }
        Ok(())
    }
}

/// The nine embedding-based baselines, in the conventional reporting order.
/// The three boosting entries share one implementation and differ only in
/// defaults.
pub fn standard_suite() -> Vec<(String, ModelSpec)> {
    vec![
        ("Logistic Regression".into(), ModelSpec::SoftmaxRegression(SoftmaxParams::default())),
        ("SVM".into(), ModelSpec::LinearSvm(SvmParams::default())),
        ("Naive Bayes".into(), ModelSpec::GaussianNb(NaiveBayesParams::default())),
        ("Random Forest".into(), ModelSpec::RandomForest(ForestParams::default())),
        ("Gradient Boosting".into(), ModelSpec::GradientBoosting(BoostingParams::default())),
        ("XGBoost".into(), ModelSpec::GradientBoosting(BoostingParams::xgboost_like())),
        ("LightGBM".into(), ModelSpec::GradientBoosting(BoostingParams::lightgbm_like())),
        ("MLP".into(), ModelSpec::Mlp(MlpParams::default())),
        ("KNN".into(), ModelSpec::Knn(KnnParams::default())),
    ]
}

/// Per-feature z-scoring fitted on training rows. Constant columns keep
/// scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { mean, scale }
    }

    pub(crate) fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            for v in col.iter_mut() {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
enum Fitted {
    Constant,
    Softmax(softmax::SoftmaxModel),
    Svm(svm::SvmModel),
    NaiveBayes(naive_bayes::NaiveBayesModel),
    Forest(forest::ForestModel),
    Boosting(boosting::BoostingModel),
    Mlp(mlp::MlpModel),
    Knn(knn::KnnModel),
}

/// A fitted model. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    spec: ModelSpec,
    class_names: Vec<String>,
    /// Original label of each internal (compact) class.
    classes: Vec<usize>,
    n_features: usize,
    fitted: Fitted,
}

/// Hard labels and, where the model defines them, class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub labels: Vec<usize>,
    pub probabilities: Option<Vec<Vec<f64>>>,
}

/// Smallest index among the maxima.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Row-wise numerically stable softmax, in place.
pub(crate) fn softmax_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Mean cross-entropy of row-probabilities against labels.
pub(crate) fn cross_entropy(probs: &DMatrix<f64>, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[(i, y)].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / labels.len() as f64
}

pub fn train(spec: &ModelSpec, data: &Dataset) -> Result<TrainedModel> {
    train_with_validation(spec, data, None)
}

/// Train, optionally passing a validation set. Only the MLP uses it, for
/// best-epoch selection by validation accuracy.
pub fn train_with_validation(
    spec: &ModelSpec,
    data: &Dataset,
    validation: Option<&Dataset>,
) -> Result<TrainedModel> {
    spec.validate()?;
    if let Some(v) = validation {
        if v.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: v.dim(),
            });
        }
    }
    let mut classes: Vec<usize> = data.labels.clone();
    classes.sort_unstable();
    classes.dedup();
    let mut compact_of = vec![usize::MAX; data.n_classes()];
    for (c, &orig) in classes.iter().enumerate() {
        compact_of[orig] = c;
    }
    let y: Vec<usize> = data.labels.iter().map(|&l| compact_of[l]).collect();
    let m = classes.len();
    let x = &data.features;

    let fitted = if m == 1 {
        log::warn!(
            "training data has a single class `{}`; fitting a constant predictor",
            data.class_names[classes[0]]
        );
        Fitted::Constant
    } else {
        match spec {
            ModelSpec::SoftmaxRegression(p) => Fitted::Softmax(softmax::fit(x, &y, m, p)),
            ModelSpec::LinearSvm(p) => Fitted::Svm(svm::fit(x, &y, m, p)),
            ModelSpec::GaussianNb(p) => Fitted::NaiveBayes(naive_bayes::fit(x, &y, m, p)),
            ModelSpec::RandomForest(p) => Fitted::Forest(forest::fit(x, &y, m, p)),
            ModelSpec::GradientBoosting(p) => Fitted::Boosting(boosting::fit(x, &y, m, p)),
            ModelSpec::Mlp(p) => {
                let val = validation.map(|v| {
                    // validation rows of classes unseen in training can never be right
                    let labels: Vec<Option<usize>> = v
                        .labels
                        .iter()
                        .map(|&l| (compact_of[l] != usize::MAX).then_some(compact_of[l]))
                        .collect();
                    (&v.features, labels)
                });
                Fitted::Mlp(mlp::fit(x, &y, m, p, val.as_ref().map(|(f, l)| (*f, l.as_slice()))))
            }
            ModelSpec::Knn(p) => Fitted::Knn(knn::fit(x, &y, m, p)),
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        class_names: data.class_names.clone(),
        classes,
        n_features: data.dim(),
        fitted,
    })
}

pub const MODEL_FORMAT: &str = "item-align-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Classes present in the training labels.
    pub fn seen_classes(&self) -> &[usize] {
        &self.classes
    }

    /// Full-batch training loss per iteration, for models that record it.
    pub fn loss_history(&self) -> Option<&[f64]> {
        match &self.fitted {
            Fitted::Softmax(m) => Some(&m.loss_history),
            Fitted::Boosting(m) => Some(&m.loss_history),
            Fitted::Mlp(m) => Some(&m.loss_history),
            _ => None,
        }
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Result<PredictionSet> {
        if features.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: features.ncols(),
            });
        }
        let n = features.nrows();
        let m = self.classes.len();
        let (probs, scores) = match &self.fitted {
            Fitted::Constant => (Some(DMatrix::from_element(n, 1, 1.0)), None),
            Fitted::Softmax(model) => (Some(model.predict_proba(features)), None),
            Fitted::Svm(model) => (None, Some(model.decision(features))),
            Fitted::NaiveBayes(model) => (Some(model.predict_proba(features)), None),
            Fitted::Forest(model) => (Some(model.predict_proba(features, m)), None),
            Fitted::Boosting(model) => (Some(model.predict_proba(features)), None),
            Fitted::Mlp(model) => (Some(model.predict_proba(features)), None),
            Fitted::Knn(model) => (Some(model.predict_proba(features, m)), None),
        };
        let k = self.class_names.len();
        let expand = |row: &[f64]| {
            let mut full = vec![0.0; k];
            for (c, &v) in row.iter().enumerate() {
                full[self.classes[c]] = v;
            }
            full
        };
        let rows_of = |mat: &DMatrix<f64>| -> Vec<Vec<f64>> {
            mat.row_iter()
                .map(|r| expand(&r.iter().cloned().collect::<Vec<_>>()))
                .collect()
        };
        match (probs, scores) {
            (Some(p), _) => {
                let rows = rows_of(&p);
                let labels = rows.iter().map(|r| argmax(r)).collect();
                Ok(PredictionSet {
                    labels,
                    probabilities: Some(rows),
                })
            }
            (None, Some(s)) => {
                let labels = s
                    .row_iter()
                    .map(|r| self.classes[argmax(&r.iter().cloned().collect::<Vec<_>>())])
                    .collect();
                Ok(PredictionSet {
                    labels,
                    probabilities: None,
                })
            }
            (None, None) => unreachable!("every model yields probabilities or scores"),
        }
    }

    /// Versioned JSON document; floats are written in shortest round-trip
    /// form, so a reloaded model predicts bit-identically.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(source: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(source).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unknown format `{}`", file.format)));
        }
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {}",
                file.version
            )));
        }
        Ok(file.model)
    }
}

pub fn predict(model: &TrainedModel, features: &DMatrix<f64>) -> Result<PredictionSet> {
    model.predict(features)
}

/// Finite-difference check of the analytic cross-entropy gradient at a
/// seeded random parameter point. Returns the maximum relative error over
/// all parameters (central differences, step 1e-5).
pub fn gradient_check(spec: &ModelSpec, data: &Dataset, seed: u64) -> Result<f64> {
    let mut classes: Vec<usize> = data.labels.clone();
    classes.sort_unstable();
    classes.dedup();
    let y: Vec<usize> = data
        .labels
        .iter()
        .map(|l| classes.binary_search(l).expect("present"))
        .collect();
    let m = classes.len().max(2);
    let x = &data.features;
    let (params, objective): (Vec<f64>, Box<dyn Fn(&[f64]) -> (f64, Vec<f64>)>) = match spec {
        ModelSpec::SoftmaxRegression(p) => {
            let l2 = p.l2;
            let theta = softmax::random_params(x.ncols(), m, seed);
            let y = y.clone();
            (
                theta,
                Box::new(move |t: &[f64]| softmax::objective_flat(x, &y, m, t, l2)),
            )
        }
        ModelSpec::Mlp(p) => {
            let hidden = p.hidden;
            let theta = mlp::random_params(x.ncols(), hidden, m, seed);
            let y = y.clone();
            (
                theta,
                Box::new(move |t: &[f64]| mlp::objective_flat(x, &y, hidden, m, t)),
            )
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "gradient check is defined for softmax_regression and mlp, not {}",
                other.kind()
            )))
        }
    };
    let (_, analytic) = objective(&params);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut theta = params.clone();
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + h;
        let plus = objective(&theta).0;
        theta[i] = orig - h;
        let minus = objective(&theta).0;
        theta[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_data() -> Dataset {
        // two 2-d blobs
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.1;
            rows.extend_from_slice(&[t, 1.0 + t * 0.5]);
            labels.push(0);
            rows.extend_from_slice(&[5.0 + t, -3.0 + t * 0.3]);
            labels.push(1);
        }
        Dataset::new(
            DMatrix::from_row_slice(40, 2, &rows),
            labels,
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(DMatrix::zeros(0, 2), vec![], vec!["a".into()]).is_err());
        assert!(Dataset::new(DMatrix::zeros(1, 2), vec![1], vec!["a".into()]).is_err());
        assert!(Dataset::new(DMatrix::from_element(1, 1, f64::NAN), vec![0], vec!["a".into()]).is_err());
    }

    #[test]
    fn single_class_is_constant() {
        let data = Dataset::new(
            DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]),
            vec![2, 2, 2],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        for (_, spec) in standard_suite() {
            let model = train(&spec, &data).unwrap();
            let p = model.predict(&DMatrix::from_row_slice(2, 1, &[-9.0, 9.0])).unwrap();
            assert_eq!(p.labels, vec![2, 2]);
        }
    }

    #[test]
    fn unseen_classes_never_predicted_and_probabilities_normalized() {
        let data = grid_data();
        for (name, spec) in standard_suite() {
            let model = train(&spec, &data).unwrap();
            let p = model.predict(data.features()).unwrap();
            assert!(p.labels.iter().all(|&l| l < 2), "{name}");
            if let Some(probs) = &p.probabilities {
                for (row, &label) in probs.iter().zip(&p.labels) {
                    let s: f64 = row.iter().sum();
                    assert!((s - 1.0).abs() < 1e-9, "{name}: sum {s}");
                    assert!(row.iter().all(|&v| v >= 0.0));
                    assert_eq!(row[2], 0.0);
                    assert_eq!(argmax(row), label, "{name}");
                }
            }
        }
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let data = grid_data();
        let model = train(&ModelSpec::Knn(KnnParams { k: 1 }), &data).unwrap();
        assert!(matches!(
            model.predict(&DMatrix::zeros(1, 3)),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn model_json_round_trip_preserves_predictions() {
        let data = grid_data();
        for (name, spec) in standard_suite() {
            let model = train(&spec, &data).unwrap();
            let back = TrainedModel::from_json(&model.to_json()).unwrap();
            assert_eq!(back, model, "{name}");
            let (a, b) = (model.predict(data.features()).unwrap(), back.predict(data.features()).unwrap());
            assert_eq!(a, b, "{name}");
        }
        assert!(TrainedModel::from_json("{\"format\":\"other\",\"version\":1}").is_err());
    }

    #[test]
    fn spec_json_uses_kind_tag() {
        let spec: ModelSpec = serde_json::from_str(r#"{"kind":"knn","k":3}"#).unwrap();
        assert_eq!(spec, ModelSpec::Knn(KnnParams { k: 3 }));
        let spec: ModelSpec = serde_json::from_str(r#"{"kind":"softmax_regression"}"#).unwrap();
        assert_eq!(spec, ModelSpec::SoftmaxRegression(SoftmaxParams::default()));
        assert!(ModelSpec::Knn(KnnParams { k: 0 }).validate().is_err());
    }

    #[test]
    fn gradient_check_rejects_other_models() {
        let data = grid_data();
        assert!(gradient_check(&ModelSpec::Knn(KnnParams::default()), &data, 0).is_err());
    }
}
