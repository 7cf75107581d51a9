//! Learning mechanisms.
//!
//! A mechanism turns a training matrix (already restricted to a learner's
//! attributes) into a classifier. [`MechanismConfig`] covers the three
//! built-in mechanisms; other model families plug into the search by
//! implementing [`Mechanism`] and [`Classifier`].

mod knn;
pub mod logistic;
mod standardize;
pub mod svm;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetView;
use crate::engine::LearnerSpec;

pub use knn::KnnModel;
pub use standardize::Standardizer;

/// Weights with magnitude below this read as sign 0.
pub const SIGN_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("training split is empty")]
    EmptyTraining,
    #[error("training split contains a single class")]
    DegenerateTraining,
    #[error("mechanism supports binary responses only (got {0} classes)")]
    Multiclass(usize),
    #[error("expected {expected} columns, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid mechanism parameter `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

fn default_logistic_lambda() -> f64 {
    0.01
}
fn default_max_iters() -> usize {
    500
}
fn default_tol() -> f64 {
    1e-6
}
fn default_svm_lambda() -> f64 {
    0.01
}
fn default_epochs() -> usize {
    200
}
fn default_k_neighbors() -> usize {
    5
}

/// Built-in mechanisms and their hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismConfig {
    Logistic {
        #[serde(default = "default_logistic_lambda")]
        lambda: f64,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    LinearSvm {
        #[serde(default = "default_svm_lambda")]
        lambda: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
    },
    Knn {
        #[serde(default = "default_k_neighbors")]
        k_neighbors: usize,
    },
}

impl Default for MechanismConfig {
    fn default() -> Self {
        Self::logistic()
    }
}

impl MechanismConfig {
    pub fn logistic() -> Self {
        MechanismConfig::Logistic {
            lambda: default_logistic_lambda(),
            max_iters: default_max_iters(),
            tol: default_tol(),
        }
    }

    pub fn linear_svm() -> Self {
        MechanismConfig::LinearSvm {
            lambda: default_svm_lambda(),
            epochs: default_epochs(),
        }
    }

    pub fn knn(k_neighbors: usize) -> Self {
        MechanismConfig::Knn { k_neighbors }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MechanismConfig::Logistic { .. } => "logistic",
            MechanismConfig::LinearSvm { .. } => "linear_svm",
            MechanismConfig::Knn { .. } => "knn",
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |field, reason: String| Err(LearnerError::InvalidConfig { field, reason });
        match *self {
            MechanismConfig::Logistic {
                lambda,
                max_iters,
                tol,
            } => {
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return bad("lambda", format!("must be finite and >= 0, got {lambda}"));
                }
                if max_iters == 0 {
                    return bad("max_iters", "must be >= 1".into());
                }
                if !(tol.is_finite() && tol > 0.0) {
                    return bad("tol", format!("must be finite and > 0, got {tol}"));
                }
            }
            MechanismConfig::LinearSvm { lambda, epochs } => {
                // the 1/(lambda t) schedule needs a strictly positive lambda
                if !(lambda.is_finite() && lambda > 0.0) {
                    return bad("lambda", format!("must be finite and > 0, got {lambda}"));
                }
                if epochs == 0 {
                    return bad("epochs", "must be >= 1".into());
                }
            }
            MechanismConfig::Knn { k_neighbors } => {
                if k_neighbors == 0 {
                    return bad("k_neighbors", "must be >= 1".into());
                }
            }
        }
        Ok(())
    }

    /// Whether fitted models carry linear coefficients.
    pub fn is_linear(&self) -> bool {
        !matches!(self, MechanismConfig::Knn { .. })
    }
}

/// A learning mechanism.
///
/// `x` holds only the learner's attribute columns; `y` holds class codes in
/// `0..n_classes`. Implementations must be deterministic.
pub trait Mechanism: Sync {
    type Model: Classifier;

    fn fit(
        &self,
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
    ) -> Result<Self::Model, LearnerError>;
}

pub trait Classifier: Send + Sync {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>, LearnerError>;

    /// Per-attribute weights, for mechanisms that have them.
    fn coefficients(&self) -> Option<&[f64]> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Logistic,
    LinearSvm,
}

/// Affine classifier on standardized inputs. Class code 1 is the positive
/// side; a score of exactly 0 goes to class code 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn score_row(&self, z: &[f64]) -> f64 {
        z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Linear(LinearModel),
    Knn(KnnModel),
}

impl ModelParams {
    fn width(&self) -> usize {
        match self {
            ModelParams::Linear(m) => m.standardizer.width(),
            ModelParams::Knn(m) => m.standardizer.width(),
        }
    }
}

impl Classifier for ModelParams {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>, LearnerError> {
        if x.ncols() != self.width() {
            return Err(LearnerError::WidthMismatch {
                expected: self.width(),
                got: x.ncols(),
            });
        }
        Ok(match self {
            ModelParams::Linear(m) => {
                let mut z = vec![0.0; m.weights.len()];
                x.rows()
                    .into_iter()
                    .map(|row| {
                        m.standardizer.transform_row(row, &mut z);
                        usize::from(m.score_row(&z) > 0.0)
                    })
                    .collect()
            }
            ModelParams::Knn(m) => m.predict(x),
        })
    }

    fn coefficients(&self) -> Option<&[f64]> {
        match self {
            ModelParams::Linear(m) => Some(&m.weights),
            ModelParams::Knn(_) => None,
        }
    }
}

fn signed_targets(y: &[usize], n_classes: usize) -> Result<Vec<f64>, LearnerError> {
    if n_classes != 2 {
        return Err(LearnerError::Multiclass(n_classes));
    }
    let positives = y.iter().filter(|&&c| c == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(LearnerError::DegenerateTraining);
    }
    Ok(y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect())
}

impl Mechanism for MechanismConfig {
    type Model = ModelParams;

    fn fit(
        &self,
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
    ) -> Result<ModelParams, LearnerError> {
        if x.nrows() == 0 || y.is_empty() {
            return Err(LearnerError::EmptyTraining);
        }
        match *self {
            MechanismConfig::Logistic {
                lambda,
                max_iters,
                tol,
            } => {
                let targets = signed_targets(y, n_classes)?;
                let standardizer = Standardizer::fit(x);
                let z = standardizer.transform(x);
                let (weights, intercept) =
                    logistic::train(z.view(), &targets, lambda, max_iters, tol);
                Ok(ModelParams::Linear(LinearModel {
                    kind: LinearKind::Logistic,
                    standardizer,
                    weights,
                    intercept,
                }))
            }
            MechanismConfig::LinearSvm { lambda, epochs } => {
                let targets = signed_targets(y, n_classes)?;
                let standardizer = Standardizer::fit(x);
                let z = standardizer.transform(x);
                let (weights, intercept) = svm::train(z.view(), &targets, lambda, epochs);
                Ok(ModelParams::Linear(LinearModel {
                    kind: LinearKind::LinearSvm,
                    standardizer,
                    weights,
                    intercept,
                }))
            }
            MechanismConfig::Knn { k_neighbors } => Ok(ModelParams::Knn(KnnModel::fit(
                x,
                y,
                n_classes,
                k_neighbors,
            ))),
        }
    }
}

/// A classifier trained on one learner spec.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: LearnerSpec,
    pub params: ModelParams,
}

/// Trains `config` on a column view.
pub fn fit(config: &MechanismConfig, train: &DatasetView<'_>) -> Result<FittedModel, LearnerError> {
    let params = config.fit(train.features(), train.labels(), train.n_classes())?;
    Ok(FittedModel {
        spec: train.spec().clone(),
        params,
    })
}

impl FittedModel {
    /// Predicts class codes for rows already restricted to `self.spec`.
    pub fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<usize>, LearnerError> {
        self.params.predict(rows)
    }

    pub fn coefficient_signs(&self) -> Option<Vec<i8>> {
        self.params.coefficients().map(signs)
    }
}

pub fn sign_of(w: f64) -> i8 {
    if w.abs() < SIGN_EPSILON {
        0
    } else if w > 0.0 {
        1
    } else {
        -1
    }
}

pub fn signs(weights: &[f64]) -> Vec<i8> {
    weights.iter().map(|&w| sign_of(w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use ndarray::{array, Array2};

    fn linear(weights: Vec<f64>, intercept: f64) -> FittedModel {
        let d = weights.len();
        FittedModel {
            spec: LearnerSpec::new((0..d).collect()).unwrap(),
            params: ModelParams::Linear(LinearModel {
                kind: LinearKind::Logistic,
                standardizer: Standardizer {
                    mean: vec![0.0; d],
                    scale: vec![1.0; d],
                },
                weights,
                intercept,
            }),
        }
    }

    fn one_d(xs: &[f64], labels: &[&str]) -> Dataset {
        let x = Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).unwrap();
        Dataset::new(x, labels, vec!["x".into()]).unwrap()
    }

    fn full_view(d: &Dataset) -> DatasetView<'_> {
        d.subset_columns(&LearnerSpec::new((0..d.p()).collect()).unwrap())
            .unwrap()
    }

    #[test]
    fn one_nn_predicts_nearest_label() {
        let d = one_d(&[0.0, 1.0], &["A", "B"]);
        let model = fit(&MechanismConfig::knn(1), &full_view(&d)).unwrap();
        assert_eq!(model.predict(array![[0.1]].view()).unwrap(), vec![0]);
        // at a stored point
        assert_eq!(model.predict(array![[1.0]].view()).unwrap(), vec![1]);
        assert!(model.coefficient_signs().is_none());
    }

    #[test]
    fn knn_vote_tie_goes_to_lowest_code() {
        let d = one_d(&[0.0, 1.0], &["A", "B"]);
        let model = fit(&MechanismConfig::knn(2), &full_view(&d)).unwrap();
        assert_eq!(model.predict(array![[0.9]].view()).unwrap(), vec![0]);
        // B first-coded: tie now favours B
        let d = one_d(&[1.0, 0.0], &["B", "A"]);
        let model = fit(&MechanismConfig::knn(2), &full_view(&d)).unwrap();
        assert_eq!(model.predict(array![[0.1]].view()).unwrap(), vec![0]);
    }

    #[test]
    fn knn_distance_tie_prefers_lower_row() {
        // rows 1 (B) and 2 (A) are equidistant from 0 after standardization
        let d = one_d(&[3.0, -1.0, 1.0, -3.0], &["A", "B", "A", "B"]);
        let model = fit(&MechanismConfig::knn(1), &full_view(&d)).unwrap();
        assert_eq!(model.predict(array![[0.0]].view()).unwrap(), vec![1]);
    }

    #[test]
    fn knn_multiclass_accepted() {
        let d = one_d(&[0.0, 1.0, 2.0], &["A", "B", "C"]);
        let model = fit(&MechanismConfig::knn(1), &full_view(&d)).unwrap();
        assert_eq!(
            model.predict(array![[2.1], [0.9]].view()).unwrap(),
            vec![2, 1]
        );
    }

    #[test]
    fn linear_models_reject_multiclass_and_single_class() {
        let d = one_d(&[0.0, 1.0, 2.0], &["A", "B", "C"]);
        assert_eq!(
            fit(&MechanismConfig::logistic(), &full_view(&d)).unwrap_err(),
            LearnerError::Multiclass(3)
        );
        let d = one_d(&[0.0, 1.0, 2.0, 3.0], &["A", "B", "A", "B"]);
        let only_a = d.select_rows(&[0, 2]);
        assert_eq!(
            fit(&MechanismConfig::linear_svm(), &full_view(&only_a)).unwrap_err(),
            LearnerError::DegenerateTraining
        );
        let empty = d.select_rows(&[]);
        assert_eq!(
            fit(&MechanismConfig::knn(1), &full_view(&empty)).unwrap_err(),
            LearnerError::EmptyTraining
        );
    }

    #[test]
    fn constant_score_maps_to_positive_class() {
        let m = linear(vec![0.0, 0.0], 0.5);
        assert_eq!(
            m.predict(array![[1.0, 2.0], [-3.0, 4.0]].view()).unwrap(),
            vec![1, 1]
        );
        // exactly zero score: first-coded class
        let m = linear(vec![0.0], 0.0);
        assert_eq!(m.predict(array![[7.0]].view()).unwrap(), vec![0]);
    }

    #[test]
    fn width_mismatch() {
        let m = linear(vec![1.0, 1.0], 0.0);
        assert_eq!(
            m.predict(array![[1.0]].view()).unwrap_err(),
            LearnerError::WidthMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn sign_readout() {
        assert_eq!(
            linear(vec![2.0, -0.5], 0.0).coefficient_signs(),
            Some(vec![1, -1])
        );
        assert_eq!(
            linear(vec![0.0, 0.0], 0.0).coefficient_signs(),
            Some(vec![0, 0])
        );
        assert_eq!(signs(&[5e-13, -5e-13]), vec![0, 0]);
    }

    #[test]
    fn config_validation() {
        assert!(MechanismConfig::logistic().validate().is_ok());
        let bad = MechanismConfig::Logistic {
            lambda: -1.0,
            max_iters: 10,
            tol: 1e-6,
        };
        assert!(matches!(
            bad.validate(),
            Err(LearnerError::InvalidConfig {
                field: "lambda",
                ..
            })
        ));
        assert!(MechanismConfig::knn(0).validate().is_err());
        let svm = MechanismConfig::LinearSvm {
            lambda: 0.0,
            epochs: 10,
        };
        assert!(svm.validate().is_err());
    }

    #[test]
    fn config_serde_defaults() {
        let c: MechanismConfig = serde_json::from_str(r#"{"kind":"logistic"}"#).unwrap();
        assert_eq!(c, MechanismConfig::logistic());
        let c: MechanismConfig = serde_json::from_str(r#"{"kind":"knn","k_neighbors":1}"#).unwrap();
        assert_eq!(c, MechanismConfig::knn(1));
        assert!(serde_json::from_str::<MechanismConfig>(r#"{"kind":"knn","k":1}"#).is_err());
        assert!(serde_json::from_str::<MechanismConfig>(r#"{"kind":"forest"}"#).is_err());
    }
}
