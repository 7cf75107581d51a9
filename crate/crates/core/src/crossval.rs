//! Repeated stratified k-fold cross-validation under a pluggable loss.

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, FoldAssignment};
use crate::engine::LearnerSpec;
use crate::learners::{Classifier, LearnerError, Mechanism};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CvError {
    #[error("prediction and truth lengths differ ({predicted} vs {truth})")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("loss needs at least one instance")]
    EmptyInput,
    #[error("class code {0} outside the cost matrix")]
    LabelOutOfRange(usize),
    #[error("invalid loss: {0}")]
    InvalidLoss(String),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("fit failed at repetition {repetition}, fold {fold}: {source}")]
    Fit {
        repetition: usize,
        fold: usize,
        source: LearnerError,
    },
    #[error("prediction failed: {0}")]
    Predict(LearnerError),
}

/// Loss as written in configuration. Cost matrices are row-major with rows
/// indexed by the true class and columns by the predicted class, both in
/// the order of `classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    #[default]
    Misclassification,
    CostMatrix {
        classes: Vec<String>,
        cost: Vec<Vec<f64>>,
    },
}

impl LossSpec {
    pub fn validate(&self) -> Result<(), CvError> {
        let LossSpec::CostMatrix { classes, cost } = self else {
            return Ok(());
        };
        let c = classes.len();
        if c < 2 {
            return Err(CvError::InvalidLoss(
                "cost matrix needs at least 2 classes".into(),
            ));
        }
        let mut sorted = classes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != c {
            return Err(CvError::InvalidLoss(
                "duplicate class in cost matrix".into(),
            ));
        }
        if cost.len() != c || cost.iter().any(|row| row.len() != c) {
            return Err(CvError::InvalidLoss(format!("cost matrix must be {c}x{c}")));
        }
        for (i, row) in cost.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(CvError::InvalidLoss(format!(
                        "cost[{i}][{j}] = {v} must be finite and >= 0"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(CvError::InvalidLoss(format!("cost[{i}][{i}] must be 0")));
                }
            }
        }
        Ok(())
    }

    /// Maps the configured class order onto a dataset's class codes.
    pub fn resolve(&self, class_labels: &[String]) -> Result<Loss, CvError> {
        self.validate()?;
        match self {
            LossSpec::Misclassification => Ok(Loss::Misclassification),
            LossSpec::CostMatrix { classes, cost } => {
                if classes.len() != class_labels.len() {
                    return Err(CvError::InvalidLoss(format!(
                        "cost matrix lists {} classes, dataset has {}",
                        classes.len(),
                        class_labels.len()
                    )));
                }
                let position = |label: &String| {
                    classes.iter().position(|c| c == label).ok_or_else(|| {
                        CvError::InvalidLoss(format!("class `{label}` missing from cost matrix"))
                    })
                };
                let order: Vec<usize> = class_labels
                    .iter()
                    .map(position)
                    .collect::<Result<_, _>>()?;
                let matrix = order
                    .iter()
                    .map(|&ti| order.iter().map(|&pj| cost[ti][pj]).collect())
                    .collect();
                Ok(Loss::Cost(matrix))
            }
        }
    }
}

/// Loss bound to class codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Loss {
    Misclassification,
    /// `cost[truth][predicted]`
    Cost(Vec<Vec<f64>>),
}

impl Loss {
    fn instance(&self, truth: usize, predicted: usize) -> Result<f64, CvError> {
        match self {
            Loss::Misclassification => Ok(if truth == predicted { 0.0 } else { 1.0 }),
            Loss::Cost(m) => {
                let row = m.get(truth).ok_or(CvError::LabelOutOfRange(truth))?;
                row.get(predicted)
                    .copied()
                    .ok_or(CvError::LabelOutOfRange(predicted))
            }
        }
    }

    /// Sum of per-instance losses.
    pub fn total(&self, predicted: &[usize], truth: &[usize]) -> Result<f64, CvError> {
        if predicted.len() != truth.len() {
            return Err(CvError::LengthMismatch {
                predicted: predicted.len(),
                truth: truth.len(),
            });
        }
        let mut sum = 0.0;
        for (&p, &t) in predicted.iter().zip(truth) {
            sum += self.instance(t, p)?;
        }
        Ok(sum)
    }

    pub fn max_cost(&self) -> f64 {
        match self {
            Loss::Misclassification => 1.0,
            Loss::Cost(m) => m.iter().flatten().copied().fold(0.0, f64::max),
        }
    }
}

/// Mean per-instance loss.
pub fn loss(predicted: &[usize], truth: &[usize], spec: &Loss) -> Result<f64, CvError> {
    if truth.is_empty() && predicted.is_empty() {
        return Err(CvError::EmptyInput);
    }
    Ok(spec.total(predicted, truth)? / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvProtocol {
    pub repetitions: usize,
    pub folds: usize,
    pub seed_base: u64,
}

impl CvProtocol {
    pub fn validate(&self) -> Result<(), CvError> {
        if self.repetitions < 1 {
            return Err(CvError::InvalidProtocol("repetitions must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(CvError::InvalidProtocol("folds must be >= 2".into()));
        }
        Ok(())
    }

    pub fn repetition_seed(&self, repetition: usize) -> u64 {
        seed::derive(self.seed_base, repetition as u64)
    }
}

struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
}

/// The fold assignments of all repetitions, fixed once so every candidate
/// is scored on identical splits.
pub struct CvPlan {
    assignments: Vec<FoldAssignment>,
    splits: Vec<Vec<Split>>,
    n: usize,
}

impl CvPlan {
    pub fn new(dataset: &Dataset, protocol: &CvProtocol) -> Result<Self, CvError> {
        protocol.validate()?;
        let mut assignments = Vec::with_capacity(protocol.repetitions);
        let mut splits = Vec::with_capacity(protocol.repetitions);
        for j in 0..protocol.repetitions {
            let mut rng = seed::rng(protocol.repetition_seed(j));
            let folds = dataset.stratified_folds(protocol.folds, &mut rng)?;
            splits.push(
                (0..folds.k)
                    .map(|f| Split {
                        train: folds.training(f),
                        test: folds.held_out(f),
                    })
                    .collect(),
            );
            assignments.push(folds);
        }
        Ok(CvPlan {
            assignments,
            splits,
            n: dataset.n(),
        })
    }

    pub fn assignments(&self) -> &[FoldAssignment] {
        &self.assignments
    }

    pub fn repetitions(&self) -> usize {
        self.assignments.len()
    }
}

/// Cross-validated score of one learner.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub error: f64,
    pub repetition_errors: Vec<f64>,
    /// Mean weight vector over all fits, for mechanisms with coefficients.
    pub mean_coefficients: Option<Vec<f64>>,
}

struct FoldResult {
    loss_sum: f64,
    coefficients: Option<Vec<f64>>,
}

fn run_fold<M: Mechanism>(
    dataset: &Dataset,
    x: ndarray::ArrayView2<'_, f64>,
    mechanism: &M,
    loss: &Loss,
    split: &Split,
    repetition: usize,
    fold: usize,
) -> Result<FoldResult, CvError> {
    let labels = dataset.labels();
    let x_train = x.select(Axis(0), &split.train);
    let y_train: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    let model = mechanism
        .fit(x_train.view(), &y_train, dataset.n_classes())
        .map_err(|source| CvError::Fit {
            repetition,
            fold,
            source,
        })?;
    let x_test = x.select(Axis(0), &split.test);
    let y_test: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
    let predicted = model.predict(x_test.view()).map_err(CvError::Predict)?;
    Ok(FoldResult {
        loss_sum: loss.total(&predicted, &y_test)?,
        coefficients: model.coefficients().map(<[f64]>::to_vec),
    })
}

/// Folds are reduced in (repetition, fold) order regardless of how they were
/// computed. Each repetition pools its held-out losses over all n rows.
fn reduce(plan: &CvPlan, results: Vec<FoldResult>) -> CvOutcome {
    let mut repetition_errors = Vec::with_capacity(plan.repetitions());
    let mut coef_sum: Option<Vec<f64>> = None;
    let mut fits = 0usize;
    let mut it = results.into_iter();
    for splits in &plan.splits {
        let mut total = 0.0;
        for _ in splits {
            let fold = it.next().expect("one result per fold");
            total += fold.loss_sum;
            if let Some(c) = fold.coefficients {
                fits += 1;
                match coef_sum.as_mut() {
                    Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, v)| *a += v),
                    None => coef_sum = Some(c),
                }
            }
        }
        repetition_errors.push(total / plan.n as f64);
    }
    let error = repetition_errors.iter().sum::<f64>() / repetition_errors.len() as f64;
    CvOutcome {
        error,
        repetition_errors,
        mean_coefficients: coef_sum.map(|c| c.into_iter().map(|v| v / fits as f64).collect()),
    }
}

/// Scores `spec` on every fold of `plan`, one fold after another.
pub fn evaluate<M: Mechanism>(
    dataset: &Dataset,
    spec: &LearnerSpec,
    mechanism: &M,
    plan: &CvPlan,
    loss: &Loss,
) -> Result<CvOutcome, CvError> {
    let view = dataset.subset_columns(spec)?;
    let mut results = Vec::new();
    for (j, splits) in plan.splits.iter().enumerate() {
        for (f, split) in splits.iter().enumerate() {
            results.push(run_fold(
                dataset,
                view.features(),
                mechanism,
                loss,
                split,
                j,
                f,
            )?);
        }
    }
    Ok(reduce(plan, results))
}

/// Same as [`evaluate`] with folds fitted concurrently. Bit-identical output.
pub fn evaluate_concurrent<M: Mechanism>(
    dataset: &Dataset,
    spec: &LearnerSpec,
    mechanism: &M,
    plan: &CvPlan,
    loss: &Loss,
) -> Result<CvOutcome, CvError> {
    let view = dataset.subset_columns(spec)?;
    let items: Vec<(usize, usize, &Split)> = plan
        .splits
        .iter()
        .enumerate()
        .flat_map(|(j, s)| s.iter().enumerate().map(move |(f, split)| (j, f, split)))
        .collect();
    let results = items
        .into_par_iter()
        .map(|(j, f, split)| run_fold(dataset, view.features(), mechanism, loss, split, j, f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(reduce(plan, results))
}

/// r-repeated k-fold cross-validation error of one learner.
pub fn cv_error<M: Mechanism>(
    dataset: &Dataset,
    spec: &LearnerSpec,
    mechanism: &M,
    protocol: &CvProtocol,
    loss_spec: &LossSpec,
) -> Result<f64, CvError> {
    let loss = loss_spec.resolve(dataset.class_labels())?;
    let plan = CvPlan::new(dataset, protocol)?;
    Ok(evaluate(dataset, spec, mechanism, &plan, &loss)?.error)
}
