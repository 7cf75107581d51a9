//! The sparse wrapper search.
//!
//! Step 1 scores every single-attribute learner and keeps those at or below
//! the α-quantile of the errors; their attributes form the screened set
//! `s_star`. Each later step builds candidates of one more attribute from
//! `s_star` (all subsets when there are at most `m`, otherwise extensions of
//! the previous step's survivors), scores them and screens them the same
//! way. The loop stops at `p_max` or when `s_star` has no subsets of the
//! next size.

mod candidates;
mod quantile;
mod types;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crossval::{self, CvError, CvPlan, CvProtocol, Loss, LossSpec};
use crate::dataset::Dataset;
use crate::learners::{signs, LearnerError, Mechanism, MechanismConfig};
use crate::seed;

pub use candidates::{binomial, generate_candidates, Generated};
pub use quantile::{alpha_quantile, quantile_rank};
pub use types::{
    EvaluatedLearner, InvalidSpec, LearnerSpec, LibraryReadError, StepResult, SwagLibrary,
    LIBRARY_FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum SwagError {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("empty error vector")]
    EmptyInput,
    #[error("dimension {dimension} exceeds the {available} screened attributes")]
    ImpossibleDimension { dimension: usize, available: usize },
    #[error("no parent learners to extend at dimension {dimension}")]
    NoParents { dimension: usize },
    #[error("parent {parent} is not a dimension-{} subset of the screened attributes", .dimension - 1)]
    InvalidParent {
        dimension: usize,
        parent: LearnerSpec,
    },
    #[error("all {failed} candidates at dimension {dimension} failed; first failure: {first}")]
    AllCandidatesFailed {
        dimension: usize,
        failed: usize,
        first: CvError,
    },
    #[error(transparent)]
    Cv(#[from] CvError),
    #[error("worker pool: {0}")]
    Workers(String),
}

fn default_attempts_factor() -> usize {
    100
}

/// Search meta-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwagConfig {
    /// Largest learner dimension.
    pub p_max: usize,
    /// Maximum candidates per step from dimension 2 on.
    pub m: usize,
    /// Screening percentile in (0, 1).
    pub alpha: f64,
    /// CV repetitions.
    #[serde(rename = "r")]
    pub repetitions: usize,
    /// CV folds.
    #[serde(rename = "k")]
    pub folds: usize,
    pub seed: u64,
    #[serde(default = "default_attempts_factor")]
    pub max_generation_attempts_factor: usize,
    #[serde(default)]
    pub mechanism: MechanismConfig,
    #[serde(default)]
    pub loss: LossSpec,
}

impl SwagConfig {
    pub fn new(p_max: usize, m: usize, alpha: f64) -> Self {
        SwagConfig {
            p_max,
            m,
            alpha,
            repetitions: 10,
            folds: 10,
            seed: 0,
            max_generation_attempts_factor: default_attempts_factor(),
            mechanism: MechanismConfig::default(),
            loss: LossSpec::default(),
        }
    }

    fn invalid(field: &str, reason: impl Into<String>) -> SwagError {
        SwagError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<(), SwagError> {
        if self.p_max < 1 {
            return Err(Self::invalid("p_max", "must be >= 1"));
        }
        if self.m < 1 {
            return Err(Self::invalid("m", "must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Self::invalid(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if self.repetitions < 1 {
            return Err(Self::invalid("r", "must be >= 1"));
        }
        if self.folds < 2 {
            return Err(Self::invalid("k", "must be >= 2"));
        }
        if self.max_generation_attempts_factor < 1 {
            return Err(Self::invalid(
                "max_generation_attempts_factor",
                "must be >= 1",
            ));
        }
        self.mechanism.validate().map_err(|e| match e {
            LearnerError::InvalidConfig { field, reason } => {
                Self::invalid(&format!("mechanism.{field}"), reason)
            }
            other => Self::invalid("mechanism", other.to_string()),
        })?;
        self.loss
            .validate()
            .map_err(|e| Self::invalid("loss", e.to_string()))?;
        Ok(())
    }

    /// Full validation against a dataset. Returns non-fatal warnings.
    pub fn validate_for(&self, dataset: &Dataset) -> Result<Vec<String>, SwagError> {
        self.validate()?;
        let (n, p) = (dataset.n(), dataset.p());
        if self.p_max >= p {
            return Err(Self::invalid(
                "p_max",
                format!(
                    "must be smaller than the attribute count {p}, got {}",
                    self.p_max
                ),
            ));
        }
        if self.folds > n {
            return Err(Self::invalid(
                "k",
                format!("{} folds for {n} rows", self.folds),
            ));
        }
        self.loss
            .resolve(dataset.class_labels())
            .map_err(|e| Self::invalid("loss", e.to_string()))?;
        if self.mechanism.is_linear() && dataset.n_classes() != 2 {
            return Err(Self::invalid(
                "mechanism.kind",
                format!(
                    "{} needs a binary response, dataset has {} classes",
                    self.mechanism.kind(),
                    dataset.n_classes()
                ),
            ));
        }
        let mut warnings = Vec::new();
        if self.m < p {
            warnings.push(format!(
                "m = {} is below p = {p}; the first step still builds all {p} single-attribute learners",
                self.m
            ));
        }
        let expected_s_star = quantile_rank(p, self.alpha);
        let pairs = binomial(expected_s_star, 2);
        if (self.m as u128) < pairs {
            warnings.push(format!(
                "m = {} is below C({expected_s_star}, 2) = {pairs}; two-attribute learners will only be sampled",
                self.m
            ));
        }
        Ok(warnings)
    }

    /// CV protocol shared by every candidate at `dimension`.
    pub fn protocol_for_step(&self, dimension: usize) -> CvProtocol {
        CvProtocol {
            repetitions: self.repetitions,
            folds: self.folds,
            seed_base: seed::step_fold_seed(self.seed, dimension),
        }
    }
}

/// Summary of one finished step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent {
    pub dimension: usize,
    pub candidates: usize,
    pub failed: usize,
    pub exhaustive: bool,
    pub q_alpha: f64,
    pub selected: usize,
    pub elapsed: Duration,
}

#[derive(Default)]
pub struct RunOptions<'a> {
    /// Worker threads for candidate evaluation; `None` uses the global pool.
    pub workers: Option<usize>,
    pub progress: Option<&'a (dyn Fn(&StepEvent) + Sync)>,
}

fn is_fit_failure(e: &CvError) -> bool {
    matches!(e, CvError::Fit { .. } | CvError::Predict(_))
}

/// Scores `specs` concurrently and applies the α-quantile screen.
fn screen<M: Mechanism>(
    dataset: &Dataset,
    config: &SwagConfig,
    mechanism: &M,
    loss: &Loss,
    specs: Vec<LearnerSpec>,
    dimension: usize,
    exhaustive: bool,
) -> Result<StepResult, SwagError> {
    let plan = CvPlan::new(dataset, &config.protocol_for_step(dimension))?;
    let outcomes: Vec<_> = specs
        .par_iter()
        .map(|spec| crossval::evaluate(dataset, spec, mechanism, &plan, loss))
        .collect();

    let mut candidates = Vec::with_capacity(specs.len());
    let mut failed = 0usize;
    let mut first_failure = None;
    for (spec, outcome) in specs.into_iter().zip(outcomes) {
        match outcome {
            Ok(o) => candidates.push(EvaluatedLearner {
                attributes: spec,
                error: o.error,
                signs: o.mean_coefficients.as_deref().map(signs),
            }),
            Err(e) if is_fit_failure(&e) => {
                failed += 1;
                first_failure.get_or_insert(e);
            }
            Err(e) => return Err(e.into()),
        }
    }
    if candidates.is_empty() {
        return Err(match first_failure {
            Some(first) => SwagError::AllCandidatesFailed {
                dimension,
                failed,
                first,
            },
            None => SwagError::EmptyInput,
        });
    }
    if failed > 0 {
        log::warn!("dimension {dimension}: {failed} candidates failed to fit and were excluded");
    }
    let errors: Vec<f64> = candidates.iter().map(|c| c.error).collect();
    let q_alpha = alpha_quantile(&errors, config.alpha)?;
    let selected = candidates
        .iter()
        .filter(|c| c.error <= q_alpha)
        .cloned()
        .collect();
    Ok(StepResult {
        dimension,
        exhaustive,
        failed,
        q_alpha,
        candidates,
        selected,
    })
}

fn resolve_loss(dataset: &Dataset, config: &SwagConfig) -> Result<Loss, SwagError> {
    Ok(config.loss.resolve(dataset.class_labels())?)
}

/// Screens all single-attribute learners. Returns the step and the sorted
/// screened attribute set.
pub fn first_screen<M: Mechanism>(
    dataset: &Dataset,
    config: &SwagConfig,
    mechanism: &M,
) -> Result<(StepResult, Vec<usize>), SwagError> {
    let loss = resolve_loss(dataset, config)?;
    first_screen_with(dataset, config, mechanism, &loss)
}

fn first_screen_with<M: Mechanism>(
    dataset: &Dataset,
    config: &SwagConfig,
    mechanism: &M,
    loss: &Loss,
) -> Result<(StepResult, Vec<usize>), SwagError> {
    let specs = (0..dataset.p()).map(LearnerSpec::single).collect();
    let step = screen(dataset, config, mechanism, loss, specs, 1, true)?;
    let mut s_star: Vec<usize> = step
        .selected
        .iter()
        .flat_map(|l| l.attributes.indices().iter().copied())
        .collect();
    s_star.sort_unstable();
    s_star.dedup();
    Ok((step, s_star))
}

/// Builds and screens the candidates of one dimension >= 2.
pub fn general_screen<M: Mechanism>(
    dataset: &Dataset,
    config: &SwagConfig,
    mechanism: &M,
    s_star: &[usize],
    parents: &[LearnerSpec],
    dimension: usize,
) -> Result<StepResult, SwagError> {
    let loss = resolve_loss(dataset, config)?;
    general_screen_with(
        dataset, config, mechanism, &loss, s_star, parents, dimension,
    )
}

fn general_screen_with<M: Mechanism>(
    dataset: &Dataset,
    config: &SwagConfig,
    mechanism: &M,
    loss: &Loss,
    s_star: &[usize],
    parents: &[LearnerSpec],
    dimension: usize,
) -> Result<StepResult, SwagError> {
    if dimension < 2 {
        return Err(SwagConfig::invalid("dimension", "general steps start at 2"));
    }
    let mut rng = seed::rng(seed::step_candidate_seed(config.seed, dimension));
    let generated = generate_candidates(
        s_star,
        parents,
        dimension,
        config.m,
        config.max_generation_attempts_factor,
        &mut rng,
    )?;
    screen(
        dataset,
        config,
        mechanism,
        loss,
        generated.specs,
        dimension,
        generated.exhaustive,
    )
}

/// Runs the search with the configured mechanism on the global worker pool.
pub fn run_swag(dataset: &Dataset, config: &SwagConfig) -> Result<SwagLibrary, SwagError> {
    run_swag_with(dataset, config, &config.mechanism, &RunOptions::default())
}

/// Runs the search with an arbitrary mechanism. `config.mechanism` is only
/// echoed into the library.
pub fn run_swag_with<M: Mechanism>(
    dataset: &Dataset,
    config: &SwagConfig,
    mechanism: &M,
    options: &RunOptions<'_>,
) -> Result<SwagLibrary, SwagError> {
    for warning in config.validate_for(dataset)? {
        log::warn!("{warning}");
    }
    match options.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| SwagError::Workers(e.to_string()))?;
            pool.install(|| search(dataset, config, mechanism, options))
        }
        None => search(dataset, config, mechanism, options),
    }
}

fn search<M: Mechanism>(
    dataset: &Dataset,
    config: &SwagConfig,
    mechanism: &M,
    options: &RunOptions<'_>,
) -> Result<SwagLibrary, SwagError> {
    let loss = resolve_loss(dataset, config)?;
    let report = |step: &StepResult, started: Instant| {
        if let Some(progress) = options.progress {
            progress(&StepEvent {
                dimension: step.dimension,
                candidates: step.candidates.len(),
                failed: step.failed,
                exhaustive: step.exhaustive,
                q_alpha: step.q_alpha,
                selected: step.selected.len(),
                elapsed: started.elapsed(),
            });
        }
    };

    let started = Instant::now();
    let (first, s_star) = first_screen_with(dataset, config, mechanism, &loss)?;
    report(&first, started);
    let mut steps = vec![first];

    for dimension in 2..=config.p_max {
        let started = Instant::now();
        let parents: Vec<LearnerSpec> = steps
            .last()
            .expect("step 1 exists")
            .selected
            .iter()
            .map(|l| l.attributes.clone())
            .collect();
        let step = match general_screen_with(
            dataset, config, mechanism, &loss, &s_star, &parents, dimension,
        ) {
            Ok(step) => step,
            Err(SwagError::ImpossibleDimension { .. }) => {
                log::info!(
                    "stopping at dimension {}: only {} screened attributes",
                    dimension - 1,
                    s_star.len()
                );
                break;
            }
            Err(e) => return Err(e),
        };
        report(&step, started);
        steps.push(step);
    }

    Ok(SwagLibrary {
        format_version: LIBRARY_FORMAT_VERSION,
        config: config.clone(),
        attribute_names: dataset.attribute_names().to_vec(),
        class_labels: dataset.class_labels().to_vec(),
        s_star,
        learners_trained: steps.iter().map(StepResult::attempted).sum(),
        steps,
    })
}
