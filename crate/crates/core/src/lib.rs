//! Sparse wrapper search for libraries of strong low-dimensional classifiers.
//!
//! Given a classification dataset and a learning mechanism, the search
//! screens single attributes by cross-validated error, then grows learners
//! one attribute at a time from the survivors, keeping at each dimension the
//! learners whose error sits at or below an α-quantile. The result is a
//! library of small, comparably accurate learners that can be reduced with
//! the median rule and summarized as Jaccard diversity statistics and an
//! attribute co-occurrence network.
//!
//! ```no_run
//! use swag::{postprocess, Dataset, SwagConfig};
//!
//! let data = Dataset::load_csv("data.csv", "label").unwrap();
//! let mut config = SwagConfig::new(4, 300, 0.05);
//! config.repetitions = 5;
//! config.folds = 5;
//! let library = swag::run_swag(&data, &config).unwrap();
//! let final_library = postprocess::median_rule(&library, 0.01).unwrap();
//! let net = postprocess::build_network(&final_library, data.attribute_names());
//! println!("{}", net.to_dot());
//! ```

pub mod crossval;
pub mod dataset;
pub mod engine;
pub mod learners;
pub mod postprocess;
pub mod seed;
pub mod synthetic;

pub use crossval::{cv_error, CvError, CvProtocol, LossSpec};
pub use dataset::{Dataset, DatasetError, DatasetMeta, FoldAssignment};
pub use engine::{
    alpha_quantile, first_screen, general_screen, generate_candidates, run_swag, run_swag_with,
    EvaluatedLearner, LearnerSpec, RunOptions, StepEvent, StepResult, SwagConfig, SwagError,
    SwagLibrary,
};
pub use learners::{Classifier, FittedModel, LearnerError, Mechanism, MechanismConfig};
pub use postprocess::{AttributeNetwork, DiversitySummary, FinalLibrary, PostprocessConfig};
