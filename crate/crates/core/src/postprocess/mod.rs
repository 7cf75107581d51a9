//! Post-processing of a search: the median rule, diversity statistics and
//! the attribute network.

mod diversity;
mod network;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{alpha_quantile, EvaluatedLearner, SwagLibrary};

pub use diversity::{diversity_summary, jaccard, DiversitySummary};
pub use network::{
    build_network, AttributeNetwork, NetworkEdge, NetworkNode, NetworkReadError,
    NETWORK_FORMAT_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PostprocessError {
    #[error("library has no evaluated learners")]
    EmptyLibrary,
    #[error("no learners within dimensions {min}..={max} at or below the threshold")]
    EmptySelection { min: usize, max: usize },
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("invalid dimension filter {min}..={max}")]
    InvalidFilter { min: usize, max: usize },
}

fn default_delta() -> f64 {
    0.01
}

/// Inclusive range of learner dimensions kept in the final library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct DimensionFilter {
    pub min: usize,
    pub max: usize,
}

impl From<(usize, usize)> for DimensionFilter {
    fn from((min, max): (usize, usize)) -> Self {
        DimensionFilter { min, max }
    }
}

impl From<DimensionFilter> for (usize, usize) {
    fn from(f: DimensionFilter) -> Self {
        (f.min, f.max)
    }
}

impl DimensionFilter {
    pub fn contains(&self, dimension: usize) -> bool {
        (self.min..=self.max).contains(&dimension)
    }
}

impl std::str::FromStr for DimensionFilter {
    type Err = String;

    /// Accepts `a..b`, `a..=b` (both inclusive) or a single `a`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad dimension `{t}` in `{s}`"))
        };
        let (min, max) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let d = parse(s)?;
                (d, d)
            }
        };
        if min == 0 || min > max {
            return Err(format!("empty dimension range `{s}`"));
        }
        Ok(DimensionFilter { min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocessConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension_filter: Option<DimensionFilter>,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            delta: default_delta(),
            dimension_filter: None,
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<(), PostprocessError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(PostprocessError::InvalidDelta(self.delta));
        }
        if let Some(f) = self.dimension_filter {
            if f.min == 0 || f.min > f.max {
                return Err(PostprocessError::InvalidFilter {
                    min: f.min,
                    max: f.max,
                });
            }
        }
        Ok(())
    }
}

/// Learners kept by the median rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalLibrary {
    pub delta: f64,
    /// Dimension whose full candidate error vector has the lowest median.
    pub chosen_dimension: usize,
    /// δ-quantile of that dimension's errors.
    pub threshold: f64,
    /// Ordered by dimension, then by candidate order within the step.
    pub learners: Vec<EvaluatedLearner>,
}

fn lower_median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    sorted[(sorted.len() - 1) / 2]
}

/// Keeps every candidate, at any dimension, whose error is at or below the
/// δ-quantile of the dimension with the lowest median error.
pub fn median_rule(library: &SwagLibrary, delta: f64) -> Result<FinalLibrary, PostprocessError> {
    median_rule_filtered(library, delta, None)
}

/// [`median_rule`] restricted to learners whose dimension passes `filter`.
/// The threshold itself is computed over all dimensions.
pub fn median_rule_filtered(
    library: &SwagLibrary,
    delta: f64,
    filter: Option<DimensionFilter>,
) -> Result<FinalLibrary, PostprocessError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PostprocessError::InvalidDelta(delta));
    }
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for step in library.steps.iter().filter(|s| !s.candidates.is_empty()) {
        let errors = step.errors();
        let median = lower_median(&errors);
        // strict < keeps the smaller dimension on ties
        if best.as_ref().is_none_or(|(m, _, _)| median < *m) {
            best = Some((median, step.dimension, errors));
        }
    }
    let (_, chosen_dimension, errors) = best.ok_or(PostprocessError::EmptyLibrary)?;
    let threshold = alpha_quantile(&errors, delta).expect("non-empty errors");
    let learners: Vec<EvaluatedLearner> = library
        .steps
        .iter()
        .filter(|s| filter.is_none_or(|f| f.contains(s.dimension)))
        .flat_map(|s| {
            s.candidates
                .iter()
                .filter(|c| c.error <= threshold)
                .cloned()
        })
        .collect();
    if learners.is_empty() {
        let f = filter.unwrap_or(DimensionFilter {
            min: 1,
            max: usize::MAX,
        });
        return Err(PostprocessError::EmptySelection {
            min: f.min,
            max: f.max,
        });
    }
    Ok(FinalLibrary {
        delta,
        chosen_dimension,
        threshold,
        learners,
    })
}

pub const FINAL_TABLE_FORMAT_VERSION: u32 = 1;

/// One row per final learner: format version, dimension, attribute names
/// joined by `;`, error and coefficient signs (empty for non-linear models).
pub fn final_table_csv(final_library: &FinalLibrary, attribute_names: &[String]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "format_version",
            "dimension",
            "attributes",
            "error",
            "signs",
        ])
        .expect("in-memory write");
    for learner in &final_library.learners {
        let names: Vec<&str> = learner
            .attributes
            .indices()
            .iter()
            .map(|&i| attribute_names[i].as_str())
            .collect();
        let signs = learner
            .signs
            .as_ref()
            .map(|s| s.iter().map(i8::to_string).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        writer
            .write_record([
                FINAL_TABLE_FORMAT_VERSION.to_string(),
                learner.attributes.len().to_string(),
                names.join(";"),
                learner.error.to_string(),
                signs,
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{LearnerSpec, StepResult, SwagConfig, LIBRARY_FORMAT_VERSION};

    pub(crate) fn library_from_errors(steps: &[&[f64]]) -> SwagLibrary {
        let steps = steps
            .iter()
            .enumerate()
            .map(|(i, errs)| {
                let dimension = i + 1;
                let candidates: Vec<EvaluatedLearner> = errs
                    .iter()
                    .enumerate()
                    .map(|(j, &e)| EvaluatedLearner {
                        attributes: LearnerSpec::new((j..j + dimension).collect()).unwrap(),
                        error: e,
                        signs: None,
                    })
                    .collect();
                StepResult {
                    dimension,
                    exhaustive: true,
                    failed: 0,
                    q_alpha: f64::INFINITY,
                    selected: candidates.clone(),
                    candidates,
                }
            })
            .collect();
        SwagLibrary {
            format_version: LIBRARY_FORMAT_VERSION,
            config: SwagConfig::new(2, 10, 0.5),
            attribute_names: (0..10).map(|i| format!("x{i}")).collect(),
            class_labels: vec!["A".into(), "B".into()],
            s_star: vec![],
            learners_trained: 0,
            steps,
        }
    }

    #[test]
    fn lowest_median_dimension_wins() {
        let lib = library_from_errors(&[&[0.3, 0.4, 0.5], &[0.1, 0.2, 0.6]]);
        let fin = median_rule(&lib, 0.01).unwrap();
        assert_eq!(fin.chosen_dimension, 2);
        assert_eq!(fin.threshold, 0.1);
        assert_eq!(fin.learners.len(), 1);
        assert_eq!(fin.learners[0].error, 0.1);
    }

    #[test]
    fn single_step_library() {
        let lib = library_from_errors(&[&[0.3, 0.2]]);
        let fin = median_rule(&lib, 0.01).unwrap();
        assert_eq!(fin.chosen_dimension, 1);
        assert!(!fin.learners.is_empty());
    }

    #[test]
    fn median_ties_prefer_smaller_dimension() {
        let lib = library_from_errors(&[&[0.2, 0.4], &[0.2, 0.1, 0.9]]);
        // lower medians: 0.2 and 0.2
        assert_eq!(median_rule(&lib, 0.5).unwrap().chosen_dimension, 1);
    }

    #[test]
    fn threshold_applies_across_dimensions() {
        let lib = library_from_errors(&[&[0.05, 0.5, 0.6], &[0.1, 0.2, 0.3]]);
        let fin = median_rule(&lib, 0.01).unwrap();
        assert_eq!(fin.chosen_dimension, 2);
        let dims: Vec<usize> = fin.learners.iter().map(|l| l.attributes.len()).collect();
        assert_eq!(dims, vec![1, 2]);
    }

    #[test]
    fn dimension_filter_and_empty_selection() {
        let lib = library_from_errors(&[&[0.05, 0.5, 0.6], &[0.1, 0.2, 0.3]]);
        let fin =
            median_rule_filtered(&lib, 0.01, Some(DimensionFilter { min: 2, max: 2 })).unwrap();
        assert_eq!(fin.learners.len(), 1);
        assert_eq!(
            median_rule_filtered(&lib, 0.01, Some(DimensionFilter { min: 3, max: 5 })).unwrap_err(),
            PostprocessError::EmptySelection { min: 3, max: 5 }
        );
    }

    #[test]
    fn empty_library_and_bad_delta() {
        let lib = library_from_errors(&[]);
        assert_eq!(
            median_rule(&lib, 0.01).unwrap_err(),
            PostprocessError::EmptyLibrary
        );
        let lib = library_from_errors(&[&[0.1]]);
        assert_eq!(
            median_rule(&lib, 1.0).unwrap_err(),
            PostprocessError::InvalidDelta(1.0)
        );
    }

    #[test]
    fn filter_parsing() {
        assert_eq!(
            "2..4".parse::<DimensionFilter>().unwrap(),
            DimensionFilter { min: 2, max: 4 }
        );
        assert_eq!(
            "2..=4".parse::<DimensionFilter>().unwrap(),
            DimensionFilter { min: 2, max: 4 }
        );
        assert_eq!(
            "3".parse::<DimensionFilter>().unwrap(),
            DimensionFilter { min: 3, max: 3 }
        );
        assert!("4..2".parse::<DimensionFilter>().is_err());
        assert!("x".parse::<DimensionFilter>().is_err());
    }

    #[test]
    fn final_table_rows() {
        let lib = library_from_errors(&[&[0.3, 0.4, 0.5], &[0.1, 0.2, 0.6]]);
        let fin = median_rule(&lib, 0.01).unwrap();
        let csv = final_table_csv(&fin, &lib.attribute_names);
        assert_eq!(
            csv,
            "format_version,dimension,attributes,error,signs\n1,2,x0;x1,0.1,\n"
        );
    }
}
