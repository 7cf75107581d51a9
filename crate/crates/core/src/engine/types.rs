use std::fmt;

use serde::{Deserialize, Serialize};

use super::SwagConfig;

/// Attribute indices of one candidate learner: non-empty, strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LearnerSpec(Vec<usize>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid learner spec {0:?}: indices must be non-empty and distinct")]
pub struct InvalidSpec(pub Vec<usize>);

impl LearnerSpec {
    /// Sorts the indices; rejects empty or repeated indices.
    pub fn new(mut indices: Vec<usize>) -> Result<Self, InvalidSpec> {
        indices.sort_unstable();
        if indices.is_empty() || indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(InvalidSpec(indices));
        }
        Ok(LearnerSpec(indices))
    }

    pub fn single(index: usize) -> Self {
        LearnerSpec(vec![index])
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// This spec plus one attribute not already in it.
    pub fn extended(&self, index: usize) -> Option<Self> {
        match self.0.binary_search(&index) {
            Ok(_) => None,
            Err(pos) => {
                let mut v = self.0.clone();
                v.insert(pos, index);
                Some(LearnerSpec(v))
            }
        }
    }
}

impl TryFrom<Vec<usize>> for LearnerSpec {
    type Error = InvalidSpec;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        LearnerSpec::new(v)
    }
}

impl From<LearnerSpec> for Vec<usize> {
    fn from(s: LearnerSpec) -> Self {
        s.0
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// A candidate with its cross-validated training error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedLearner {
    pub attributes: LearnerSpec,
    pub error: f64,
    /// Sign of each attribute's mean coefficient over the CV fits (linear
    /// mechanisms only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<i8>>,
}

/// Outcome of screening at one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub dimension: usize,
    /// True when every subset of the screened attributes was evaluated.
    pub exhaustive: bool,
    /// Candidates whose fits failed; they are excluded from `candidates`.
    pub failed: usize,
    pub q_alpha: f64,
    pub candidates: Vec<EvaluatedLearner>,
    pub selected: Vec<EvaluatedLearner>,
}

impl StepResult {
    pub fn errors(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.error).collect()
    }

    /// Learners built at this step, failed ones included.
    pub fn attempted(&self) -> usize {
        self.candidates.len() + self.failed
    }
}

pub const LIBRARY_FORMAT_VERSION: u32 = 1;

/// Every step of a search plus the screened attribute set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwagLibrary {
    pub format_version: u32,
    pub config: SwagConfig,
    pub attribute_names: Vec<String>,
    pub class_labels: Vec<String>,
    pub s_star: Vec<usize>,
    pub learners_trained: usize,
    pub steps: Vec<StepResult>,
}

#[derive(Debug, thiserror::Error)]
pub enum LibraryReadError {
    #[error("library json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported library format version {0} (expected {LIBRARY_FORMAT_VERSION})")]
    Version(u32),
}

impl SwagLibrary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("library serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LibraryReadError> {
        let lib: SwagLibrary = serde_json::from_str(text)?;
        if lib.format_version != LIBRARY_FORMAT_VERSION {
            return Err(LibraryReadError::Version(lib.format_version));
        }
        Ok(lib)
    }

    /// Upper bound on learners built: p + m (p_max - 1).
    pub fn learner_bound(&self) -> usize {
        self.attribute_names.len() + self.config.m * self.config.p_max.saturating_sub(1)
    }

    pub fn step(&self, dimension: usize) -> Option<&StepResult> {
        self.steps.iter().find(|s| s.dimension == dimension)
    }
}
