//! Artifact documents and file plumbing.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use swag::engine::LIBRARY_FORMAT_VERSION;
use swag::{DatasetMeta, DiversitySummary, FinalLibrary, PostprocessConfig, SwagLibrary};

use crate::config::RunConfigFile;
use crate::CliError;

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;
pub const SUMMARY_FORMAT_VERSION: u32 = 1;
pub const EVAL_FORMAT_VERSION: u32 = 1;

/// Content hash in the style of a git object id: SHA-256 over
/// `"blob <len>\0"` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(content_hash(&bytes))
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Where the training data came from and how it was split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: PathBuf,
    pub response_column: String,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub content_hash: String,
    pub n_train: usize,
    pub n_test: usize,
}

/// `library.json`: the search result plus what is needed to reproduce the
/// post-processing and refit the final learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArchive {
    pub format_version: u32,
    pub source: DataSource,
    pub postprocess: PostprocessConfig,
    pub library: SwagLibrary,
}

impl RunArchive {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("archive serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe =
            serde_json::from_str(text).map_err(|e| CliError::Format(e.to_string()))?;
        if probe.format_version != ARCHIVE_FORMAT_VERSION {
            return Err(CliError::Format(format!(
                "unsupported library.json format version {} (expected {ARCHIVE_FORMAT_VERSION})",
                probe.format_version
            )));
        }
        let archive: RunArchive =
            serde_json::from_str(text).map_err(|e| CliError::Format(e.to_string()))?;
        if archive.library.format_version != LIBRARY_FORMAT_VERSION {
            return Err(CliError::Format(format!(
                "unsupported library format version {}",
                archive.library.format_version
            )));
        }
        Ok(archive)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub config: InputHash,
    pub dataset: InputHash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub dimension: usize,
    pub candidates: usize,
    pub failed: usize,
    pub exhaustive: bool,
    pub q_alpha: f64,
    pub selected: usize,
    pub wall_seconds: f64,
}

/// Median-rule outcome with learners by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension_filter: Option<(usize, usize)>,
    pub chosen_dimension: usize,
    pub threshold: f64,
    pub learners: Vec<NamedLearner>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedLearner {
    pub attributes: Vec<String>,
    pub error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<i8>>,
}

impl FinalSummary {
    pub fn new(
        final_library: &FinalLibrary,
        filter: Option<(usize, usize)>,
        attribute_names: &[String],
    ) -> Self {
        FinalSummary {
            delta: final_library.delta,
            dimension_filter: filter,
            chosen_dimension: final_library.chosen_dimension,
            threshold: final_library.threshold,
            learners: final_library
                .learners
                .iter()
                .map(|l| NamedLearner {
                    attributes: l
                        .attributes
                        .indices()
                        .iter()
                        .map(|&i| attribute_names[i].clone())
                        .collect(),
                    error: l.error,
                    signs: l.signs.clone(),
                })
                .collect(),
        }
    }
}

/// What `report` prints and `summary.json` embeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(rename = "final")]
    pub final_summary: FinalSummary,
    pub diversity: DiversitySummary,
}

impl Report {
    /// One Table-style line: learner count, dimension range, Jaccard median
    /// and range, chosen dimension and threshold.
    pub fn row(&self) -> String {
        let d = &self.diversity;
        let jaccard = match (d.median_jaccard, d.jaccard_range) {
            (Some(m), Some((lo, hi))) => format!("med_J={m:.4} range_J=[{lo:.4}, {hi:.4}]"),
            _ => "med_J=- range_J=-".to_string(),
        };
        format!(
            "learners={} |s_l|={}..{} {jaccard} chosen_dimension={} threshold={}",
            d.learners,
            d.dim_range.0,
            d.dim_range.1,
            self.final_summary.chosen_dimension,
            self.final_summary.threshold
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub config: RunConfigFile,
    pub inputs: Inputs,
    pub dataset: DatasetMeta,
    pub n_train: usize,
    pub n_test: usize,
    pub steps: Vec<StepSummary>,
    pub learners_trained: usize,
    pub learner_bound: usize,
    pub s_star: Vec<String>,
    #[serde(flatten)]
    pub report: Report,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerEval {
    pub attributes: Vec<String>,
    pub training_error: f64,
    pub test_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    /// `recorded_test_split`, `recorded_training_rows` or `external`.
    pub evaluated_on: String,
    pub n_eval: usize,
    pub learners: Vec<LearnerEval>,
    pub min_error: f64,
    pub max_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_error: Option<f64>,
}
