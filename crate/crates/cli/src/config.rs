//! The run configuration file.
//!
//! A TOML document with six tables. `dataset` and `swag` are required;
//! the rest fall back to defaults.
//!
//! ```toml
//! [dataset]
//! path = "planted.csv"          # relative to the config file
//! response_column = "class"
//! test_fraction = 0.25          # optional, in [0, 1); default 0
//! split_seed = 7                # optional; default 0
//!
//! [swag]
//! p_max = 4
//! m = 300
//! alpha = 0.05
//! r = 10                        # optional; default 10
//! k = 10                        # optional; default 10
//! seed = 1                      # optional; default 0
//! max_generation_attempts_factor = 100   # optional
//!
//! [mechanism]                   # optional; default logistic
//! kind = "knn"                  # logistic | linear_svm | knn
//! k_neighbors = 1
//!
//! [loss]                        # optional; default misclassification
//! kind = "cost_matrix"
//! classes = ["neg", "pos"]
//! cost = [[0.0, 1.0], [5.0, 0.0]]
//!
//! [postprocess]                 # optional
//! delta = 0.01
//! dimension_filter = [2, 4]
//!
//! [output]                      # optional
//! directory = "out"             # relative to the config file; default "swag-out"
//! formats = ["json", "dot", "csv"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swag::{LossSpec, MechanismConfig, PostprocessConfig, SwagConfig, SwagError};

use crate::CliError;

fn default_r() -> usize {
    10
}

fn default_k() -> usize {
    10
}

fn default_attempts_factor() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    pub response_column: String,
    #[serde(default)]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwagSection {
    pub p_max: usize,
    pub m: usize,
    pub alpha: f64,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_attempts_factor")]
    pub max_generation_attempts_factor: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Dot,
    Csv,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Dot, Format::Csv]
}

fn default_directory() -> PathBuf {
    PathBuf::from("swag-out")
}

/// `library.json` and `summary.json` are always written; `formats` adds
/// `network.json` (json), `network.dot` (dot) and `final.csv` (csv).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: default_directory(),
            formats: all_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub dataset: DatasetSection,
    pub swag: SwagSection,
    #[serde(default)]
    pub mechanism: MechanismConfig,
    #[serde(default)]
    pub loss: LossSpec,
    #[serde(default)]
    pub postprocess: PostprocessConfig,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfigFile {
    /// Parses and validates everything that does not need the data.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        let config: RunConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            CliError::Config {
                field: (field != ".").then_some(field),
                message: e.into_inner().message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn swag_config(&self) -> SwagConfig {
        let s = &self.swag;
        SwagConfig {
            p_max: s.p_max,
            m: s.m,
            alpha: s.alpha,
            repetitions: s.r,
            folds: s.k,
            seed: s.seed,
            max_generation_attempts_factor: s.max_generation_attempts_factor,
            mechanism: self.mechanism.clone(),
            loss: self.loss.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let tf = self.dataset.test_fraction;
        if !(0.0..1.0).contains(&tf) {
            return Err(CliError::field(
                "dataset.test_fraction",
                format!("must lie in [0, 1), got {tf}"),
            ));
        }
        if self.dataset.response_column.trim().is_empty() {
            return Err(CliError::field(
                "dataset.response_column",
                "must not be empty",
            ));
        }
        self.swag_config().validate().map_err(swag_error)?;
        self.postprocess.validate().map_err(|e| {
            let field = match e {
                swag::postprocess::PostprocessError::InvalidFilter { .. } => {
                    "postprocess.dimension_filter"
                }
                _ => "postprocess.delta",
            };
            CliError::field(field, e.to_string())
        })?;
        if self.output.formats.is_empty() {
            return Err(CliError::field(
                "output.formats",
                "must list at least one format",
            ));
        }
        Ok(())
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}

/// Maps engine errors onto config-file field paths.
pub(crate) fn swag_error(e: SwagError) -> CliError {
    match e {
        SwagError::Config { field, reason } => {
            let field = if field.starts_with("mechanism") || field.starts_with("loss") {
                field
            } else {
                format!("swag.{field}")
            };
            CliError::Config {
                field: Some(field),
                message: reason,
            }
        }
        other => CliError::Pipeline(other.to_string()),
    }
}

/// Resolves `path` against the directory holding the config file.
pub(crate) fn relative_to(config_path: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    config_path
        .parent()
        .map(|dir| dir.join(path))
        .unwrap_or_else(|| path.to_path_buf())
}
