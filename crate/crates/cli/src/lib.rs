//! Command-line pipeline: run a search from a config file, report on a saved
//! library and evaluate its final learners on held-out data.

pub mod artifacts;
pub mod config;

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use ndarray::Axis;
use serde_json::json;
use swag::crossval::loss;
use swag::dataset::DatasetError;
use swag::engine::LearnerSpec;
use swag::postprocess::{self, DimensionFilter, PostprocessError};
use swag::{learners, seed, Dataset, FinalLibrary, RunOptions, StepEvent, SwagLibrary};
use thiserror::Error;

use artifacts::{
    content_hash, hash_file, write_atomic, DataSource, EvalReport, FinalSummary, InputHash, Inputs,
    LearnerEval, Report, RunArchive, StepSummary, Summary, ARCHIVE_FORMAT_VERSION,
    EVAL_FORMAT_VERSION, SUMMARY_FORMAT_VERSION,
};
use config::{relative_to, swag_error, Format, RunConfigFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration{}: {message}", field.as_ref().map(|f| format!(" `{f}`")).unwrap_or_default())]
    Config {
        field: Option<String>,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{message}")]
    Data {
        field: Option<String>,
        message: String,
    },
    #[error("unreadable artifact: {0}")]
    Format(String),
    #[error("{0}")]
    Pipeline(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub(crate) fn field(field: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            field: Some(field.to_string()),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Data { .. } => "data",
            CliError::Format(_) => "format",
            CliError::Pipeline(_) => "pipeline",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn field_name(&self) -> Option<&str> {
        match self {
            CliError::Config { field, .. } | CliError::Data { field, .. } => field.as_deref(),
            _ => None,
        }
    }

    /// Machine-readable form written to standard error.
    pub fn report(&self) -> serde_json::Value {
        let mut error = json!({ "kind": self.kind(), "message": self.to_string() });
        if let Some(field) = self.field_name() {
            error["field"] = json!(field);
        }
        if let CliError::Io { path, .. } = self {
            error["path"] = json!(path);
        }
        json!({ "error": error })
    }
}

fn postprocess_error(e: PostprocessError) -> CliError {
    CliError::Pipeline(e.to_string())
}

fn dataset_error(e: DatasetError, path: &Path) -> CliError {
    let field = match e {
        DatasetError::MissingResponseColumn(_) => "dataset.response_column",
        _ => "dataset.path",
    };
    CliError::Data {
        field: Some(field.to_string()),
        message: format!("{}: {e}", path.display()),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "swag",
    version,
    about = "Sparse wrapper search for strong low-dimensional classifiers"
)]
pub struct Cli {
    /// Worker threads for candidate evaluation (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Suppress progress lines and warnings on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the search described by a config file and write its artifacts.
    Run {
        config: PathBuf,
        /// Overrides `output.directory` from the config.
        #[arg(long, value_name = "PATH")]
        output_dir: Option<PathBuf>,
    },
    /// Re-apply the median rule to a saved library and print the summary.
    Report {
        library: PathBuf,
        #[arg(long, value_name = "D")]
        delta: Option<f64>,
        /// Inclusive dimension range, `a..b`.
        #[arg(long, value_name = "a..b")]
        dims: Option<DimensionFilter>,
        /// Print JSON instead of a one-line row.
        #[arg(long)]
        json: bool,
    },
    /// Refit the final learners on the recorded training rows and report
    /// their errors on a dataset.
    Eval {
        library: PathBuf,
        data: PathBuf,
        /// Also score the mechanism trained on all attributes.
        #[arg(long)]
        baseline: bool,
    },
}

#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub workers: Option<usize>,
    pub quiet: bool,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub written: Vec<PathBuf>,
    pub summary: Summary,
}

fn split_rows(full: &Dataset, test_fraction: f64, split_seed: u64) -> (Vec<usize>, Vec<usize>) {
    if test_fraction == 0.0 {
        return ((0..full.n()).collect(), Vec::new());
    }
    full.stratified_split(test_fraction, &mut seed::rng(split_seed))
        .expect("test fraction validated")
}

fn report_for(
    library: &SwagLibrary,
    final_library: &FinalLibrary,
    filter: Option<DimensionFilter>,
) -> Report {
    Report {
        final_summary: FinalSummary::new(
            final_library,
            filter.map(Into::into),
            &library.attribute_names,
        ),
        diversity: postprocess::diversity_summary(final_library),
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Runs the configured search and writes its artifacts.
pub fn cmd_run(config_path: &Path, flags: &RunFlags) -> Result<RunOutcome, CliError> {
    let config_bytes = std::fs::read(config_path).map_err(|e| CliError::io(config_path, e))?;
    let config_text = String::from_utf8(config_bytes.clone()).map_err(|e| CliError::Config {
        field: None,
        message: e.to_string(),
    })?;
    let config = RunConfigFile::parse(&config_text)?;

    let data_path = relative_to(config_path, &config.dataset.path);
    let data_path = data_path.canonicalize().map_err(|e| CliError::Data {
        field: Some("dataset.path".into()),
        message: format!("{}: {e}", data_path.display()),
    })?;
    let full = Dataset::load_csv(&data_path, &config.dataset.response_column)
        .map_err(|e| dataset_error(e, &data_path))?;
    let data_hash = hash_file(&data_path)?;
    let (train_rows, test_rows) = split_rows(
        &full,
        config.dataset.test_fraction,
        config.dataset.split_seed,
    );
    let train = if test_rows.is_empty() {
        full.clone()
    } else {
        full.select_rows(&train_rows)
    };

    let swag_config = config.swag_config();
    let warnings = swag_config.validate_for(&train).map_err(swag_error)?;
    let output_dir = match &flags.output_dir {
        Some(dir) => dir.clone(),
        None => relative_to(config_path, &config.output.directory),
    };
    std::fs::create_dir_all(&output_dir).map_err(|e| CliError::io(&output_dir, e))?;
    if !flags.quiet {
        for w in &warnings {
            eprintln!("{}", json!({ "event": "warning", "message": w }));
        }
    }

    let steps = Mutex::new(Vec::new());
    let progress = |e: &StepEvent| {
        let step = StepSummary {
            dimension: e.dimension,
            candidates: e.candidates,
            failed: e.failed,
            exhaustive: e.exhaustive,
            q_alpha: e.q_alpha,
            selected: e.selected,
            wall_seconds: e.elapsed.as_secs_f64(),
        };
        if !flags.quiet {
            let mut line = serde_json::to_value(&step).expect("step serializes");
            line["event"] = json!("step");
            eprintln!("{line}");
        }
        steps.lock().expect("progress lock").push(step);
    };
    let library = swag::run_swag_with(
        &train,
        &swag_config,
        &swag_config.mechanism,
        &RunOptions {
            workers: flags.workers,
            progress: Some(&progress),
        },
    )
    .map_err(swag_error)?;

    let filter = config.postprocess.dimension_filter;
    let final_library =
        postprocess::median_rule_filtered(&library, config.postprocess.delta, filter)
            .map_err(postprocess_error)?;
    let report = report_for(&library, &final_library, filter);
    let network = postprocess::build_network(&final_library, &library.attribute_names);

    let archive = RunArchive {
        format_version: ARCHIVE_FORMAT_VERSION,
        source: DataSource {
            path: data_path.clone(),
            response_column: config.dataset.response_column.clone(),
            test_fraction: config.dataset.test_fraction,
            split_seed: config.dataset.split_seed,
            content_hash: data_hash.clone(),
            n_train: train_rows.len(),
            n_test: test_rows.len(),
        },
        postprocess: config.postprocess.clone(),
        library,
    };
    let library = &archive.library;
    let summary = Summary {
        format_version: SUMMARY_FORMAT_VERSION,
        config: config.clone(),
        inputs: Inputs {
            config: InputHash {
                path: config_path.to_path_buf(),
                content_hash: content_hash(&config_bytes),
            },
            dataset: InputHash {
                path: data_path,
                content_hash: data_hash,
            },
        },
        dataset: full.meta(),
        n_train: train_rows.len(),
        n_test: test_rows.len(),
        steps: steps.into_inner().expect("progress lock"),
        learners_trained: library.learners_trained,
        learner_bound: library.learner_bound(),
        s_star: library
            .s_star
            .iter()
            .map(|&i| library.attribute_names[i].clone())
            .collect(),
        report,
        warnings,
    };

    let mut files: Vec<(&str, String)> = vec![("library.json", archive.to_json())];
    if config.wants(Format::Csv) {
        files.push((
            "final.csv",
            postprocess::final_table_csv(&final_library, &library.attribute_names),
        ));
    }
    if config.wants(Format::Dot) {
        files.push(("network.dot", network.to_dot()));
    }
    if config.wants(Format::Json) {
        files.push(("network.json", network.to_json() + "\n"));
    }
    files.push((
        "summary.json",
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    ));
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = output_dir.join(name);
        write_atomic(&path, &contents)?;
        written.push(path);
    }
    Ok(RunOutcome {
        output_dir,
        written,
        summary,
    })
}

/// Re-applies the median rule to a saved library. Unset overrides fall back
/// to the post-processing recorded with the run.
pub fn cmd_report(
    library_path: &Path,
    delta: Option<f64>,
    dims: Option<DimensionFilter>,
) -> Result<Report, CliError> {
    let archive = RunArchive::load(library_path)?;
    let delta = delta.unwrap_or(archive.postprocess.delta);
    let filter = dims.or(archive.postprocess.dimension_filter);
    let final_library = postprocess::median_rule_filtered(&archive.library, delta, filter)
        .map_err(postprocess_error)?;
    Ok(report_for(&archive.library, &final_library, filter))
}

struct EvalSet {
    data: Dataset,
    /// Column in `data` for each library attribute index, when present.
    columns: Vec<Option<usize>>,
    /// Labels as library class codes.
    truth: Vec<usize>,
    origin: &'static str,
}

impl EvalSet {
    fn columns_for(
        &self,
        spec: &LearnerSpec,
        names: &[String],
        path: &Path,
    ) -> Result<Vec<usize>, CliError> {
        spec.indices()
            .iter()
            .map(|&i| {
                self.columns[i].ok_or_else(|| CliError::Data {
                    field: None,
                    message: format!("attribute `{}` missing from {}", names[i], path.display()),
                })
            })
            .collect()
    }
}

fn external_eval_set(
    data_path: &Path,
    response_column: &str,
    library: &SwagLibrary,
) -> Result<EvalSet, CliError> {
    let data = Dataset::load_csv(data_path, response_column).map_err(|e| CliError::Data {
        field: None,
        message: format!("{}: {e}", data_path.display()),
    })?;
    let columns = library
        .attribute_names
        .iter()
        .map(|name| data.attribute_index(name))
        .collect();
    let truth = data
        .labels()
        .iter()
        .map(|&c| {
            let label = &data.class_labels()[c];
            library
                .class_labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| CliError::Data {
                    field: None,
                    message: format!(
                        "class `{label}` in {} was not seen in training",
                        data_path.display()
                    ),
                })
        })
        .collect::<Result<_, _>>()?;
    Ok(EvalSet {
        data,
        columns,
        truth,
        origin: "external",
    })
}

/// Refits each final learner on the recorded training rows and scores it on
/// `data_path`. When that file is the training source itself, the recorded
/// test rows are used (all rows when the run had no test split).
pub fn cmd_eval(
    library_path: &Path,
    data_path: &Path,
    baseline: bool,
) -> Result<EvalReport, CliError> {
    let archive = RunArchive::load(library_path)?;
    let library = &archive.library;
    let source = &archive.source;

    let full = Dataset::load_csv(&source.path, &source.response_column)
        .map_err(|e| dataset_error(e, &source.path))?;
    if hash_file(&source.path)? != source.content_hash {
        return Err(CliError::Data {
            field: Some("dataset.path".into()),
            message: format!(
                "training data {} changed since the run",
                source.path.display()
            ),
        });
    }
    let (train_rows, test_rows) = split_rows(&full, source.test_fraction, source.split_seed);
    let train = full.select_rows(&train_rows);
    if train.attribute_names() != library.attribute_names.as_slice()
        || train.class_labels() != library.class_labels.as_slice()
    {
        return Err(CliError::Data {
            field: None,
            message: "training data does not match the library".into(),
        });
    }

    let eval = if hash_file(data_path)? == source.content_hash {
        let (rows, origin) = if test_rows.is_empty() {
            (train_rows.clone(), "recorded_training_rows")
        } else {
            (test_rows, "recorded_test_split")
        };
        let data = full.select_rows(&rows);
        EvalSet {
            columns: (0..data.p()).map(Some).collect(),
            truth: data.labels().to_vec(),
            data,
            origin,
        }
    } else {
        external_eval_set(data_path, &source.response_column, library)?
    };

    let final_library = postprocess::median_rule_filtered(
        library,
        archive.postprocess.delta,
        archive.postprocess.dimension_filter,
    )
    .map_err(postprocess_error)?;
    let loss_fn = library
        .config
        .loss
        .resolve(&library.class_labels)
        .map_err(|e| CliError::field("loss", e.to_string()))?;
    let mechanism = &library.config.mechanism;

    let score = |spec: &LearnerSpec| -> Result<(f64, f64), CliError> {
        let cols = eval.columns_for(spec, &library.attribute_names, data_path)?;
        let view = train
            .subset_columns(spec)
            .map_err(|e| CliError::Pipeline(e.to_string()))?;
        let model = learners::fit(mechanism, &view)
            .map_err(|e| CliError::Pipeline(format!("refit of {spec} failed: {e}")))?;
        let pipeline = |e: &dyn std::fmt::Display| CliError::Pipeline(e.to_string());
        let train_pred = model.predict(view.features()).map_err(|e| pipeline(&e))?;
        let rows = eval.data.features().select(Axis(1), &cols);
        let test_pred = model.predict(rows.view()).map_err(|e| pipeline(&e))?;
        Ok((
            loss(&train_pred, train.labels(), &loss_fn).map_err(|e| pipeline(&e))?,
            loss(&test_pred, &eval.truth, &loss_fn).map_err(|e| pipeline(&e))?,
        ))
    };

    let mut results = Vec::with_capacity(final_library.learners.len());
    for learner in &final_library.learners {
        let (training_error, test_error) = score(&learner.attributes)?;
        results.push(LearnerEval {
            attributes: learner
                .attributes
                .indices()
                .iter()
                .map(|&i| library.attribute_names[i].clone())
                .collect(),
            training_error,
            test_error,
        });
    }
    let baseline_error = if baseline {
        let all = LearnerSpec::new((0..library.attribute_names.len()).collect())
            .expect("library has attributes");
        Some(score(&all)?.1)
    } else {
        None
    };
    let errors = results.iter().map(|r| r.test_error);
    Ok(EvalReport {
        format_version: EVAL_FORMAT_VERSION,
        evaluated_on: eval.origin.to_string(),
        n_eval: eval.truth.len(),
        min_error: errors.clone().fold(f64::INFINITY, f64::min),
        max_error: errors.fold(f64::NEG_INFINITY, f64::max),
        learners: results,
        baseline_error,
    })
}

fn init_logging(quiet: bool) {
    let level = if quiet { "error" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn pretty(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to standard error as one JSON object.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprintln!("{}", CliError::Usage(e.render().to_string()).report());
            return 1;
        }
    };
    init_logging(cli.quiet);
    let result = match cli.command {
        Command::Run { config, output_dir } => cmd_run(
            &config,
            &RunFlags {
                workers: cli.workers,
                quiet: cli.quiet,
                output_dir,
            },
        )
        .map(|outcome| {
            if !cli.quiet {
                for path in &outcome.written {
                    eprintln!("{}", json!({ "event": "wrote", "path": path }));
                }
            }
        }),
        Command::Report {
            library,
            delta,
            dims,
            json,
        } => cmd_report(&library, delta, dims).map(|report| {
            if json {
                emit(&pretty(&report));
            } else {
                emit(&report.row());
            }
        }),
        Command::Eval {
            library,
            data,
            baseline,
        } => cmd_eval(&library, &data, baseline).map(|r| emit(&pretty(&r))),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.report());
            1
        }
    }
}
