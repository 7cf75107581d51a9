use std::path::{Path, PathBuf};
use std::process::Command;

use swag::{synthetic, Dataset};
use swag_cli::artifacts::{RunArchive, Summary};
use swag_cli::{cmd_eval, cmd_report, cmd_run, CliError, RunFlags};

fn quiet() -> RunFlags {
    RunFlags {
        quiet: true,
        ..RunFlags::default()
    }
}

fn setup(dir: &Path, data: &Dataset, body: &str) -> PathBuf {
    std::fs::write(dir.join("data.csv"), data.to_csv_string("class")).unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const BASIC: &str = r#"
[dataset]
path = "data.csv"
response_column = "class"
test_fraction = 0.25
split_seed = 5

[swag]
p_max = 3
m = 20
alpha = 0.2
r = 3
k = 5
seed = 9

[output]
directory = "out"
"#;

fn basic_run(dir: &Path) -> PathBuf {
    let data = synthetic::planted(120, 15, 3, 2.0, 1).dataset;
    let cfg = setup(dir, &data, BASIC);
    cmd_run(&cfg, &quiet()).unwrap();
    dir.join("out")
}

#[test]
fn run_writes_declared_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = basic_run(dir.path());
    for name in [
        "library.json",
        "final.csv",
        "network.dot",
        "network.json",
        "summary.json",
    ] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let summary: Summary =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.learners_trained <= summary.learner_bound);
    assert_eq!((summary.n_train, summary.n_test), (90, 30));
    assert_eq!(summary.dataset.p, 15);
    assert_eq!(
        summary.steps.len(),
        RunArchive::load(&out.join("library.json"))
            .unwrap()
            .library
            .steps
            .len()
    );
    let leftovers: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(leftovers.len(), 5);
}

#[test]
fn formats_limit_optional_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic::planted(60, 8, 2, 2.0, 1).dataset;
    let cfg = setup(dir.path(), &data, &format!("{BASIC}formats = [\"dot\"]\n"));
    cmd_run(&cfg, &quiet()).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, vec!["library.json", "network.dot", "summary.json"]);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = basic_run(dir.path());
    let first = std::fs::read(out.join("library.json")).unwrap();
    cmd_run(&dir.path().join("run.toml"), &quiet()).unwrap();
    assert_eq!(first, std::fs::read(out.join("library.json")).unwrap());
}

#[test]
fn invalid_alpha_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic::planted(40, 6, 1, 2.0, 1).dataset;
    let cfg = setup(
        dir.path(),
        &data,
        &BASIC.replace("alpha = 0.2", "alpha = 1.5"),
    );
    let err = cmd_run(&cfg, &quiet()).unwrap_err();
    assert_eq!(err.field_name(), Some("swag.alpha"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn data_dependent_checks_name_fields() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic::planted(40, 3, 1, 2.0, 1).dataset;
    let cfg = setup(dir.path(), &data, BASIC);
    assert_eq!(
        cmd_run(&cfg, &quiet()).unwrap_err().field_name(),
        Some("swag.p_max")
    );
    let cfg = setup(dir.path(), &data, &BASIC.replace("\"class\"", "\"label\""));
    assert_eq!(
        cmd_run(&cfg, &quiet()).unwrap_err().field_name(),
        Some("dataset.response_column")
    );
    let cfg = setup(
        dir.path(),
        &data,
        &BASIC.replace("\"data.csv\"", "\"nope.csv\""),
    );
    assert_eq!(
        cmd_run(&cfg, &quiet()).unwrap_err().field_name(),
        Some("dataset.path")
    );
}

#[test]
fn report_matches_summary_and_grows_with_delta() {
    let dir = tempfile::tempdir().unwrap();
    let out = basic_run(dir.path());
    let summary: Summary =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let lib = out.join("library.json");
    assert_eq!(cmd_report(&lib, None, None).unwrap(), summary.report);

    let narrow = cmd_report(&lib, Some(0.01), None).unwrap().final_summary;
    let wide = cmd_report(&lib, Some(0.05), None).unwrap().final_summary;
    assert!(narrow.threshold <= wide.threshold);
    assert!(narrow.learners.iter().all(|l| wide.learners.contains(l)));
}

#[test]
fn report_dims_excluding_everything_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = basic_run(dir.path());
    let err = cmd_report(
        &out.join("library.json"),
        None,
        Some("7..9".parse().unwrap()),
    )
    .unwrap_err();
    assert!(matches!(err, CliError::Pipeline(_)));
    assert!(err
        .to_string()
        .contains("no learners within dimensions 7..=9"));
}

#[test]
fn unknown_archive_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = basic_run(dir.path());
    let path = out.join("library.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
    std::fs::write(&path, bumped).unwrap();
    let err = cmd_report(&path, None, None).unwrap_err();
    assert!(matches!(err, CliError::Format(_)), "{err}");
}

#[test]
fn eval_on_training_file_without_split_equals_training_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic::planted(80, 10, 2, 2.0, 3).dataset;
    let cfg = setup(
        dir.path(),
        &data,
        &BASIC.replace("test_fraction = 0.25", "test_fraction = 0.0"),
    );
    cmd_run(&cfg, &quiet()).unwrap();
    let report = cmd_eval(
        &dir.path().join("out/library.json"),
        &dir.path().join("data.csv"),
        false,
    )
    .unwrap();
    assert_eq!(report.evaluated_on, "recorded_training_rows");
    assert_eq!(report.n_eval, 80);
    for l in &report.learners {
        assert_eq!(l.test_error, l.training_error);
    }
}

#[test]
fn eval_on_planted_split_scores_planted_learners_well() {
    let dir = tempfile::tempdir().unwrap();
    let planted = synthetic::planted(300, 20, 3, 2.5, 12);
    let cfg = setup(dir.path(), &planted.dataset, BASIC);
    cmd_run(&cfg, &quiet()).unwrap();
    let report = cmd_eval(
        &dir.path().join("out/library.json"),
        &dir.path().join("data.csv"),
        true,
    )
    .unwrap();
    assert_eq!(report.evaluated_on, "recorded_test_split");
    // round(150 * 0.25) = 38 rows per class
    assert_eq!(report.n_eval, 76);
    let names: Vec<String> = planted
        .informative
        .iter()
        .map(|j| format!("x{j}"))
        .collect();
    let full: Vec<_> = report
        .learners
        .iter()
        .filter(|l| names.iter().all(|n| l.attributes.contains(n)))
        .collect();
    assert!(!full.is_empty());
    for l in full {
        assert!(l.test_error <= 0.1, "{:?}", l);
    }
    assert!(report.baseline_error.is_some());
    assert!(report.min_error <= report.max_error);
}

#[test]
fn eval_on_external_file_matches_columns_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = basic_run(dir.path());
    let lib = out.join("library.json");
    let archive = RunArchive::load(&lib).unwrap();

    // same rows, columns reversed
    let data = Dataset::load_csv(dir.path().join("data.csv"), "class").unwrap();
    let mut order: Vec<usize> = (0..data.p()).collect();
    order.reverse();
    let x = data.features().select(ndarray::Axis(1), &order);
    let names: Vec<String> = order
        .iter()
        .map(|&j| data.attribute_names()[j].clone())
        .collect();
    let labels: Vec<&str> = data
        .labels()
        .iter()
        .map(|&c| data.class_labels()[c].as_str())
        .collect();
    let reversed = Dataset::new(x, &labels, names).unwrap();
    let ext = dir.path().join("reversed.csv");
    std::fs::write(&ext, reversed.to_csv_string("class")).unwrap();
    let r = cmd_eval(&lib, &ext, false).unwrap();
    assert_eq!(r.evaluated_on, "external");
    assert_eq!(r.n_eval, 120);

    // drop one attribute used by the final library
    let used = &cmd_report(&lib, None, None).unwrap().final_summary.learners[0].attributes[0];
    let keep: Vec<usize> = (0..data.p())
        .filter(|&j| &data.attribute_names()[j] != used)
        .collect();
    let x = data.features().select(ndarray::Axis(1), &keep);
    let names: Vec<String> = keep
        .iter()
        .map(|&j| data.attribute_names()[j].clone())
        .collect();
    let missing = dir.path().join("missing.csv");
    std::fs::write(
        &missing,
        Dataset::new(x, &labels, names)
            .unwrap()
            .to_csv_string("class"),
    )
    .unwrap();
    let err = cmd_eval(&lib, &missing, false).unwrap_err();
    assert!(
        err.to_string()
            .contains(&format!("attribute `{used}` missing")),
        "{err}"
    );
    assert_eq!(archive.source.n_test, 30);
}

#[test]
fn eval_refuses_changed_training_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = basic_run(dir.path());
    let data_path = dir.path().join("data.csv");
    let mut text = std::fs::read_to_string(&data_path).unwrap();
    text.push('\n');
    std::fs::write(&data_path, text).unwrap();
    let err = cmd_eval(&out.join("library.json"), &data_path, false).unwrap_err();
    assert!(err.to_string().contains("changed since the run"), "{err}");
}

fn swag_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swag"))
}

#[test]
fn binary_exit_codes_and_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic::planted(60, 8, 2, 2.0, 4).dataset;
    let cfg = setup(
        dir.path(),
        &data,
        &BASIC.replace("alpha = 0.2", "alpha = 1.5"),
    );
    let out = swag_bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let report: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(report["error"]["field"], "swag.alpha");
    assert_eq!(report["error"]["kind"], "config");

    let cfg = setup(dir.path(), &data, BASIC);
    let out = swag_bin()
        .args(["--workers", "2", "run"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(dir.path().join("elsewhere"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let steps = stderr
        .lines()
        .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .filter(|v| v["event"] == "step")
        .count();
    assert!(steps >= 2, "{stderr}");
    assert!(dir.path().join("elsewhere/library.json").is_file());

    let out = swag_bin()
        .args(["--quiet", "run"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stderr.is_empty());

    let lib = dir.path().join("out/library.json");
    let out = swag_bin().arg("report").arg(&lib).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("learners="));
    let out = swag_bin()
        .arg("report")
        .arg(&lib)
        .args(["--dims", "9..9"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = swag_bin()
        .arg("eval")
        .arg(&lib)
        .arg(dir.path().join("data.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let eval: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(eval["evaluated_on"], "recorded_test_split");
    let out = swag_bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
