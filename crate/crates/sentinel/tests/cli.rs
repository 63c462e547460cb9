//! Black-box tests of the `sentinel` binary: argument handling, exit
//! codes, and the wiring between subcommands and the files they exchange.
//! Heavier end-to-end behaviour (FD002 quality, throughput, determinism)
//! lives in the acceptance suite.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn sentinel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sentinel"))
        .args(args)
        .output()
        .expect("spawn sentinel")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_success(out: &Output, context: &str) {
    assert!(
        out.status.success(),
        "{context} failed with {:?}: {}",
        out.status.code(),
        stderr_of(out)
    );
}

/// Missing input paths exit with status 2 and a machine-readable error line
/// naming the path.
#[test]
fn missing_paths_exit_with_status_2() {
    let out = sentinel(&[
        "train",
        "--dataset",
        "cmapss",
        "--data-dir",
        "/nonexistent-dataset-dir",
        "--outputs",
        "s_2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.starts_with("error: "), "stderr was: {err}");
    assert!(err.contains("/nonexistent-dataset-dir"), "stderr was: {err}");

    let out = sentinel(&["run", "/nonexistent-stream.csv", "--models", "/tmp"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("/nonexistent-stream.csv"));

    let out = sentinel(&["evaluate", "--dataset", "synth", "--models", "/nonexistent-models"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("/nonexistent-models"));
}

/// Usage errors (unknown flags, missing required arguments) exit with
/// status 2 via clap.
#[test]
fn usage_errors_exit_with_status_2() {
    let out = sentinel(&["train", "--dataset", "synth"]); // missing --outputs
    assert_eq!(out.status.code(), Some(2));
    let out = sentinel(&["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(2));
}

/// Domain errors that are not missing paths exit with status 1.
#[test]
fn domain_errors_exit_with_status_1() {
    let dir = tempdir().unwrap();
    // Directory exists but holds no model files.
    let out = sentinel(&[
        "evaluate",
        "--dataset",
        "synth",
        "--models",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("no model files"));

    // Unknown output signal.
    let out = sentinel(&[
        "train",
        "--dataset",
        "synth",
        "--outputs",
        "bogus_signal",
        "--models",
        dir.path().join("m").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("bogus_signal"));
}

/// With channel noise silenced and dropout off, the synthetic generator's
/// deterministic channel relationships are learnable an order of magnitude
/// more tightly than the noisy floor (~0.03 scaled MAE).
#[test]
fn noiseless_synth_trains_to_tiny_error() {
    let dir = tempdir().unwrap();
    let models = dir.path().join("models");
    let out = sentinel(&[
        "train",
        "--dataset",
        "synth",
        "--outputs",
        "t30",
        "--length",
        "6000",
        "--noise-scale",
        "0",
        "--dropout",
        "0",
        "--max-epochs",
        "30",
        "--patience",
        "30",
        "--seed",
        "5",
        "--models",
        models.to_str().unwrap(),
    ]);
    assert_success(&out, "noiseless train");
    let stdout = stdout_of(&out);
    let mae = stdout
        .lines()
        .find_map(|l| l.split("val_mae_scaled=").nth(1))
        .and_then(|rest| rest.split_whitespace().next())
        .expect("val_mae_scaled in train output")
        .parse::<f64>()
        .unwrap();
    assert!(
        mae < 5e-3,
        "noiseless validation MAE {mae} should be < 5e-3\n{stdout}"
    );

    // The models directory now holds the model, its training log, and the
    // scaling table.
    assert!(models.join("t30.sntl").is_file());
    assert!(models.join("t30.train.log").is_file());
    let scaling = fs::read_to_string(models.join("scaling.tsv")).unwrap();
    assert!(scaling.starts_with("signal\tq_low\tq_high"));

    // The training log carries one line per epoch.
    let log = fs::read_to_string(models.join("t30.train.log")).unwrap();
    assert!(log.lines().count() >= 1);
    assert!(log.starts_with("epoch 1 train_nll "));
}

/// Trains one competent model (validation MAE ~0.03 scaled) for the tests
/// that exercise run/inspect/stream wiring around it.
fn train_quick_model(models: &Path, seed: &str) {
    let out = sentinel(&[
        "train",
        "--dataset",
        "synth",
        "--outputs",
        "t30",
        "--length",
        "6000",
        "--max-epochs",
        "25",
        "--patience",
        "8",
        "--seed",
        seed,
        "--models",
        models.to_str().unwrap(),
    ]);
    assert_success(&out, "quick train");
}

/// An injected fault must outrank the same stream without it, and the
/// store must cap at the requested capacity.
#[test]
fn faulted_stream_outranks_nominal_and_store_caps() {
    let dir = tempdir().unwrap();
    let models = dir.path().join("models");
    train_quick_model(&models, "21");

    let nominal = dir.path().join("nominal.csv");
    let faulted = dir.path().join("faulted.csv");
    let out = sentinel(&[
        "synth",
        nominal.to_str().unwrap(),
        "--length",
        "6000",
        "--seed",
        "77",
    ]);
    assert_success(&out, "synth nominal");
    let out = sentinel(&[
        "synth",
        faulted.to_str().unwrap(),
        "--length",
        "6000",
        "--seed",
        "77",
        "--fault",
        "spike:t30:3000:amplitude=120,width=4",
        "--fault",
        "regime_shift:t30:4000:offset=80",
    ]);
    assert_success(&out, "synth faulted");
    // The fault mask rides alongside the faulted stream.
    let mask = fs::read_to_string(dir.path().join("faulted.mask.csv")).unwrap();
    assert!(mask.starts_with("sample_index,fault\n"));
    assert_eq!(mask.lines().count(), 6001);
    assert!(mask.contains("\n3000,1\n"));
    assert!(mask.contains("\n2999,0\n"));

    let max_msed = |stream: &Path, reports: &Path, capacity: &str| -> (f64, usize) {
        let out = sentinel(&[
            "run",
            stream.to_str().unwrap(),
            "--models",
            models.to_str().unwrap(),
            "--store-capacity",
            capacity,
            "--report-dir",
            reports.to_str().unwrap(),
        ]);
        assert_success(&out, "run");
        let drain = fs::read_to_string(reports.join("drain.csv")).unwrap();
        let mseds: Vec<f64> = drain
            .lines()
            .filter_map(|l| l.strip_prefix("#window,"))
            .map(|l| {
                l.split(',')
                    .find_map(|f| f.strip_prefix("msed="))
                    .unwrap()
                    .parse::<f64>()
                    .unwrap()
            })
            .collect();
        let max = mseds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (max, mseds.len())
    };

    let (nominal_max, nominal_count) = max_msed(&nominal, &dir.path().join("rn"), "25");
    let (faulted_max, faulted_count) = max_msed(&faulted, &dir.path().join("rf"), "25");
    assert_eq!(nominal_count, 25);
    assert_eq!(faulted_count, 25);
    assert!(
        faulted_max > 5.0 * nominal_max,
        "faulted max MSED {faulted_max} vs nominal {nominal_max}"
    );

    // A tighter capacity caps the drain.
    let (_, small) = max_msed(&faulted, &dir.path().join("rs"), "7");
    assert_eq!(small, 7);
}

/// Binary streams round-trip through run just like CSV ones, and telemetry
/// covers every tick.
#[test]
fn binary_streams_run_end_to_end() {
    let dir = tempdir().unwrap();
    let models = dir.path().join("models");
    train_quick_model(&models, "22");

    let stream = dir.path().join("stream.bin");
    let out = sentinel(&[
        "synth",
        stream.to_str().unwrap(),
        "--length",
        "2500",
        "--seed",
        "9",
        "--binary",
    ]);
    assert_success(&out, "synth binary");
    // Binary magic, not CSV text.
    let head = fs::read(&stream).unwrap();
    assert_eq!(&head[..4], b"SNS1");

    let reports = dir.path().join("reports");
    let out = sentinel(&[
        "run",
        stream.to_str().unwrap(),
        "--models",
        models.to_str().unwrap(),
        "--report-dir",
        reports.to_str().unwrap(),
    ]);
    assert_success(&out, "run binary");
    let telemetry = fs::read_to_string(reports.join("telemetry.csv")).unwrap();
    assert_eq!(telemetry.lines().count(), 2501, "header plus one row per tick");
    let drain = fs::read_to_string(reports.join("drain.csv")).unwrap();
    assert!(drain.starts_with("outside_temp,outside_pressure,n1,p30,t30,tgt\n"));
}

/// Control-file commands present at startup are applied before the first
/// tick: a model loaded there scores the stream, an unloaded one does not.
#[test]
fn control_file_commands_apply_from_startup() {
    let dir = tempdir().unwrap();
    let models = dir.path().join("models");
    train_quick_model(&models, "23");
    let empty = dir.path().join("no-models");
    fs::create_dir_all(&empty).unwrap();

    let stream = dir.path().join("stream.csv");
    let out = sentinel(&[
        "synth",
        stream.to_str().unwrap(),
        "--length",
        "500",
        "--seed",
        "13",
    ]);
    assert_success(&out, "synth");

    // Start with an empty registry; the control file injects the model.
    let control = dir.path().join("control.txt");
    fs::write(
        &control,
        format!("# startup commands\nload {}\n", models.join("t30.sntl").display()),
    )
    .unwrap();
    let reports = dir.path().join("rc");
    let out = sentinel(&[
        "run",
        stream.to_str().unwrap(),
        "--models",
        empty.to_str().unwrap(),
        "--control-file",
        control.to_str().unwrap(),
        "--report-dir",
        reports.to_str().unwrap(),
    ]);
    assert_success(&out, "run with control file");
    assert!(stderr_of(&out).contains("control: loaded model"), "{}", stderr_of(&out));
    let telemetry = fs::read_to_string(reports.join("telemetry.csv")).unwrap();
    let scored = telemetry
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(2) == Some("1"))
        .count();
    assert!(scored > 0, "control-loaded model never ran:\n{telemetry}");

    // Load-then-unload leaves the registry empty for the whole stream.
    fs::write(
        &control,
        format!("load {}\nunload 5\n", models.join("t30.sntl").display()),
    )
    .unwrap();
    let reports2 = dir.path().join("rc2");
    let out = sentinel(&[
        "run",
        stream.to_str().unwrap(),
        "--models",
        empty.to_str().unwrap(),
        "--control-file",
        control.to_str().unwrap(),
        "--report-dir",
        reports2.to_str().unwrap(),
    ]);
    assert_success(&out, "run with load+unload");
    let telemetry = fs::read_to_string(reports2.join("telemetry.csv")).unwrap();
    assert!(
        telemetry.lines().skip(1).all(|l| l.split(',').nth(2) == Some("0")),
        "unloaded model still ran:\n{telemetry}"
    );

    // Bad control lines are reported and skipped, not fatal.
    fs::write(&control, "frobnicate 99\n").unwrap();
    let out = sentinel(&[
        "run",
        stream.to_str().unwrap(),
        "--models",
        empty.to_str().unwrap(),
        "--control-file",
        control.to_str().unwrap(),
        "--report-dir",
        dir.path().join("rc3").to_str().unwrap(),
    ]);
    assert_success(&out, "run with bad control line");
    assert!(stderr_of(&out).contains("control line"), "{}", stderr_of(&out));
}

/// The csv dataset family trains and evaluates from a boundary-separated
/// stream file.
#[test]
fn csv_dataset_trains_and_evaluates() {
    let dir = tempdir().unwrap();
    // Two runs of a simple deterministic relationship: c = a + b.
    let mut text = String::from("a,b,c\n");
    for run in 0..2 {
        if run == 1 {
            text.push_str("#boundary\n");
        }
        for i in 0..400 {
            let a = (i as f64 / 25.0).sin();
            let b = (i as f64 / 40.0).cos() + run as f64 * 0.1;
            text.push_str(&format!("{a},{b},{}\n", a + b));
        }
    }
    let stream = dir.path().join("runs.csv");
    fs::write(&stream, text).unwrap();

    let models = dir.path().join("models");
    let out = sentinel(&[
        "train",
        "--dataset",
        "csv",
        "--data-dir",
        stream.to_str().unwrap(),
        "--inputs",
        "a,b",
        "--outputs",
        "c",
        "--filters",
        "8",
        "--dense-units",
        "8",
        "--max-epochs",
        "3",
        "--models",
        models.to_str().unwrap(),
    ]);
    assert_success(&out, "csv train");
    assert!(stdout_of(&out).contains("effective-config:"));

    let reports = dir.path().join("reports");
    let out = sentinel(&[
        "evaluate",
        "--dataset",
        "csv",
        "--data-dir",
        stream.to_str().unwrap(),
        "--models",
        models.to_str().unwrap(),
        "--report-dir",
        reports.to_str().unwrap(),
    ]);
    assert_success(&out, "csv evaluate");
    for f in ["mae_per_model.csv", "utest.csv", "msed_by_position.csv", "summary.txt"] {
        assert!(reports.join(f).is_file(), "missing report {f}");
    }
    // Evaluate must not emit wall-clock data.
    assert!(!reports.join("durations.csv").exists());
    let utest = fs::read_to_string(reports.join("utest.csv")).unwrap();
    assert!(utest.starts_with(
        "u_statistic,p_value,mean_first,mean_second,n1,n2,exact,degenerate\n"
    ));
}

/// inspect prints the model's structure and scaling.
#[test]
fn inspect_describes_a_model() {
    let dir = tempdir().unwrap();
    let models = dir.path().join("models");
    train_quick_model(&models, "24");

    let model = models.join("t30.sntl");
    let out = sentinel(&["inspect", model.to_str().unwrap()]);
    assert_success(&out, "inspect");
    let stdout = stdout_of(&out);
    assert!(stdout.contains("output=t30"), "{stdout}");
    assert!(stdout.contains("parameters=71042"), "{stdout}");
    assert!(stdout.contains("output_scaling t30"), "{stdout}");

    let out = sentinel(&["inspect", model.to_str().unwrap(), "--tensors"]);
    assert_success(&out, "inspect --tensors");
    let stdout = stdout_of(&out);
    assert!(stdout.contains("tensor temporal_fold"), "{stdout}");
}

/// Signal aliases (s2 for s_2) resolve in CLI arguments.
#[test]
fn signal_aliases_resolve() {
    let dir = tempdir().unwrap();
    let models = dir.path().join("models");
    // If the alias failed to resolve this would exit 1 before training.
    let out = sentinel(&[
        "train",
        "--dataset",
        "synth",
        "--outputs",
        "T30",
        "--length",
        "1500",
        "--filters",
        "4",
        "--dense-units",
        "4",
        "--max-epochs",
        "1",
        "--models",
        models.to_str().unwrap(),
    ]);
    assert_success(&out, "alias train");
    assert!(models.join("t30.sntl").is_file(), "canonical name used for the model file");
}
