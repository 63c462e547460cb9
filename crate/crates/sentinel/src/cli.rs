//! The `sentinel` command-line interface.
//!
//! Six subcommands wire the library into reproducible workflows:
//!
//! * `train`    — fit one model per requested output signal, write model
//!   files and per-epoch training logs.
//! * `run`      — stream a file through the engine, write the drained store
//!   and per-tick telemetry; live load/unload via a control file.
//! * `evaluate` — emit the report bundle (MAE, MSED by position, U test).
//! * `bench`    — replay the 25-signal / 100k-sample synthetic benchmark
//!   stream and emit the duration histogram.
//! * `inspect`  — print a model file's metadata.
//! * `synth`    — generate a synthetic stream file with optional faults.
//!
//! Every subcommand prints an `effective-config:` block of resolved
//! settings before acting; re-running with those settings reproduces the
//! outputs byte-identically (wall-clock fields excepted). All randomness
//! derives from the single `--seed` value. Exit status: 0 when every output
//! was written, 2 for missing input paths and usage errors, 1 otherwise;
//! failures print a single machine-readable `error: …` line on stderr.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use sentinel_core::datasets::{
    bench_channels, case_study_model_maps, cmapss_columns, cmapss_split, engine_channels,
    fit_scaling, generate_synthetic, parse_cmapss, ChannelSpec, FaultKind, FaultSpec, RunSeries,
    ScalingPair, SynthConfig,
};
use sentinel_core::evaluation::{
    duration_histogram, half_run_comparison, mae, msed_by_position, MsedSeries,
};
use sentinel_core::network::{count_parameters, ModelSpec};
use sentinel_core::runtime::{Engine, EngineConfig, RunRecord, DEFAULT_BUFFER_CAPACITY};
use sentinel_core::training::{infer_set, train, TrainConfig};

use crate::host::{
    drive_stream, load_model_files, resolve_threads, run_tasks, write_drain, write_telemetry,
    ControlFile,
};
use crate::model_file::{write_model, write_scaling_table, ModelFile};
use crate::reports::{
    duration_summary_entries, write_durations_csv, write_mae_csv, write_position_csv,
    write_summary, write_utest_csv, MaeRow,
};
use crate::stream::{open_stream, BinaryStreamWriter, CsvStreamWriter, StreamEvent};

/// The benchmark stream shape: 25 signals, 100,000 samples.
pub const BENCH_SIGNALS: usize = 25;

/// FD002 file roles. The published files are used with their roles swapped:
/// the original *test* file (truncated early, low degradation) provides the
/// training pool, while the original *train* file (runs progressing to
/// failure) provides the evaluation runs.
pub const CMAPSS_TRAIN_POOL_FILE: &str = "test_FD002.txt";
/// See [`CMAPSS_TRAIN_POOL_FILE`].
pub const CMAPSS_TEST_RUNS_FILE: &str = "train_FD002.txt";

/// Expected FD002 unit count across both files.
const CMAPSS_TOTAL_UNITS: usize = 519;

/// An input path that does not exist. Mapped to exit status 2.
#[derive(Debug, Error)]
#[error("missing path: {}", .0.display())]
pub struct MissingPath(pub PathBuf);

/// Parses the process arguments, runs the selected subcommand and returns
/// the process exit status.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.root_cause().downcast_ref::<MissingPath>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sentinel",
    version,
    about = "Streaming anomaly scoring for multivariate sensor data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per requested output signal.
    Train(TrainArgs),
    /// Stream a file through the engine and drain the store.
    Run(RunArgs),
    /// Produce the evaluation report bundle.
    Evaluate(EvaluateArgs),
    /// Replay the synthetic benchmark stream and time every tick.
    Bench(BenchArgs),
    /// Print a model file's metadata.
    Inspect(InspectArgs),
    /// Generate a synthetic stream file.
    Synth(SynthArgs),
}

/// Which dataset family a command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DatasetKind {
    /// NASA C-MAPSS FD002 text files under `--data-dir`.
    Cmapss,
    /// The built-in synthetic generator (no files needed).
    Synth,
    /// A stream CSV; `--data-dir` names the file, boundaries split runs.
    Csv,
}

impl DatasetKind {
    fn name(self) -> &'static str {
        match self {
            DatasetKind::Cmapss => "cmapss",
            DatasetKind::Synth => "synth",
            DatasetKind::Csv => "csv",
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset family.
    #[arg(long, value_enum)]
    dataset: DatasetKind,
    /// Dataset directory (cmapss) or stream file (csv).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Output signals, one model each (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    outputs: Vec<String>,
    /// Input signals. Defaults: the three operating-condition settings for
    /// cmapss; the case-study input map for synth.
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<String>,
    /// Window length T.
    #[arg(long, default_value_t = 1)]
    window_len: usize,
    /// Convolution filter count F.
    #[arg(long, default_value_t = 64)]
    filters: usize,
    /// Dense layer width D.
    #[arg(long, default_value_t = 64)]
    dense_units: usize,
    /// Dropout rate after each hidden dense layer.
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    /// Leaky ReLU negative-side slope.
    #[arg(long, default_value_t = 0.3)]
    lrelu_slope: f64,
    /// Root seed for split, init, shuffling and dropout.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Directory model files are written to.
    #[arg(long, default_value = "models")]
    models: PathBuf,
    /// Samples per optimiser step.
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Peak learning rate.
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// Learning rate at the schedule's ends.
    #[arg(long, default_value_t = 1e-5)]
    min_learning_rate: f64,
    /// Fraction of the schedule spent warming up.
    #[arg(long, default_value_t = 0.1)]
    warmup_proportion: f64,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 10)]
    patience: usize,
    /// Hard epoch cap.
    #[arg(long, default_value_t = 100)]
    max_epochs: usize,
    /// Leading share of each run eligible for training (default: 0.5 for
    /// cmapss, 1.0 otherwise).
    #[arg(long)]
    fraction_of_run: Option<f64>,
    /// Share of eligible rows drawn for validation.
    #[arg(long, default_value_t = 0.25)]
    val_ratio: f64,
    /// Synthetic stream length (synth only).
    #[arg(long, default_value_t = 20_000)]
    length: usize,
    /// Samples between latent-driver waypoints (synth only).
    #[arg(long, default_value_t = 50)]
    segment_len: usize,
    /// Multiplier on every channel's noise (synth only; 0 = noiseless).
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Stream file, CSV or binary.
    stream: PathBuf,
    /// Model file or directory of `*.sntl` files.
    #[arg(long, default_value = "models")]
    models: PathBuf,
    /// Store capacity K.
    #[arg(long, default_value_t = 50)]
    store_capacity: usize,
    /// Minimum index spacing between stored windows (0 = off).
    #[arg(long, default_value_t = 0)]
    min_index_spacing: u64,
    /// Append-only command file polled between ticks
    /// (`load <path>` / `unload <id>` lines).
    #[arg(long)]
    control_file: Option<PathBuf>,
    /// Directory for drain.csv and telemetry.csv.
    #[arg(long, default_value = "reports")]
    report_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset family.
    #[arg(long, value_enum)]
    dataset: DatasetKind,
    /// Dataset directory (cmapss) or stream file (csv).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Model file or directory of `*.sntl` files.
    #[arg(long, default_value = "models")]
    models: PathBuf,
    /// Restrict to models predicting these signals (default: all found).
    #[arg(long, value_delimiter = ',')]
    outputs: Vec<String>,
    /// Directory the report bundle is written to.
    #[arg(long, default_value = "reports")]
    report_dir: PathBuf,
    /// Root seed; must match training to reproduce its validation split.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Position bins for the MSED distribution table.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Leading share of each run eligible for training (default: 0.5 for
    /// cmapss, 1.0 otherwise); must match training.
    #[arg(long)]
    fraction_of_run: Option<f64>,
    /// Share of eligible rows drawn for validation; must match training.
    #[arg(long, default_value_t = 0.25)]
    val_ratio: f64,
    /// Synthetic stream length (synth only).
    #[arg(long, default_value_t = 20_000)]
    length: usize,
    /// Samples between latent-driver waypoints (synth only).
    #[arg(long, default_value_t = 50)]
    segment_len: usize,
    /// Multiplier on every channel's noise (synth only).
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Model file or directory of `*.sntl` files (omit for zero models).
    #[arg(long)]
    models: Option<PathBuf>,
    /// Seed for the benchmark stream.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Stream length in samples.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Store capacity K.
    #[arg(long, default_value_t = 50)]
    store_capacity: usize,
    /// Directory for durations.csv, telemetry.csv and summary.txt.
    #[arg(long, default_value = "reports")]
    report_dir: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    /// Model files to describe.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Also list every tensor with its shape.
    #[arg(long)]
    tensors: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output stream file.
    out: PathBuf,
    /// Generator seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Samples to generate.
    #[arg(long, default_value_t = 20_000)]
    length: usize,
    /// Samples between latent-driver waypoints.
    #[arg(long, default_value_t = 50)]
    segment_len: usize,
    /// Channel set: `engine` (the six case-study channels) or `bench:N`.
    #[arg(long, default_value = "engine")]
    channels: String,
    /// Multiplier on every channel's noise (0 = noiseless).
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    /// Fault to inject, repeatable. Format
    /// `kind:channel:onset:key=value[,key=value…]` with kinds
    /// `spike` (amplitude, width), `regime_shift` (gain, offset, jitter)
    /// and `drift` (amplitude, ramp).
    #[arg(long = "fault")]
    faults: Vec<String>,
    /// Write the binary stream form instead of CSV.
    #[arg(long)]
    binary: bool,
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Run(args) => cmd_run(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// The printed effective-config block: every resolved setting, in a fixed
/// order, as `key=value` lines.
struct ConfigBlock {
    entries: Vec<(String, String)>,
}

impl ConfigBlock {
    fn new(subcommand: &str) -> ConfigBlock {
        let mut block = ConfigBlock { entries: Vec::new() };
        block.push("subcommand", subcommand);
        block.push("threads", resolve_threads());
        block
    }

    fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    fn push_opt(&mut self, key: &str, value: Option<impl Display>) {
        match value {
            Some(v) => self.push(key, v),
            None => self.push(key, "-"),
        }
    }

    fn print(&self) {
        println!("effective-config:");
        for (k, v) in &self.entries {
            println!("  {k}={v}");
        }
    }
}

/// Case- and underscore-insensitive signal lookup, so the CLI accepts `s2`
/// for the canonical column name `s_2`.
fn resolve_signal(schema: &[String], name: &str) -> Result<usize> {
    if let Some(i) = schema.iter().position(|s| s == name) {
        return Ok(i);
    }
    let normalize = |s: &str| -> String {
        s.chars()
            .filter(|c| *c != '_')
            .flat_map(|c| c.to_lowercase())
            .collect()
    };
    let wanted = normalize(name);
    let hits: Vec<usize> = schema
        .iter()
        .enumerate()
        .filter(|(_, s)| normalize(s) == wanted)
        .map(|(i, _)| i)
        .collect();
    match hits.as_slice() {
        [i] => Ok(*i),
        [] => bail!("unknown signal {name:?}"),
        _ => bail!("signal {name:?} is ambiguous"),
    }
}

fn resolve_signals(schema: &[String], names: &[String]) -> Result<Vec<usize>> {
    names.iter().map(|n| resolve_signal(schema, n)).collect()
}

/// Per-model seed: derived from the root seed and the output column so each
/// model trains differently but the whole invocation reproduces from one
/// value.
fn model_seed(root: u64, output_column: usize) -> u64 {
    root.wrapping_add(output_column as u64 + 1)
}

/// Stable model id: the output column index plus one.
fn model_id(output_column: usize) -> u64 {
    output_column as u64 + 1
}

fn require_dir(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(MissingPath(path.to_path_buf()).into())
    }
}

fn read_cmapss_file(dir: &Path, file: &str) -> Result<Vec<RunSeries>> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(MissingPath(path).into());
    }
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading {}", path.display()))?;
    let parsed = parse_cmapss(&text)
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    if parsed.reordered {
        eprintln!(
            "warning: {} had out-of-order cycles; rows were re-sorted",
            path.display()
        );
    }
    Ok(parsed.runs)
}

fn synth_channel_set(kind: &str) -> Result<Vec<ChannelSpec>> {
    if kind == "engine" {
        return Ok(engine_channels());
    }
    if let Some(n) = kind.strip_prefix("bench:") {
        let n: usize = n
            .parse()
            .map_err(|_| anyhow!("bad channel count in {kind:?}"))?;
        if n == 0 {
            bail!("bench channel count must be nonzero");
        }
        return Ok(bench_channels(n));
    }
    bail!("unknown channel set {kind:?}; use `engine` or `bench:N`")
}

fn scale_channel_noise(channels: &mut [ChannelSpec], factor: f64) {
    for c in channels.iter_mut() {
        c.noise_sd *= factor;
    }
}

/// What a training or evaluation command reads: column names, the runs that
/// form the training pool, and the dataset's default eligible fraction.
struct LoadedDataset {
    schema: Vec<String>,
    runs: Vec<RunSeries>,
    default_fraction: f64,
}

fn load_training_pool(
    dataset: DatasetKind,
    data_dir: Option<&Path>,
    length: usize,
    segment_len: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<LoadedDataset> {
    match dataset {
        DatasetKind::Cmapss => {
            let dir = data_dir.ok_or_else(|| anyhow!("--data-dir is required for cmapss"))?;
            require_dir(dir)?;
            let runs = read_cmapss_file(dir, CMAPSS_TRAIN_POOL_FILE)?;
            Ok(LoadedDataset {
                schema: cmapss_columns(),
                runs,
                default_fraction: 0.5,
            })
        }
        DatasetKind::Synth => {
            let mut channels = engine_channels();
            scale_channel_noise(&mut channels, noise_scale);
            let config = SynthConfig {
                channels,
                length,
                segment_len,
                seed,
                faults: Vec::new(),
            };
            let series = generate_synthetic(&config).map_err(|e| anyhow!("synth: {e}"))?;
            Ok(LoadedDataset {
                schema: series.names,
                runs: vec![series.run],
                default_fraction: 1.0,
            })
        }
        DatasetKind::Csv => {
            let path = data_dir.ok_or_else(|| anyhow!("--data-dir is required for csv"))?;
            if !path.is_file() {
                return Err(MissingPath(path.to_path_buf()).into());
            }
            let (schema, runs) = read_stream_runs(path)?;
            Ok(LoadedDataset {
                schema,
                runs,
                default_fraction: 1.0,
            })
        }
    }
}

/// Reads a stream file into boundary-separated runs. Malformed rows are
/// skipped with a warning (they carry no usable values for training).
fn read_stream_runs(path: &Path) -> Result<(Vec<String>, Vec<RunSeries>)> {
    let mut reader = open_stream(path).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let schema = reader.schema().to_vec();
    let width = schema.len();
    let mut runs: Vec<RunSeries> = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    let mut skipped = 0u64;
    let close = |values: &mut Vec<f64>, runs: &mut Vec<RunSeries>| {
        if values.is_empty() {
            return;
        }
        let rows = values.len() / width;
        runs.push(RunSeries {
            unit: runs.len() as u32,
            cycles: (1..=rows as u32).collect(),
            width,
            values: std::mem::take(values),
        });
    };
    while let Some(event) = reader.next_event().map_err(|e| anyhow!("{}: {e}", path.display()))? {
        match event {
            StreamEvent::Sample(row) => {
                if row.len() == width && row.iter().all(|v| v.is_finite()) {
                    current.extend_from_slice(&row);
                } else {
                    skipped += 1;
                }
            }
            StreamEvent::Boundary => close(&mut current, &mut runs),
            StreamEvent::Malformed { .. } => skipped += 1,
        }
    }
    close(&mut current, &mut runs);
    if skipped > 0 {
        eprintln!("warning: {skipped} unusable rows skipped in {}", path.display());
    }
    if runs.is_empty() {
        bail!("{}: stream holds no samples", path.display());
    }
    Ok((schema, runs))
}

/// Default inputs per dataset: the three operating-condition settings for
/// cmapss, the case-study input map for synth.
fn default_inputs(dataset: DatasetKind, output: &str) -> Result<Vec<String>> {
    match dataset {
        DatasetKind::Cmapss => Ok(vec![
            "setting_1".into(),
            "setting_2".into(),
            "setting_3".into(),
        ]),
        DatasetKind::Synth => {
            for (out, ins) in case_study_model_maps() {
                if out == output {
                    return Ok(ins.iter().map(|s| s.to_string()).collect());
                }
            }
            bail!("no default input map for synth signal {output:?}; pass --inputs")
        }
        DatasetKind::Csv => bail!("--inputs is required for csv datasets"),
    }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn cmd_train(args: TrainArgs) -> Result<()> {
    let data = load_training_pool(
        args.dataset,
        args.data_dir.as_deref(),
        args.length,
        args.segment_len,
        args.noise_scale,
        args.seed,
    )?;
    let fraction = args.fraction_of_run.unwrap_or(data.default_fraction);

    let mut block = ConfigBlock::new("train");
    block.push("dataset", args.dataset.name());
    block.push_opt("data_dir", args.data_dir.as_ref().map(|p| p.display()));
    block.push("outputs", args.outputs.join(","));
    block.push(
        "inputs",
        if args.inputs.is_empty() {
            "(per-dataset default)".to_string()
        } else {
            args.inputs.join(",")
        },
    );
    block.push("window_len", args.window_len);
    block.push("filters", args.filters);
    block.push("dense_units", args.dense_units);
    block.push("dropout", args.dropout);
    block.push("lrelu_slope", args.lrelu_slope);
    block.push("seed", args.seed);
    block.push("models", args.models.display());
    block.push("batch_size", args.batch_size);
    block.push("learning_rate", args.learning_rate);
    block.push("min_learning_rate", args.min_learning_rate);
    block.push("warmup_proportion", args.warmup_proportion);
    block.push("patience", args.patience);
    block.push("max_epochs", args.max_epochs);
    block.push("fraction_of_run", fraction);
    block.push("val_ratio", args.val_ratio);
    if args.dataset == DatasetKind::Synth {
        block.push("length", args.length);
        block.push("segment_len", args.segment_len);
        block.push("noise_scale", args.noise_scale);
    }
    block.print();

    let plan = cmapss_split(&data.runs, fraction, args.val_ratio, args.seed)
        .map_err(|e| anyhow!("split: {e}"))?;
    let training_view = plan.training_view(&data.runs);
    let validation_view = plan.validation_view(&data.runs);
    if validation_view.is_empty() {
        bail!("validation split is empty; raise --val-ratio");
    }
    println!(
        "split: {} training rows, {} validation rows over {} runs",
        plan.train_len(),
        plan.validation_len(),
        data.runs.len()
    );

    fs::create_dir_all(&args.models)
        .with_context(|| format!("creating {}", args.models.display()))?;

    let mut scaling_rows: Vec<(String, ScalingPair)> = Vec::new();
    let mut note_scaling = |name: &str, pair: ScalingPair| {
        if !scaling_rows.iter().any(|(n, _)| n == name) {
            scaling_rows.push((name.to_string(), pair));
        }
    };

    for output in &args.outputs {
        let out_col = resolve_signal(&data.schema, output)?;
        let output_name = data.schema[out_col].clone();
        let input_names = if args.inputs.is_empty() {
            default_inputs(args.dataset, &output_name)?
        } else {
            args.inputs.clone()
        };
        let input_cols = resolve_signals(&data.schema, &input_names)?;
        let canonical_inputs: Vec<String> =
            input_cols.iter().map(|&c| data.schema[c].clone()).collect();

        let input_scaling = fit_scaling(&training_view, &input_cols, &data.schema)
            .map_err(|e| anyhow!("scaling: {e}"))?;
        let output_scaling = fit_scaling(&training_view, &[out_col], &data.schema)
            .map_err(|e| anyhow!("scaling: {e}"))?[0];
        for (name, pair) in canonical_inputs.iter().zip(&input_scaling) {
            note_scaling(name, *pair);
        }
        note_scaling(&output_name, output_scaling);

        let spec = ModelSpec {
            input_signals: canonical_inputs,
            output_signal: output_name.clone(),
            window_len: args.window_len,
            conv_filters: args.filters,
            dense_units: args.dense_units,
            lrelu_slope: args.lrelu_slope,
            dropout_rate: args.dropout,
        };
        spec.validate().map_err(|e| anyhow!("spec: {e}"))?;

        let train_set = training_view
            .make_set(&input_cols, &input_scaling, out_col, output_scaling, args.window_len)
            .map_err(|e| anyhow!("training set: {e}"))?;
        let val_set = validation_view
            .make_set(&input_cols, &input_scaling, out_col, output_scaling, args.window_len)
            .map_err(|e| anyhow!("validation set: {e}"))?;

        let steps_per_epoch = train_set.len().div_ceil(args.batch_size).max(1);
        let config = TrainConfig {
            batch_size: args.batch_size,
            learning_rate: args.learning_rate,
            min_learning_rate: args.min_learning_rate,
            total_steps: steps_per_epoch * args.max_epochs,
            warmup_proportion: args.warmup_proportion,
            patience: args.patience,
            max_epochs: args.max_epochs,
            seed: model_seed(args.seed, out_col),
            stop_gradient_on_mean_input: false,
        };

        let started = Instant::now();
        let (params, report) =
            train(&spec, &train_set, &val_set, &config).map_err(|e| anyhow!("train: {e}"))?;
        let elapsed = started.elapsed().as_secs_f64();

        let predictions = infer_set(&params, &val_set).map_err(|e| anyhow!("inference: {e}"))?;
        let mu: Vec<f64> = predictions.iter().map(|p| p.mu).collect();
        let val_mae = mae(&mu, val_set.targets(), None).map_err(|e| anyhow!("mae: {e}"))?;

        let id = model_id(out_col);
        let model_path = args.models.join(format!("{output_name}.sntl"));
        let log_path = args.models.join(format!("{output_name}.train.log"));
        write_model(
            &model_path,
            &ModelFile {
                id,
                params,
                input_scaling: input_scaling.clone(),
                output_scaling,
            },
        )
        .map_err(|e| anyhow!("writing {}: {e}", model_path.display()))?;

        let mut log = String::new();
        for (i, (t, v)) in report.train_nll.iter().zip(&report.validation_nll).enumerate() {
            log.push_str(&format!("epoch {} train_nll {t} val_nll {v}\n", i + 1));
        }
        fs::write(&log_path, log)
            .with_context(|| format!("writing {}", log_path.display()))?;

        println!(
            "model {output_name}: id={id} parameters={} epochs={} best_epoch={} \
             best_val_nll={:.6} val_mae_scaled={:.6} train_s={elapsed:.1} -> {}",
            count_parameters(&spec),
            report.epochs,
            report.best_epoch,
            report.best_validation_nll,
            val_mae,
            model_path.display()
        );
    }

    write_scaling_table(&args.models.join("scaling.tsv"), &scaling_rows)
        .map_err(|e| anyhow!("writing scaling table: {e}"))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn cmd_run(args: RunArgs) -> Result<()> {
    if !args.stream.is_file() {
        return Err(MissingPath(args.stream.clone()).into());
    }
    require_dir(&args.models)?;

    let mut block = ConfigBlock::new("run");
    block.push("stream", args.stream.display());
    block.push("models", args.models.display());
    block.push("store_capacity", args.store_capacity);
    block.push("min_index_spacing", args.min_index_spacing);
    block.push_opt("control_file", args.control_file.as_ref().map(|p| p.display()));
    block.push("report_dir", args.report_dir.display());
    block.print();

    let models = load_model_files(&args.models)?;
    let mut reader =
        open_stream(&args.stream).map_err(|e| anyhow!("{}: {e}", args.stream.display()))?;

    let max_window = models
        .iter()
        .map(|m| m.params.spec().window_len)
        .max()
        .unwrap_or(1);
    let mut engine = Engine::new(
        reader.schema().to_vec(),
        EngineConfig {
            store_capacity: args.store_capacity,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY.max(max_window),
            min_index_spacing: args.min_index_spacing,
        },
    )
    .map_err(|e| anyhow!("engine: {e}"))?;
    for model in models {
        let id = model.id;
        engine
            .register(model.into_registration())
            .map_err(|e| anyhow!("loading model {id}: {e}"))?;
    }
    println!("loaded {} models", engine.models_loaded());

    let threads = resolve_threads();
    let mut control = args.control_file.clone().map(ControlFile::new);
    let outcome = drive_stream(&mut engine, &mut reader, threads, control.as_mut(), |_| {})?;

    fs::create_dir_all(&args.report_dir)
        .with_context(|| format!("creating {}", args.report_dir.display()))?;
    let windows = engine.drain_store();
    let drain_path = args.report_dir.join("drain.csv");
    let telemetry_path = args.report_dir.join("telemetry.csv");
    write_drain(&drain_path, engine.schema(), &windows)?;
    write_telemetry(&telemetry_path, &outcome.records)?;

    let t = engine.telemetry();
    println!(
        "run: ticks={} accepted={} rejected={} boundaries={} models_run={} faults={} \
         sigma_floor_hits={} stored={} skipped_spacing={}",
        t.ticks,
        t.samples_accepted,
        t.samples_rejected,
        outcome.boundaries,
        t.models_run,
        t.model_faults,
        t.sigma_floor_hits,
        windows.len(),
        t.windows_skipped_spacing
    );
    if let Some(best) = windows.first() {
        println!(
            "run: max stored msed={} at sample {}",
            best.msed,
            best.end_sample_index()
        );
    }
    println!("wrote {} and {}", drain_path.display(), telemetry_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    require_dir(&args.models)?;
    let mut models = load_model_files(&args.models)?;
    if !args.outputs.is_empty() {
        let wanted: Vec<String> = args.outputs.clone();
        models.retain(|m| {
            wanted
                .iter()
                .any(|w| signals_match(w, &m.params.spec().output_signal))
        });
        if models.len() < wanted.len() {
            let found: Vec<&str> = models
                .iter()
                .map(|m| m.params.spec().output_signal.as_str())
                .collect();
            bail!(
                "missing models for requested signals: wanted [{}], found [{}] under {}",
                wanted.join(","),
                found.join(","),
                args.models.display()
            );
        }
    }
    if models.is_empty() {
        bail!("no model files under {}", args.models.display());
    }

    let mut block = ConfigBlock::new("evaluate");
    block.push("dataset", args.dataset.name());
    block.push_opt("data_dir", args.data_dir.as_ref().map(|p| p.display()));
    block.push("models", args.models.display());
    block.push(
        "outputs",
        if args.outputs.is_empty() {
            "(all)".to_string()
        } else {
            args.outputs.join(",")
        },
    );
    block.push("report_dir", args.report_dir.display());
    block.push("seed", args.seed);
    block.push("bins", args.bins);
    block.push("val_ratio", args.val_ratio);

    // Validation pool for MAE, and full test runs for the MSED analyses.
    let data = load_training_pool(
        args.dataset,
        args.data_dir.as_deref(),
        args.length,
        args.segment_len,
        args.noise_scale,
        args.seed,
    )?;
    let fraction = args.fraction_of_run.unwrap_or(data.default_fraction);
    block.push("fraction_of_run", fraction);
    if args.dataset == DatasetKind::Synth {
        block.push("length", args.length);
        block.push("segment_len", args.segment_len);
        block.push("noise_scale", args.noise_scale);
    }
    block.print();

    let test_runs: Vec<RunSeries> = match args.dataset {
        DatasetKind::Cmapss => {
            let dir = args
                .data_dir
                .as_deref()
                .ok_or_else(|| anyhow!("--data-dir is required for cmapss"))?;
            let runs = read_cmapss_file(dir, CMAPSS_TEST_RUNS_FILE)?;
            let total = runs.len() + data.runs.len();
            println!(
                "cmapss: training-pool units={} evaluation units={} total={total}",
                data.runs.len(),
                runs.len()
            );
            if total != CMAPSS_TOTAL_UNITS {
                eprintln!(
                    "warning: expected {CMAPSS_TOTAL_UNITS} FD002 units total, found {total}"
                );
            }
            runs
        }
        // The synthetic/CSV pools double as the evaluation stream: every
        // run is replayed in full for the MSED analyses.
        DatasetKind::Synth | DatasetKind::Csv => data.runs.clone(),
    };
    if test_runs.iter().all(|r| r.is_empty()) {
        bail!("empty test split: no evaluation runs");
    }

    // Per-model validation MAE under each model's own embedded scaling.
    let plan = cmapss_split(&data.runs, fraction, args.val_ratio, args.seed)
        .map_err(|e| anyhow!("split: {e}"))?;
    let validation_view = plan.validation_view(&data.runs);
    if validation_view.is_empty() {
        bail!("validation split is empty; raise --val-ratio");
    }

    let mut rows: Vec<MaeRow> = Vec::new();
    let mut pooled_abs_sum = 0.0;
    let mut pooled_n = 0usize;
    for model in &models {
        let spec = model.params.spec();
        let input_cols = resolve_signals(&data.schema, &spec.input_signals)?;
        let out_col = resolve_signal(&data.schema, &spec.output_signal)?;
        let val_set = validation_view
            .make_set(
                &input_cols,
                &model.input_scaling,
                out_col,
                model.output_scaling,
                spec.window_len,
            )
            .map_err(|e| anyhow!("validation set for {}: {e}", spec.output_signal))?;
        let predictions =
            infer_set(&model.params, &val_set).map_err(|e| anyhow!("inference: {e}"))?;
        let mu: Vec<f64> = predictions.iter().map(|p| p.mu).collect();
        let mae_scaled = mae(&mu, val_set.targets(), None).map_err(|e| anyhow!("mae: {e}"))?;
        let mae_raw = mae(&mu, val_set.targets(), Some(model.output_scaling))
            .map_err(|e| anyhow!("mae: {e}"))?;
        pooled_abs_sum += mae_scaled * val_set.len() as f64;
        pooled_n += val_set.len();
        rows.push(MaeRow {
            id: model.id,
            signal: spec.output_signal.clone(),
            n: val_set.len(),
            mae_scaled,
            mae_raw,
        });
    }
    let pooled_scaled = pooled_abs_sum / pooled_n as f64;
    let per_model_mean =
        rows.iter().map(|r| r.mae_scaled).sum::<f64>() / rows.len() as f64;

    // MSED per test run, replayed through the engine. Wall time is not
    // reported anywhere, so ticks carry a zero timestamp and the outputs
    // stay byte-identical across invocations.
    let max_window = models.iter().map(|m| m.params.spec().window_len).max().unwrap_or(1);
    let mut engine = Engine::new(
        data.schema.clone(),
        EngineConfig {
            store_capacity: 1,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY.max(max_window),
            min_index_spacing: 0,
        },
    )
    .map_err(|e| anyhow!("engine: {e}"))?;
    for model in models {
        let id = model.id;
        engine
            .register(model.into_registration())
            .map_err(|e| anyhow!("loading model {id}: {e}"))?;
    }

    let mut series: Vec<MsedSeries> = Vec::new();
    let mut short_runs = 0usize;
    for run in &test_runs {
        engine.reset_stream();
        let mut mseds = Vec::with_capacity(run.len());
        for i in 0..run.len() {
            let report = engine.tick(run.row(i), 0.0);
            if let Some(m) = report.msed {
                mseds.push(m);
            }
        }
        if mseds.len() >= 2 {
            series.push(MsedSeries::from_run(&mseds).map_err(|e| anyhow!("msed series: {e}"))?);
        } else {
            short_runs += 1;
        }
    }
    if short_runs > 0 {
        eprintln!("warning: {short_runs} runs too short for MSED analysis; skipped");
    }
    if series.is_empty() {
        bail!("empty test split: no run produced an MSED series");
    }

    let utest = half_run_comparison(&series).map_err(|e| anyhow!("u test: {e}"))?;
    let bins = msed_by_position(&series, args.bins).map_err(|e| anyhow!("binning: {e}"))?;

    fs::create_dir_all(&args.report_dir)
        .with_context(|| format!("creating {}", args.report_dir.display()))?;
    write_mae_csv(&args.report_dir.join("mae_per_model.csv"), &rows, pooled_scaled, pooled_n)?;
    write_utest_csv(&args.report_dir.join("utest.csv"), &utest)?;
    write_position_csv(&args.report_dir.join("msed_by_position.csv"), &bins)?;

    let first_bin_mean = bins.first().and_then(|b| b.mean);
    let last_bin_mean = bins.last().and_then(|b| b.mean);
    let mut summary: Vec<(String, String)> = vec![
        ("mae.pooled_scaled".into(), pooled_scaled.to_string()),
        ("mae.per_model_mean_scaled".into(), per_model_mean.to_string()),
        ("mae.models".into(), rows.len().to_string()),
        ("utest.u_statistic".into(), utest.u_statistic.to_string()),
        ("utest.p_value".into(), utest.p_value.to_string()),
        ("utest.mean_first_half".into(), utest.mean_first.to_string()),
        ("utest.mean_second_half".into(), utest.mean_second.to_string()),
        ("utest.exact".into(), utest.exact.to_string()),
        ("utest.degenerate".into(), utest.degenerate.to_string()),
        ("msed.runs".into(), series.len().to_string()),
    ];
    if let Some(m) = first_bin_mean {
        summary.push(("msed.first_bin_mean".into(), m.to_string()));
    }
    if let Some(m) = last_bin_mean {
        summary.push(("msed.last_bin_mean".into(), m.to_string()));
    }
    write_summary(&args.report_dir.join("summary.txt"), &summary)?;

    println!(
        "evaluate: pooled_val_mae_scaled={pooled_scaled:.6} runs={} \
         mean_first_half={:.4} mean_second_half={:.4} u={} p={:e}",
        series.len(),
        utest.mean_first,
        utest.mean_second,
        utest.u_statistic,
        utest.p_value
    );
    println!("wrote report bundle to {}", args.report_dir.display());
    Ok(())
}

fn signals_match(requested: &str, canonical: &str) -> bool {
    let normalize = |s: &str| -> String {
        s.chars()
            .filter(|c| *c != '_')
            .flat_map(|c| c.to_lowercase())
            .collect()
    };
    requested == canonical || normalize(requested) == normalize(canonical)
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let models = match &args.models {
        Some(path) => {
            require_dir(path)?;
            load_model_files(path)?
        }
        None => Vec::new(),
    };

    let mut block = ConfigBlock::new("bench");
    block.push_opt("models", args.models.as_ref().map(|p| p.display()));
    block.push("model_count", models.len());
    block.push("signals", BENCH_SIGNALS);
    block.push("samples", args.samples);
    block.push("seed", args.seed);
    block.push("store_capacity", args.store_capacity);
    block.push("report_dir", args.report_dir.display());
    block.print();

    let config = SynthConfig {
        channels: bench_channels(BENCH_SIGNALS),
        length: args.samples,
        segment_len: 50,
        seed: args.seed,
        faults: Vec::new(),
    };
    let series = generate_synthetic(&config).map_err(|e| anyhow!("synth: {e}"))?;

    let max_window = models.iter().map(|m| m.params.spec().window_len).max().unwrap_or(1);
    let mut engine = Engine::new(
        series.names.clone(),
        EngineConfig {
            store_capacity: args.store_capacity,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY.max(max_window),
            min_index_spacing: 0,
        },
    )
    .map_err(|e| anyhow!("engine: {e}"))?;
    for model in models {
        let id = model.id;
        engine
            .register(model.into_registration())
            .map_err(|e| anyhow!("loading model {id}: {e}"))?;
    }

    let threads = resolve_threads();
    let started = Instant::now();
    let mut records = Vec::with_capacity(series.run.len());
    for i in 0..series.run.len() {
        let wall_us = started.elapsed().as_secs_f64() * 1e6;
        let tick_started = Instant::now();
        let report =
            engine.tick_with(series.run.row(i), wall_us, |tasks| run_tasks(tasks, threads));
        let duration_us = (tick_started.elapsed().as_secs_f64() * 1e6).max(1e-3);
        records.push(RunRecord {
            run_index: i as u64,
            duration_us,
            models_run: report.models_run,
            msed: report.msed,
        });
    }
    let elapsed_s = started.elapsed().as_secs_f64();

    let summary = duration_histogram(&records, 0.95, 30).map_err(|e| anyhow!("histogram: {e}"))?;
    fs::create_dir_all(&args.report_dir)
        .with_context(|| format!("creating {}", args.report_dir.display()))?;
    write_durations_csv(&args.report_dir.join("durations.csv"), &summary)?;
    write_telemetry(&args.report_dir.join("telemetry.csv"), &records)?;
    let mut entries = duration_summary_entries(&summary);
    entries.push(("bench.ticks".into(), records.len().to_string()));
    entries.push(("bench.models".into(), engine.models_loaded().to_string()));
    entries.push(("bench.elapsed_s".into(), elapsed_s.to_string()));
    entries.push((
        "bench.ticks_per_second".into(),
        (records.len() as f64 / elapsed_s).to_string(),
    ));
    write_summary(&args.report_dir.join("summary.txt"), &entries)?;

    println!(
        "bench: ticks={} models={} mean_us={:.2} median_us={:.2} p95_us={:.2} \
         implied_rate_per_s={:.1} overall_ticks_per_s={:.1}",
        records.len(),
        engine.models_loaded(),
        summary.mean_us,
        summary.median_us,
        summary.p95_us,
        summary.rate_per_second,
        records.len() as f64 / elapsed_s
    );
    println!("wrote {}", args.report_dir.join("durations.csv").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

fn cmd_inspect(args: InspectArgs) -> Result<()> {
    let mut block = ConfigBlock::new("inspect");
    block.push(
        "files",
        args.files
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    block.push("tensors", args.tensors);
    block.print();

    for path in &args.files {
        if !path.is_file() {
            return Err(MissingPath(path.clone()).into());
        }
        let model = crate::model_file::read_model(path)
            .map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let spec = model.params.spec();
        println!(
            "model {}: id={} output={} inputs={} window_len={} filters={} dense_units={} \
             lrelu_slope={} dropout={} seed={} parameters={}",
            path.display(),
            model.id,
            spec.output_signal,
            spec.input_signals.join(","),
            spec.window_len,
            spec.conv_filters,
            spec.dense_units,
            spec.lrelu_slope,
            spec.dropout_rate,
            model.params.seed(),
            model.params.len()
        );
        for (name, pair) in spec.input_signals.iter().zip(&model.input_scaling) {
            println!("  input_scaling {name}: q_low={} q_high={}", pair.q_low, pair.q_high);
        }
        println!(
            "  output_scaling {}: q_low={} q_high={}",
            spec.output_signal, model.output_scaling.q_low, model.output_scaling.q_high
        );
        if args.tensors {
            for def in model.params.layout().tensors() {
                println!("  tensor {} dims={:?} len={}", def.name, def.dims, def.len());
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut channels = synth_channel_set(&args.channels)?;
    scale_channel_noise(&mut channels, args.noise_scale);
    let faults: Vec<FaultSpec> = args
        .faults
        .iter()
        .map(|s| parse_fault(s))
        .collect::<Result<_>>()?;

    let mut block = ConfigBlock::new("synth");
    block.push("out", args.out.display());
    block.push("seed", args.seed);
    block.push("length", args.length);
    block.push("segment_len", args.segment_len);
    block.push("channels", &args.channels);
    block.push("noise_scale", args.noise_scale);
    block.push("faults", args.faults.join(" "));
    block.push("binary", args.binary);
    block.print();

    let config = SynthConfig {
        channels,
        length: args.length,
        segment_len: args.segment_len,
        seed: args.seed,
        faults,
    };
    let series = generate_synthetic(&config).map_err(|e| anyhow!("synth: {e}"))?;

    if args.binary {
        let mut w = BinaryStreamWriter::create(&args.out, &series.names)
            .map_err(|e| anyhow!("{}: {e}", args.out.display()))?;
        for i in 0..series.run.len() {
            w.write_sample(series.run.row(i))
                .map_err(|e| anyhow!("{}: {e}", args.out.display()))?;
        }
        w.finish().map_err(|e| anyhow!("{}: {e}", args.out.display()))?;
    } else {
        let mut w = CsvStreamWriter::create(&args.out, &series.names)
            .map_err(|e| anyhow!("{}: {e}", args.out.display()))?;
        for i in 0..series.run.len() {
            w.write_sample(series.run.row(i))
                .map_err(|e| anyhow!("{}: {e}", args.out.display()))?;
        }
        w.finish().map_err(|e| anyhow!("{}: {e}", args.out.display()))?;
    }

    if !config.faults.is_empty() {
        let mask_path = mask_path_for(&args.out);
        let mut text = String::from("sample_index,fault\n");
        for (i, &hit) in series.fault_mask.iter().enumerate() {
            text.push_str(&format!("{i},{}\n", u8::from(hit)));
        }
        fs::write(&mask_path, text)
            .with_context(|| format!("writing {}", mask_path.display()))?;
        let marked = series.fault_mask.iter().filter(|&&b| b).count();
        println!(
            "synth: {marked} of {} samples under fault influence; mask at {}",
            series.run.len(),
            mask_path.display()
        );
    }
    println!(
        "synth: wrote {} samples x {} channels to {}",
        series.run.len(),
        series.names.len(),
        args.out.display()
    );
    Ok(())
}

/// `stream.csv` -> `stream.mask.csv`.
fn mask_path_for(out: &Path) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => out.with_extension(format!("mask.{ext}")),
        None => out.with_extension("mask.csv"),
    }
}

/// Parses `kind:channel:onset:key=value[,key=value…]`.
fn parse_fault(text: &str) -> Result<FaultSpec> {
    let parts: Vec<&str> = text.splitn(4, ':').collect();
    if parts.len() < 3 {
        bail!("bad fault {text:?}; expected kind:channel:onset[:key=value,…]");
    }
    let kind_name = parts[0];
    let channel = parts[1].to_string();
    let onset: usize = parts[2]
        .parse()
        .map_err(|_| anyhow!("bad fault onset {:?} in {text:?}", parts[2]))?;
    let mut kv: Vec<(String, f64)> = Vec::new();
    if let Some(params) = parts.get(3) {
        for pair in params.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| anyhow!("bad fault parameter {pair:?} in {text:?}"))?;
            let v: f64 = v
                .parse()
                .map_err(|_| anyhow!("bad fault value {v:?} in {text:?}"))?;
            kv.push((k.trim().to_string(), v));
        }
    }
    let get = |key: &str| -> Option<f64> {
        kv.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    };
    let require = |value: Option<f64>, key: &str| -> Result<f64> {
        value.ok_or_else(|| anyhow!("fault {text:?} needs {key}=…"))
    };
    let kind = match kind_name {
        "spike" => FaultKind::Spike {
            amplitude: require(get("amplitude"), "amplitude")?,
            width: require(get("width"), "width")? as usize,
        },
        "regime_shift" => FaultKind::RegimeShift {
            gain: get("gain").unwrap_or(1.0),
            offset: get("offset").unwrap_or(0.0),
            jitter: get("jitter").unwrap_or(0.0),
        },
        "drift" => FaultKind::Drift {
            amplitude: require(get("amplitude"), "amplitude")?,
            ramp: require(get("ramp"), "ramp")? as usize,
        },
        other => bail!("unknown fault kind {other:?}; use spike, regime_shift or drift"),
    };
    Ok(FaultSpec {
        channel,
        onset,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_resolution_accepts_aliases() {
        let schema = cmapss_columns();
        assert_eq!(resolve_signal(&schema, "s_2").unwrap(), 4);
        assert_eq!(resolve_signal(&schema, "s2").unwrap(), 4);
        assert_eq!(resolve_signal(&schema, "S2").unwrap(), 4);
        assert_eq!(resolve_signal(&schema, "setting1").unwrap(), 0);
        assert!(resolve_signal(&schema, "s_99").is_err());
        // `s_21` must not collide with anything under normalisation.
        assert_eq!(resolve_signal(&schema, "s21").unwrap(), 23);
    }

    #[test]
    fn fault_parsing_roundtrips_the_examples() {
        let spike = parse_fault("spike:p30:5000:amplitude=40,width=3").unwrap();
        assert_eq!(spike.channel, "p30");
        assert_eq!(spike.onset, 5000);
        assert_eq!(
            spike.kind,
            FaultKind::Spike {
                amplitude: 40.0,
                width: 3
            }
        );

        let shift = parse_fault("regime_shift:t30:6000:gain=1.5,jitter=2").unwrap();
        assert_eq!(
            shift.kind,
            FaultKind::RegimeShift {
                gain: 1.5,
                offset: 0.0,
                jitter: 2.0
            }
        );

        let drift = parse_fault("drift:tgt:8000:amplitude=60,ramp=4000").unwrap();
        assert_eq!(
            drift.kind,
            FaultKind::Drift {
                amplitude: 60.0,
                ramp: 4000
            }
        );

        assert!(parse_fault("spike:p30:oops:amplitude=1,width=1").is_err());
        assert!(parse_fault("spike:p30:1").is_err()); // missing amplitude
        assert!(parse_fault("wobble:p30:1:x=2").is_err());
    }

    #[test]
    fn default_inputs_cover_the_case_study_map() {
        for (out, ins) in case_study_model_maps() {
            let got = default_inputs(DatasetKind::Synth, out).unwrap();
            assert_eq!(got, ins.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        }
        assert!(default_inputs(DatasetKind::Synth, "nonesuch").is_err());
        assert_eq!(
            default_inputs(DatasetKind::Cmapss, "s_2").unwrap(),
            vec!["setting_1", "setting_2", "setting_3"]
        );
        assert!(default_inputs(DatasetKind::Csv, "x").is_err());
    }

    #[test]
    fn mask_paths_preserve_extension() {
        assert_eq!(
            mask_path_for(Path::new("out/stream.csv")),
            PathBuf::from("out/stream.mask.csv")
        );
        assert_eq!(
            mask_path_for(Path::new("stream")),
            PathBuf::from("stream.mask.csv")
        );
    }
}
