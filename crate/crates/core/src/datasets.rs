//! Dataset ingestion, scaling and splitting.
//!
//! Three data sources feed the engine: the NASA C-MAPSS FD002 turbofan
//! corpus (text files of simulated run-to-failure trajectories), a synthetic
//! multichannel generator with injectable faults, and a small heteroscedastic
//! regression benchmark with known noise. Everything here is a pure
//! transformation — file IO lives in the host crate.
//!
//! Scaling honesty is enforced structurally: quantile pairs can only be
//! fitted through a [`TrainingView`], and the only way to obtain one is
//! [`SplitPlan::training_view`], so test rows cannot leak into scaling or
//! training without deliberately bypassing the API.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math;
use crate::training::SampleSet;

/// Minimum samples per signal before quantile scaling is considered stable.
pub const MIN_SCALING_SAMPLES: usize = 50;

/// Lower quantile used for scaling.
pub const SCALE_Q_LOW: f64 = 0.02;
/// Upper quantile used for scaling.
pub const SCALE_Q_HIGH: f64 = 0.98;

/// Errors raised by parsing, splitting, scaling and generation.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetError {
    /// A data row failed to parse; 1-based line number included.
    MalformedRow { line: usize },
    /// A row had the wrong number of columns; 1-based line number included.
    ColumnCount {
        line: usize,
        expected: usize,
        got: usize,
    },
    /// A unit repeated a cycle index.
    DuplicateCycle { unit: u32, cycle: u32 },
    /// A split produced no usable samples.
    EmptySplit(&'static str),
    /// `fraction_of_run` outside `(0, 1]`.
    BadFraction(f64),
    /// `val_ratio` outside `[0, 1)`.
    BadValRatio(f64),
    /// Fewer than [`MIN_SCALING_SAMPLES`] values available for a signal.
    NotEnoughSamples {
        signal: String,
        got: usize,
        needed: usize,
    },
    /// A signal's 2% and 98% quantiles coincide.
    ConstantSignal { signal: String },
    /// A column index fell outside the data width.
    ColumnOutOfRange { column: usize, width: usize },
    /// Scaling pairs did not match the sample width.
    ScalingWidth { expected: usize, got: usize },
    /// A fault referenced a channel the config does not define.
    UnknownChannel { channel: String },
    /// A fault's effect would extend past the series end or start past it.
    FaultOutOfRange { channel: String },
    /// Two faults on the same channel overlap in time.
    OverlappingFaults { channel: String },
    /// A generator config field was structurally invalid.
    BadConfig(&'static str),
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::MalformedRow { line } => write!(f, "malformed row at line {line}"),
            DatasetError::ColumnCount {
                line,
                expected,
                got,
            } => write!(f, "line {line}: expected {expected} columns, got {got}"),
            DatasetError::DuplicateCycle { unit, cycle } => {
                write!(f, "unit {unit} repeats cycle {cycle}")
            }
            DatasetError::EmptySplit(which) => write!(f, "split produced an empty {which}"),
            DatasetError::BadFraction(v) => {
                write!(f, "fraction_of_run {v} outside (0, 1]")
            }
            DatasetError::BadValRatio(v) => write!(f, "val_ratio {v} outside [0, 1)"),
            DatasetError::NotEnoughSamples {
                signal,
                got,
                needed,
            } => write!(
                f,
                "signal {signal:?} has {got} training samples, needs {needed} for stable quantiles"
            ),
            DatasetError::ConstantSignal { signal } => {
                write!(f, "signal {signal:?} is constant over the training data")
            }
            DatasetError::ColumnOutOfRange { column, width } => {
                write!(f, "column {column} out of range for width {width}")
            }
            DatasetError::ScalingWidth { expected, got } => {
                write!(f, "expected {expected} scaling pairs, got {got}")
            }
            DatasetError::UnknownChannel { channel } => {
                write!(f, "fault references unknown channel {channel:?}")
            }
            DatasetError::FaultOutOfRange { channel } => {
                write!(f, "fault on channel {channel:?} falls outside the series")
            }
            DatasetError::OverlappingFaults { channel } => {
                write!(f, "overlapping faults on channel {channel:?}")
            }
            DatasetError::BadConfig(msg) => write!(f, "invalid generator config: {msg}"),
        }
    }
}

impl core::error::Error for DatasetError {}

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

/// Per-signal affine scaling derived from training-set quantiles:
/// `scaled = (x - q_low) / (q_high - q_low)`. Values outside `[0, 1]` are
/// deliberately permitted — out-of-range excursions are exactly the anomaly
/// signal the engine scores.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingPair {
    /// 2% training quantile.
    pub q_low: f64,
    /// 98% training quantile.
    pub q_high: f64,
}

impl ScalingPair {
    /// The identity scaling.
    pub fn identity() -> ScalingPair {
        ScalingPair {
            q_low: 0.0,
            q_high: 1.0,
        }
    }

    /// Maps a raw value into scaled units.
    #[inline]
    pub fn scale(&self, x: f64) -> f64 {
        (x - self.q_low) / (self.q_high - self.q_low)
    }

    /// Maps a scaled value back to raw units.
    #[inline]
    pub fn unscale(&self, x: f64) -> f64 {
        x * (self.q_high - self.q_low) + self.q_low
    }

    /// Width of the raw interquantile range.
    #[inline]
    pub fn range(&self) -> f64 {
        self.q_high - self.q_low
    }
}

/// Applies one pair per column to a full sample row.
pub fn apply_scaling(sample: &[f64], pairs: &[ScalingPair]) -> Result<Vec<f64>, DatasetError> {
    if sample.len() != pairs.len() {
        return Err(DatasetError::ScalingWidth {
            expected: sample.len(),
            got: pairs.len(),
        });
    }
    Ok(sample
        .iter()
        .zip(pairs)
        .map(|(&x, p)| p.scale(x))
        .collect())
}

// ---------------------------------------------------------------------------
// Run series and splits
// ---------------------------------------------------------------------------

/// One contiguous recording: a unit's cycles with a fixed-width value row per
/// cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    /// Unit (engine) identifier.
    pub unit: u32,
    /// Cycle indices, strictly increasing.
    pub cycles: Vec<u32>,
    /// Columns per row.
    pub width: usize,
    /// Row-major values, `cycles.len() * width` long.
    pub values: Vec<f64>,
}

impl RunSeries {
    /// Number of samples in the run.
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    /// True for a run with no rows.
    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// One sample row.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }
}

/// Splits one run into `[0, at)` and `[at, len)` pieces, preserving cycles.
pub fn split_run(run: &RunSeries, at: usize) -> (RunSeries, RunSeries) {
    let at = at.min(run.len());
    let head = RunSeries {
        unit: run.unit,
        cycles: run.cycles[..at].to_vec(),
        width: run.width,
        values: run.values[..at * run.width].to_vec(),
    };
    let tail = RunSeries {
        unit: run.unit,
        cycles: run.cycles[at..].to_vec(),
        width: run.width,
        values: run.values[at * run.width..].to_vec(),
    };
    (head, tail)
}

/// A `(run, row)` reference into a slice of runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRef {
    /// Index into the run collection.
    pub run: usize,
    /// Row within that run.
    pub row: usize,
}

/// The train/validation assignment over a training pool.
///
/// Only the leading `fraction_of_run` share of every pool run is eligible at
/// all; eligible rows are then assigned to validation independently with
/// probability `val_ratio` by a seeded generator, the rest to training. The
/// partition is disjoint and exhaustive over the eligible rows by
/// construction.
#[derive(Debug, Clone)]
pub struct SplitPlan {
    train: Vec<SampleRef>,
    validation: Vec<SampleRef>,
    /// Leading share of each run that was eligible.
    pub fraction_of_run: f64,
    /// Probability with which eligible rows went to validation.
    pub val_ratio: f64,
    /// Seed of the assignment generator.
    pub seed: u64,
}

/// Read access to the training rows; the only gateway to scale fitting.
pub struct TrainingView<'a> {
    view: SampleView<'a>,
}

impl<'a> core::ops::Deref for TrainingView<'a> {
    type Target = SampleView<'a>;
    fn deref(&self) -> &SampleView<'a> {
        &self.view
    }
}

/// Read access to an assigned subset of rows.
pub struct SampleView<'a> {
    runs: &'a [RunSeries],
    refs: &'a [SampleRef],
}

impl SplitPlan {
    /// Number of training rows.
    pub fn train_len(&self) -> usize {
        self.train.len()
    }

    /// Number of validation rows.
    pub fn validation_len(&self) -> usize {
        self.validation.len()
    }

    /// The training rows, against the same run collection the plan was
    /// built from.
    pub fn training_view<'a>(&'a self, runs: &'a [RunSeries]) -> TrainingView<'a> {
        TrainingView {
            view: SampleView {
                runs,
                refs: &self.train,
            },
        }
    }

    /// The validation rows.
    pub fn validation_view<'a>(&'a self, runs: &'a [RunSeries]) -> SampleView<'a> {
        SampleView {
            runs,
            refs: &self.validation,
        }
    }
}

impl<'a> SampleView<'a> {
    /// Number of referenced rows.
    pub fn len(&self) -> usize {
        self.refs.len()
    }

    /// True when no rows are referenced.
    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    /// All values of one column across the referenced rows.
    pub fn column_values(&self, column: usize) -> Result<Vec<f64>, DatasetError> {
        let mut out = Vec::with_capacity(self.refs.len());
        for r in self.refs {
            let run = &self.runs[r.run];
            if column >= run.width {
                return Err(DatasetError::ColumnOutOfRange {
                    column,
                    width: run.width,
                });
            }
            out.push(run.row(r.row)[column]);
        }
        Ok(out)
    }

    /// Materialises a scaled `(window, target)` set for one model.
    ///
    /// Each referenced row closes a window of `window_len` consecutive rows
    /// of the same run; rows too close to a run start to fill a window are
    /// skipped. Inputs and the target are scaled by the provided pairs.
    pub fn make_set(
        &self,
        input_columns: &[usize],
        input_scaling: &[ScalingPair],
        output_column: usize,
        output_scaling: ScalingPair,
        window_len: usize,
    ) -> Result<SampleSet, DatasetError> {
        if input_scaling.len() != input_columns.len() {
            return Err(DatasetError::ScalingWidth {
                expected: input_columns.len(),
                got: input_scaling.len(),
            });
        }
        let s = input_columns.len();
        let mut set = SampleSet::new(window_len, s);
        let mut window = vec![0.0; window_len * s];
        for r in self.refs {
            let run = &self.runs[r.run];
            if r.row + 1 < window_len {
                continue;
            }
            for (ci, &col) in input_columns.iter().enumerate() {
                if col >= run.width {
                    return Err(DatasetError::ColumnOutOfRange {
                        column: col,
                        width: run.width,
                    });
                }
            // Window rows run oldest to newest, ending at the referenced row.
                for t in 0..window_len {
                    let row = r.row + 1 - window_len + t;
                    window[t * s + ci] = input_scaling[ci].scale(run.row(row)[col]);
                }
            }
            if output_column >= run.width {
                return Err(DatasetError::ColumnOutOfRange {
                    column: output_column,
                    width: run.width,
                });
            }
            let target = output_scaling.scale(run.row(r.row)[output_column]);
            set.push(&window, target).expect("window shape is fixed");
        }
        if set.is_empty() {
            return Err(DatasetError::EmptySplit("windowed sample set"));
        }
        Ok(set)
    }
}

/// Assigns the leading `fraction_of_run` of every run to the train/validation
/// pool and draws the validation subset at `val_ratio`.
pub fn cmapss_split(
    runs: &[RunSeries],
    fraction_of_run: f64,
    val_ratio: f64,
    seed: u64,
) -> Result<SplitPlan, DatasetError> {
    if !(fraction_of_run > 0.0 && fraction_of_run <= 1.0) {
        return Err(DatasetError::BadFraction(fraction_of_run));
    }
    if !(0.0..1.0).contains(&val_ratio) {
        return Err(DatasetError::BadValRatio(val_ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (run_index, run) in runs.iter().enumerate() {
        let eligible = libm::ceil(run.len() as f64 * fraction_of_run) as usize;
        for row in 0..eligible.min(run.len()) {
            let r = SampleRef {
                run: run_index,
                row,
            };
            let draw: f64 = rng.gen();
            if draw < val_ratio {
                validation.push(r);
            } else {
                train.push(r);
            }
        }
    }
    if train.is_empty() {
        return Err(DatasetError::EmptySplit("training set"));
    }
    Ok(SplitPlan {
        train,
        validation,
        fraction_of_run,
        val_ratio,
        seed,
    })
}

/// Fits 2%/98% linear-interpolation quantile pairs for the given columns
/// over the training rows only.
pub fn fit_scaling(
    view: &TrainingView<'_>,
    columns: &[usize],
    schema: &[String],
) -> Result<Vec<ScalingPair>, DatasetError> {
    let mut pairs = Vec::with_capacity(columns.len());
    for &col in columns {
        let name = schema
            .get(col)
            .cloned()
            .unwrap_or_else(|| col.to_string());
        let mut values = view.column_values(col)?;
        if values.len() < MIN_SCALING_SAMPLES {
            return Err(DatasetError::NotEnoughSamples {
                signal: name,
                got: values.len(),
                needed: MIN_SCALING_SAMPLES,
            });
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("non-finite signal value"));
        let q_low = math::quantile_sorted(&values, SCALE_Q_LOW);
        let q_high = math::quantile_sorted(&values, SCALE_Q_HIGH);
        if q_high <= q_low {
            return Err(DatasetError::ConstantSignal { signal: name });
        }
        pairs.push(ScalingPair { q_low, q_high });
    }
    Ok(pairs)
}

// ---------------------------------------------------------------------------
// C-MAPSS parsing
// ---------------------------------------------------------------------------

/// Column count of the C-MAPSS text format: unit, cycle, 3 settings,
/// 21 sensors.
pub const CMAPSS_FILE_COLUMNS: usize = 26;
/// Data columns kept per row (settings + sensors).
pub const CMAPSS_DATA_WIDTH: usize = 24;

/// Names for the 24 data columns.
pub fn cmapss_columns() -> Vec<String> {
    let mut names = Vec::with_capacity(CMAPSS_DATA_WIDTH);
    for i in 1..=3 {
        names.push(alloc::format!("setting_{i}"));
    }
    for i in 1..=21 {
        names.push(alloc::format!("s_{i}"));
    }
    names
}

/// Result of parsing one C-MAPSS file.
#[derive(Debug, Clone)]
pub struct CmapssFile {
    /// Runs grouped by unit, ordered by unit id.
    pub runs: Vec<RunSeries>,
    /// True when any rows arrived out of cycle order and were re-sorted.
    pub reordered: bool,
}

/// Parses C-MAPSS text: 26 whitespace-separated columns per row.
pub fn parse_cmapss(text: &str) -> Result<CmapssFile, DatasetError> {
    struct Pending {
        unit: u32,
        rows: Vec<(u32, Vec<f64>)>,
    }
    let mut units: Vec<Pending> = Vec::new();
    let mut reordered = false;
    for (line_index, line) in text.lines().enumerate() {
        let line_no = line_index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != CMAPSS_FILE_COLUMNS {
            return Err(DatasetError::ColumnCount {
                line: line_no,
                expected: CMAPSS_FILE_COLUMNS,
                got: fields.len(),
            });
        }
        let unit: u32 = fields[0]
            .parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0 && *v >= 1.0)
            .map(|v| v as u32)
            .ok_or(DatasetError::MalformedRow { line: line_no })?;
        let cycle: u32 = fields[1]
            .parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0 && *v >= 1.0)
            .map(|v| v as u32)
            .ok_or(DatasetError::MalformedRow { line: line_no })?;
        let mut row = Vec::with_capacity(CMAPSS_DATA_WIDTH);
        for field in &fields[2..] {
            let value: f64 = field
                .parse()
                .map_err(|_| DatasetError::MalformedRow { line: line_no })?;
            if !value.is_finite() {
                return Err(DatasetError::MalformedRow { line: line_no });
            }
            row.push(value);
        }
        let slot = match units.iter_mut().find(|p| p.unit == unit) {
            Some(p) => p,
            None => {
                units.push(Pending {
                    unit,
                    rows: Vec::new(),
                });
                units.last_mut().expect("just pushed")
            }
        };
        if let Some((last_cycle, _)) = slot.rows.last() {
            if cycle <= *last_cycle {
                reordered = true;
            }
        }
        slot.rows.push((cycle, row));
    }
    units.sort_by_key(|p| p.unit);
    let mut runs = Vec::with_capacity(units.len());
    for mut pending in units {
        pending.rows.sort_by_key(|(cycle, _)| *cycle);
        for pair in pending.rows.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(DatasetError::DuplicateCycle {
                    unit: pending.unit,
                    cycle: pair[0].0,
                });
            }
        }
        let mut cycles = Vec::with_capacity(pending.rows.len());
        let mut values = Vec::with_capacity(pending.rows.len() * CMAPSS_DATA_WIDTH);
        for (cycle, row) in pending.rows {
            cycles.push(cycle);
            values.extend_from_slice(&row);
        }
        runs.push(RunSeries {
            unit: pending.unit,
            cycles,
            width: CMAPSS_DATA_WIDTH,
            values,
        });
    }
    Ok(CmapssFile { runs, reordered })
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

/// One synthetic channel: a quadratic response to the latent driver plus
/// Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    /// Channel name, unique within a config.
    pub name: String,
    /// Response intercept.
    pub offset: f64,
    /// Linear response to the driver.
    pub gain: f64,
    /// Quadratic response to the driver.
    pub curve: f64,
    /// Standard deviation of the additive noise.
    pub noise_sd: f64,
}

/// The shape of an injected fault.
#[derive(Debug, Clone, PartialEq)]
pub enum FaultKind {
    /// Additive pulse over `[onset, onset + width)`.
    Spike { amplitude: f64, width: usize },
    /// Persistent relationship change from onset onwards:
    /// `x -> offset + gain * x + jitter * noise`.
    RegimeShift { gain: f64, offset: f64, jitter: f64 },
    /// Additive ramp reaching `amplitude` after `ramp` samples, then held to
    /// the end of the series (degradation-style).
    Drift { amplitude: f64, ramp: usize },
}

/// A fault bound to a channel and an onset sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultSpec {
    /// Channel the fault acts on.
    pub channel: String,
    /// First affected sample index.
    pub onset: usize,
    /// Fault shape.
    pub kind: FaultKind,
}

impl FaultSpec {
    /// The samples this fault affects, as `[start, end)`.
    fn effect_interval(&self, length: usize) -> (usize, usize) {
        match self.kind {
            FaultKind::Spike { width, .. } => (self.onset, self.onset + width),
            FaultKind::RegimeShift { .. } | FaultKind::Drift { .. } => (self.onset, length),
        }
    }
}

/// Configuration of one synthetic stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Channels, in column order.
    pub channels: Vec<ChannelSpec>,
    /// Samples to generate.
    pub length: usize,
    /// Samples between latent-driver waypoints.
    pub segment_len: usize,
    /// Seeds the driver, the noise and any fault jitter.
    pub seed: u64,
    /// Faults to inject.
    pub faults: Vec<FaultSpec>,
}

/// A generated stream plus its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticSeries {
    /// Channel names, in column order.
    pub names: Vec<String>,
    /// The generated samples as a single run (unit 0).
    pub run: RunSeries,
    /// True at every sample where any channel is under fault influence.
    pub fault_mask: Vec<bool>,
    /// The latent driver, for diagnostics.
    pub driver: Vec<f64>,
}

/// Generates a correlated multichannel stream from a piecewise-linear latent
/// driver ("flight profile"), then applies faults.
///
/// Reproducibility contract: all randomness comes from one generator seeded
/// with `config.seed`, consumed in a fixed order — driver waypoints first,
/// then per-sample noise (sample-major, channel-minor; drawn even for
/// channels with `noise_sd == 0`), then fault jitter in fault order.
pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticSeries, DatasetError> {
    if config.channels.is_empty() {
        return Err(DatasetError::BadConfig("at least one channel required"));
    }
    if config.length == 0 {
        return Err(DatasetError::BadConfig("length must be nonzero"));
    }
    if config.segment_len == 0 {
        return Err(DatasetError::BadConfig("segment_len must be nonzero"));
    }
    for (i, ch) in config.channels.iter().enumerate() {
        if config.channels[..i].iter().any(|c| c.name == ch.name) {
            return Err(DatasetError::BadConfig("duplicate channel name"));
        }
    }
    let n = config.length;
    let width = config.channels.len();

    // Validate faults: known channels, in range, non-overlapping per channel.
    let channel_index = |name: &str| config.channels.iter().position(|c| c.name == name);
    let mut per_channel: Vec<Vec<(usize, usize)>> = vec![Vec::new(); width];
    for fault in &config.faults {
        let ci = channel_index(&fault.channel).ok_or_else(|| DatasetError::UnknownChannel {
            channel: fault.channel.clone(),
        })?;
        if let FaultKind::Spike { width: w, .. } = fault.kind {
            if w == 0 {
                return Err(DatasetError::BadConfig("spike width must be nonzero"));
            }
        }
        if let FaultKind::Drift { ramp, .. } = fault.kind {
            if ramp == 0 {
                return Err(DatasetError::BadConfig("drift ramp must be nonzero"));
            }
        }
        let (start, end) = fault.effect_interval(n);
        if start >= n || end > n {
            return Err(DatasetError::FaultOutOfRange {
                channel: fault.channel.clone(),
            });
        }
        per_channel[ci].push((start, end));
    }
    for (ci, intervals) in per_channel.iter_mut().enumerate() {
        intervals.sort_unstable();
        for pair in intervals.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(DatasetError::OverlappingFaults {
                    channel: config.channels[ci].name.clone(),
                });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Latent driver: waypoints every segment_len samples, linear in between.
    let waypoints = n.div_ceil(config.segment_len) + 1;
    let levels: Vec<f64> = (0..waypoints).map(|_| rng.gen_range(0.1..0.9)).collect();
    let mut driver = Vec::with_capacity(n);
    for i in 0..n {
        let seg = i / config.segment_len;
        let frac = (i % config.segment_len) as f64 / config.segment_len as f64;
        driver.push(levels[seg] + (levels[seg + 1] - levels[seg]) * frac);
    }

    // Base channels.
    let mut values = vec![0.0; n * width];
    for i in 0..n {
        let d = driver[i];
        for (c, ch) in config.channels.iter().enumerate() {
            let eps: f64 = StandardNormal.sample(&mut rng);
            values[i * width + c] = ch.offset + ch.gain * d + ch.curve * d * d + ch.noise_sd * eps;
        }
    }

    // Faults, in declaration order.
    let mut fault_mask = vec![false; n];
    for fault in &config.faults {
        let ci = channel_index(&fault.channel).expect("validated above");
        let (start, end) = fault.effect_interval(n);
        match fault.kind {
            FaultKind::Spike { amplitude, .. } => {
                for i in start..end {
                    values[i * width + ci] += amplitude;
                }
            }
            FaultKind::RegimeShift {
                gain,
                offset,
                jitter,
            } => {
                for i in start..end {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    let x = values[i * width + ci];
                    values[i * width + ci] = offset + gain * x + jitter * eps;
                }
            }
            FaultKind::Drift { amplitude, ramp } => {
                for i in start..end {
                    let progress = ((i - start + 1) as f64 / ramp as f64).min(1.0);
                    values[i * width + ci] += amplitude * progress;
                }
            }
        }
        for flag in &mut fault_mask[start..end] {
            *flag = true;
        }
    }

    Ok(SyntheticSeries {
        names: config.channels.iter().map(|c| c.name.clone()).collect(),
        run: RunSeries {
            unit: 0,
            cycles: (1..=n as u32).collect(),
            width,
            values,
        },
        fault_mask,
        driver,
    })
}

/// The six-channel engine-analog configuration used by the synthetic fault
/// studies: ambient conditions plus four interdependent engine channels.
pub fn engine_channels() -> Vec<ChannelSpec> {
    let ch = |name: &str, offset: f64, gain: f64, curve: f64, noise_sd: f64| ChannelSpec {
        name: name.to_string(),
        offset,
        gain,
        curve,
        noise_sd,
    };
    vec![
        ch("outside_temp", 15.0, -20.0, 0.0, 0.3),
        ch("outside_pressure", 101.0, -30.0, 5.0, 0.4),
        ch("n1", 40.0, 55.0, 0.0, 0.5),
        ch("p30", 120.0, 180.0, 40.0, 1.5),
        ch("t30", 350.0, 420.0, -60.0, 2.0),
        ch("tgt", 400.0, 300.0, 80.0, 2.5),
    ]
}

/// The four case-study model maps over [`engine_channels`]: each predicts
/// one engine channel from three related ones.
pub fn case_study_model_maps() -> Vec<(&'static str, [&'static str; 3])> {
    vec![
        ("n1", ["outside_temp", "outside_pressure", "tgt"]),
        ("p30", ["outside_pressure", "n1", "t30"]),
        ("t30", ["outside_temp", "n1", "p30"]),
        ("tgt", ["n1", "p30", "t30"]),
    ]
}

/// Generic channels for throughput benchmarks: `count` mildly varied
/// responses named `sig_00`, `sig_01`, ...
pub fn bench_channels(count: usize) -> Vec<ChannelSpec> {
    (0..count)
        .map(|i| ChannelSpec {
            name: alloc::format!("sig_{i:02}"),
            offset: 10.0 + 3.0 * i as f64,
            gain: 5.0 + (i % 7) as f64,
            curve: (i % 3) as f64 - 1.0,
            noise_sd: 0.2 + 0.05 * (i % 5) as f64,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Heteroscedastic benchmark
// ---------------------------------------------------------------------------

/// A regression set whose noise level is a known function of the input,
/// for calibration testing.
#[derive(Debug, Clone)]
pub struct HeteroscedasticData {
    /// `(window, target)` pairs with `T = 1`, `S = 2`.
    pub set: SampleSet,
    /// Mean of the two inputs per sample.
    pub x_bar: Vec<f64>,
    /// True noise standard deviation per sample.
    pub true_sigma: Vec<f64>,
}

/// Draws `u, v ~ U(0, 1)` and emits `y = sin(x) + sigma(x) * eps` with
/// `x = (u + v) / 2` and `sigma(x) = 0.05 + 0.2 * x`: noise grows linearly
/// with the input level, so a calibrated model must track it.
pub fn generate_heteroscedastic(n: usize, seed: u64) -> HeteroscedasticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = SampleSet::new(1, 2);
    let mut x_bar = Vec::with_capacity(n);
    let mut true_sigma = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        let x = 0.5 * (u + v);
        let sigma = 0.05 + 0.2 * x;
        let eps: f64 = StandardNormal.sample(&mut rng);
        let y = math::sin(x) + sigma * eps;
        set.push(&[u, v], y).expect("fixed shape");
        x_bar.push(x);
        true_sigma.push(sigma);
    }
    HeteroscedasticData {
        set,
        x_bar,
        true_sigma,
    }
}
