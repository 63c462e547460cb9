//! The streaming engine: buffer, ensemble tick, SED/MSED scoring and the
//! bounded top-K store.
//!
//! Every accepted sample triggers one *tick*: each loaded model extracts its
//! window from the ring buffer, runs a deterministic forward pass and scores
//! the newest value of its target signal with the squared standardised error
//! SED = (y − μ)² / σ². The per-tick anomaly score MSED is the arithmetic
//! mean of the per-model SEDs, summed in model-id order so reruns are
//! bit-identical. A [`PriorityStore`] keeps the K highest-MSED windows seen
//! since the last drain.
//!
//! The engine is clock-free: hosts pass wall time in and measure tick
//! durations themselves (see [`RunRecord`]). Inference inside one tick is
//! expressed as a slice of independent [`InferenceTask`]s, so a std host can
//! fan them out across threads while embedded hosts run them in place.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::datasets::ScalingPair;
use crate::network::{
    infer_into, Activations, ModelParams, NetworkError, Prediction, Window, WindowOrigin,
};

/// Identifier of a loaded model, unique within an engine.
pub type ModelId = u64;

/// Default bounded-store capacity K.
pub const DEFAULT_STORE_CAPACITY: usize = 50;
/// Default ring-buffer capacity in samples.
pub const DEFAULT_BUFFER_CAPACITY: usize = 256;

/// Variance floor applied when scoring. A model reporting a standard
/// deviation below 1e-6 scaled units has left its calibrated regime; the
/// floor keeps SED finite while telemetry counts how often it engaged.
pub const SIGMA_SQUARED_FLOOR: f64 = 1e-12;

/// Squared standardised Euclidean distance of one observation from a
/// prediction: `(y − μ)² / σ²`. No square root is taken — rankings are
/// unaffected and the quotient is cheaper to stream.
#[inline]
pub fn sed(y: f64, prediction: &Prediction) -> f64 {
    let r = y - prediction.mu;
    (r * r) / (prediction.sigma * prediction.sigma)
}

/// [`sed`] with the engine's variance floor; the flag reports whether the
/// floor engaged.
#[inline]
fn sed_floored(y: f64, prediction: &Prediction) -> (f64, bool) {
    let r = y - prediction.mu;
    let var = prediction.sigma * prediction.sigma;
    if var < SIGMA_SQUARED_FLOOR {
        ((r * r) / SIGMA_SQUARED_FLOOR, true)
    } else {
        ((r * r) / var, false)
    }
}

/// Errors raised when configuring an engine or registering models.
#[derive(Debug, Clone, PartialEq)]
pub enum RuntimeError {
    /// The stream schema was empty or repeated a signal name.
    BadSchema(&'static str),
    /// A model id is already registered.
    DuplicateModel(ModelId),
    /// A model references a signal the stream schema does not carry.
    UnknownSignal { model: ModelId, signal: String },
    /// A model's window does not fit in the ring buffer.
    WindowExceedsBuffer {
        model: ModelId,
        window_len: usize,
        capacity: usize,
    },
    /// A model's input scaling table does not match its input count.
    ScalingWidth {
        model: ModelId,
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeError::BadSchema(msg) => write!(f, "bad stream schema: {msg}"),
            RuntimeError::DuplicateModel(id) => write!(f, "model id {id} already loaded"),
            RuntimeError::UnknownSignal { model, signal } => {
                write!(f, "model {model} references missing signal {signal:?}")
            }
            RuntimeError::WindowExceedsBuffer {
                model,
                window_len,
                capacity,
            } => write!(
                f,
                "model {model} needs a {window_len}-sample window but the buffer holds {capacity}"
            ),
            RuntimeError::ScalingWidth {
                model,
                expected,
                got,
            } => write!(
                f,
                "model {model} has {expected} inputs but {got} scaling pairs"
            ),
        }
    }
}

impl core::error::Error for RuntimeError {}

// ---------------------------------------------------------------------------
// Input buffer
// ---------------------------------------------------------------------------

/// Fixed-capacity ring of the most recent stream samples, oldest evicted
/// first. Rows are stored raw; models scale on extraction.
#[derive(Debug, Clone)]
pub struct InputBuffer {
    width: usize,
    capacity: usize,
    head: usize,
    len: usize,
    values: Vec<f64>,
}

impl InputBuffer {
    /// An empty buffer of `capacity` rows by `width` columns.
    pub fn new(capacity: usize, width: usize) -> InputBuffer {
        InputBuffer {
            width,
            capacity,
            head: 0,
            len: 0,
            values: vec![0.0; capacity * width],
        }
    }

    /// Rows currently held.
    pub fn len(&self) -> usize {
        self.len
    }

    /// True when no rows are held.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Maximum rows held at once.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Columns per row.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Appends a row, evicting the oldest when full.
    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.width);
        let slot = (self.head + self.len) % self.capacity;
        self.values[slot * self.width..(slot + 1) * self.width].copy_from_slice(row);
        if self.len == self.capacity {
            self.head = (self.head + 1) % self.capacity;
        } else {
            self.len += 1;
        }
    }

    /// The row `k` places from the newest (`k = 0` is the newest).
    pub fn row_from_end(&self, k: usize) -> &[f64] {
        debug_assert!(k < self.len);
        let slot = (self.head + self.len - 1 - k) % self.capacity;
        &self.values[slot * self.width..(slot + 1) * self.width]
    }

    /// Drops all rows.
    pub fn clear(&mut self) {
        self.head = 0;
        self.len = 0;
    }
}

// ---------------------------------------------------------------------------
// Scored windows and the priority store
// ---------------------------------------------------------------------------

/// A window of raw stream data together with the anomaly score that earned
/// its place in the store.
///
/// The window spans *all* stream signals — stored data need not be limited
/// to any model's input subset — over the longest window among the models
/// that scored it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWindow {
    /// Raw rows of every stream signal; `origin` carries the stream segment
    /// and the end sample index.
    pub window: Window,
    /// Arithmetic mean of `per_model_sed` values.
    pub msed: f64,
    /// Per-model SED in ascending model-id order.
    pub per_model_sed: Vec<(ModelId, f64)>,
    /// Host-supplied wall-clock time of the closing sample, in microseconds.
    pub wall_time_us: f64,
}

impl ScoredWindow {
    /// Index of the sample that closed this window.
    pub fn end_sample_index(&self) -> u64 {
        self.window.origin.end_sample
    }
}

/// One tick's worth of host telemetry: who ran, for how long, and how
/// anomalous the result was. Produced by hosts (the core is clock-free).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    /// Ordinal of the tick within the run.
    pub run_index: u64,
    /// Wall-clock duration of the tick in microseconds; always positive.
    pub duration_us: f64,
    /// Models that produced a SED this tick.
    pub models_run: usize,
    /// The tick's MSED, absent when no model ran.
    pub msed: Option<f64>,
}

/// Ranks stored windows best-first: higher MSED wins, ties go to the
/// earlier end index. Doubles as the heap order (the maximum under the
/// reversed comparison is the most evictable item).
fn rank(a: &ScoredWindow, b: &ScoredWindow) -> Ordering {
    b.msed
        .total_cmp(&a.msed)
        .then_with(|| a.end_sample_index().cmp(&b.end_sample_index()))
}

#[derive(Debug)]
struct HeapEntry(ScoredWindow);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Rank order directly: best-ranked windows are the least, so the
        // heap maximum is the most evictable and the ascending sorted vec
        // is already best-first.
        rank(&self.0, &other.0)
    }
}

/// Bounded store of the K highest-MSED windows seen since the last drain.
///
/// Ties at the eviction boundary retain the window with the earlier end
/// index, so the contents always equal the top K of a full sort by
/// (MSED descending, end index ascending) regardless of offer order.
#[derive(Debug)]
pub struct PriorityStore {
    capacity: usize,
    heap: alloc::collections::BinaryHeap<HeapEntry>,
}

impl PriorityStore {
    /// An empty store that will hold at most `capacity` windows.
    pub fn new(capacity: usize) -> PriorityStore {
        PriorityStore {
            capacity,
            heap: alloc::collections::BinaryHeap::with_capacity(capacity.saturating_add(1)),
        }
    }

    /// Windows currently held.
    pub fn len(&self) -> usize {
        self.heap.len()
    }

    /// True when nothing is held.
    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Maximum windows held at once.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// The lowest MSED currently held, if any.
    pub fn min_msed(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.0.msed)
    }

    /// Whether a window with this score and end index would be accepted.
    pub fn would_accept(&self, msed: f64, end_sample_index: u64) -> bool {
        if !msed.is_finite() || self.capacity == 0 {
            return false;
        }
        if self.heap.len() < self.capacity {
            return true;
        }
        let worst = self.heap.peek().expect("full store is non-empty");
        match msed.total_cmp(&worst.0.msed) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => end_sample_index < worst.0.end_sample_index(),
        }
    }

    /// Offers a window; returns whether it was kept. When full, the
    /// candidate must strictly beat the current worst (equal scores keep
    /// the earlier-ending window).
    pub fn offer(&mut self, candidate: ScoredWindow) -> bool {
        if !self.would_accept(candidate.msed, candidate.end_sample_index()) {
            return false;
        }
        self.heap.push(HeapEntry(candidate));
        if self.heap.len() > self.capacity {
            self.heap.pop();
        }
        true
    }

    /// The held windows in arbitrary order.
    pub fn iter(&self) -> impl Iterator<Item = &ScoredWindow> {
        self.heap.iter().map(|e| &e.0)
    }

    /// Removes and returns everything, best first (MSED descending, ties by
    /// ascending end index).
    pub fn drain(&mut self) -> Vec<ScoredWindow> {
        let heap = core::mem::take(&mut self.heap);
        // `HeapEntry`'s order is reversed rank, so the ascending sorted vec
        // is already best-first.
        heap.into_sorted_vec().into_iter().map(|e| e.0).collect()
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Engine knobs. Defaults: a 50-window store, a 256-sample buffer, and no
/// index-spacing filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    /// Store capacity K.
    pub store_capacity: usize,
    /// Ring buffer capacity in samples; must cover the longest model window.
    pub buffer_capacity: usize,
    /// When nonzero, a candidate window is skipped (not offered) if the
    /// store already holds a window whose end index is nearer than this.
    /// Off by default: the store's top-K guarantee is exact only when 0.
    pub min_index_spacing: u64,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        EngineConfig {
            store_capacity: DEFAULT_STORE_CAPACITY,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            min_index_spacing: 0,
        }
    }
}

/// A model plus everything needed to run it against the stream: parameters
/// and the scaling pairs it was trained under. Input/output signal names
/// come from the parameter spec and are resolved against the stream schema
/// at registration.
#[derive(Debug, Clone)]
pub struct ModelRegistration {
    /// Engine-unique id.
    pub id: ModelId,
    /// Trained parameters (carrying the structural spec).
    pub params: ModelParams,
    /// Scaling for each input signal, in spec order.
    pub input_scaling: Vec<ScalingPair>,
    /// Scaling for the predicted signal.
    pub output_scaling: ScalingPair,
}

/// A registered model with its schema-resolved column indexes.
struct EngineSlot {
    id: ModelId,
    params: ModelParams,
    input_columns: Vec<usize>,
    output_column: usize,
    input_scaling: Vec<ScalingPair>,
    output_scaling: ScalingPair,
    // Per-slot scratch so the tick path allocates nothing.
    acts: Activations,
    window: Vec<f64>,
    runnable: bool,
    result: Option<Result<Prediction, NetworkError>>,
}

/// One model's forward pass within a tick, independent of every other
/// task in the slice. Hosts may run tasks in any order, concurrently or
/// not; each must be run exactly once.
pub struct InferenceTask<'a> {
    id: ModelId,
    params: &'a ModelParams,
    window: &'a [f64],
    acts: &'a mut Activations,
    result: &'a mut Option<Result<Prediction, NetworkError>>,
}

impl InferenceTask<'_> {
    /// The model this task runs.
    pub fn model_id(&self) -> ModelId {
        self.id
    }

    /// Executes the forward pass and records the outcome.
    pub fn run(&mut self) {
        *self.result = Some(infer_into(self.params, self.window, self.acts));
    }
}

/// Counters accumulated over an engine's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Telemetry {
    /// Ticks attempted (accepted or rejected samples).
    pub ticks: u64,
    /// Samples appended to the buffer.
    pub samples_accepted: u64,
    /// Samples rejected as malformed.
    pub samples_rejected: u64,
    /// Sum over ticks of models that produced a SED.
    pub models_run: u64,
    /// Times the variance floor engaged.
    pub sigma_floor_hits: u64,
    /// Forward passes that failed or were never run by the host.
    pub model_faults: u64,
    /// Windows accepted by the store.
    pub windows_stored: u64,
    /// Candidates skipped by the index-spacing filter.
    pub windows_skipped_spacing: u64,
}

/// What one tick did.
#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    /// Index assigned to the sample, or `None` if it was rejected.
    pub sample_index: Option<u64>,
    /// Models that produced a SED.
    pub models_run: usize,
    /// Mean of the per-model SEDs, absent when no model ran.
    pub msed: Option<f64>,
    /// Per-model outcome in ascending id order; `None` marks a model that
    /// was skipped (insufficient history) or faulted.
    pub per_model: Vec<(ModelId, Option<f64>)>,
    /// Whether a window entered the store this tick.
    pub stored: bool,
    /// Variance-floor engagements this tick.
    pub sigma_floor_hits: u32,
    /// Failed forward passes this tick.
    pub model_faults: u32,
}

impl TickReport {
    /// True when the sample passed validation.
    pub fn accepted(&self) -> bool {
        self.sample_index.is_some()
    }
}

/// The streaming engine: schema, buffer, registry, store and counters.
///
/// Per-model SED is a pure function of that model and the stream history;
/// registering or unloading other models never changes it. MSED is the mean
/// of the per-model SEDs accumulated in ascending model-id order, so a given
/// stream and registry always reproduce bit-identical scores.
pub struct Engine {
    schema: Vec<String>,
    config: EngineConfig,
    buffer: InputBuffer,
    slots: Vec<EngineSlot>,
    store: PriorityStore,
    next_sample_index: u64,
    stream_index: u64,
    telemetry: Telemetry,
}

impl Engine {
    /// An engine for a stream carrying the named signals, in column order.
    pub fn new(schema: Vec<String>, config: EngineConfig) -> Result<Engine, RuntimeError> {
        if schema.is_empty() {
            return Err(RuntimeError::BadSchema("no signals"));
        }
        for (i, name) in schema.iter().enumerate() {
            if schema[..i].contains(name) {
                return Err(RuntimeError::BadSchema("duplicate signal name"));
            }
        }
        if config.buffer_capacity == 0 {
            return Err(RuntimeError::BadSchema("buffer capacity must be nonzero"));
        }
        let buffer = InputBuffer::new(config.buffer_capacity, schema.len());
        let store = PriorityStore::new(config.store_capacity);
        Ok(Engine {
            schema,
            config,
            buffer,
            slots: Vec::new(),
            store,
            next_sample_index: 0,
            stream_index: 0,
            telemetry: Telemetry::default(),
        })
    }

    /// The stream signal names.
    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    /// The engine configuration.
    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Lifetime counters.
    pub fn telemetry(&self) -> &Telemetry {
        &self.telemetry
    }

    /// The bounded store.
    pub fn store(&self) -> &PriorityStore {
        &self.store
    }

    /// Ids of the loaded models, ascending.
    pub fn model_ids(&self) -> Vec<ModelId> {
        self.slots.iter().map(|s| s.id).collect()
    }

    /// Number of loaded models.
    pub fn models_loaded(&self) -> usize {
        self.slots.len()
    }

    /// Index the next accepted sample will get.
    pub fn next_sample_index(&self) -> u64 {
        self.next_sample_index
    }

    /// Current stream segment counter.
    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Registers a model. Fails on duplicate ids, on signals missing from
    /// the schema, on windows longer than the buffer, and on scaling-table
    /// width mismatches; the registry is untouched on failure.
    pub fn register(&mut self, registration: ModelRegistration) -> Result<(), RuntimeError> {
        let ModelRegistration {
            id,
            params,
            input_scaling,
            output_scaling,
        } = registration;
        if self.slots.iter().any(|s| s.id == id) {
            return Err(RuntimeError::DuplicateModel(id));
        }
        let spec = params.spec();
        if spec.window_len > self.buffer.capacity() {
            return Err(RuntimeError::WindowExceedsBuffer {
                model: id,
                window_len: spec.window_len,
                capacity: self.buffer.capacity(),
            });
        }
        if input_scaling.len() != spec.input_signals.len() {
            return Err(RuntimeError::ScalingWidth {
                model: id,
                expected: spec.input_signals.len(),
                got: input_scaling.len(),
            });
        }
        let resolve = |signal: &String| {
            self.schema
                .iter()
                .position(|s| s == signal)
                .ok_or_else(|| RuntimeError::UnknownSignal {
                    model: id,
                    signal: signal.clone(),
                })
        };
        let input_columns = spec
            .input_signals
            .iter()
            .map(resolve)
            .collect::<Result<Vec<_>, _>>()?;
        let output_column = resolve(&spec.output_signal)?;
        let acts = Activations::for_spec(spec);
        let window = vec![0.0; spec.window_len * spec.input_signals.len()];
        let slot = EngineSlot {
            id,
            params,
            input_columns,
            output_column,
            input_scaling,
            output_scaling,
            acts,
            window,
            runnable: false,
            result: None,
        };
        let at = self
            .slots
            .binary_search_by_key(&id, |s| s.id)
            .expect_err("duplicate ids were rejected above");
        self.slots.insert(at, slot);
        Ok(())
    }

    /// Removes a model; returns whether it was present. Other models'
    /// subsequent scores are unaffected.
    pub fn unload(&mut self, id: ModelId) -> bool {
        match self.slots.binary_search_by_key(&id, |s| s.id) {
            Ok(at) => {
                self.slots.remove(at);
                true
            }
            Err(_) => false,
        }
    }

    /// Marks a stream boundary: history is discarded so no window spans it.
    /// Sample indexing continues monotonically.
    pub fn reset_stream(&mut self) {
        self.buffer.clear();
        self.stream_index += 1;
    }

    /// Removes and returns the stored windows, best first.
    pub fn drain_store(&mut self) -> Vec<ScoredWindow> {
        self.store.drain()
    }

    /// Runs one tick with the built-in serial task runner.
    pub fn tick(&mut self, sample: &[f64], wall_time_us: f64) -> TickReport {
        self.tick_with(sample, wall_time_us, |tasks| {
            for task in tasks {
                task.run();
            }
        })
    }

    /// Runs one tick, delegating the independent per-model forward passes
    /// to `run`. The runner must call [`InferenceTask::run`] exactly once
    /// per task (in any order, on any thread); unrun tasks count as model
    /// faults.
    pub fn tick_with<F>(&mut self, sample: &[f64], wall_time_us: f64, run: F) -> TickReport
    where
        F: FnOnce(&mut [InferenceTask<'_>]),
    {
        self.telemetry.ticks += 1;
        let rejected = TickReport {
            sample_index: None,
            models_run: 0,
            msed: None,
            per_model: self.slots.iter().map(|s| (s.id, None)).collect(),
            stored: false,
            sigma_floor_hits: 0,
            model_faults: 0,
        };
        if sample.len() != self.schema.len() || !sample.iter().all(|v| v.is_finite()) {
            self.telemetry.samples_rejected += 1;
            return rejected;
        }
        let index = self.next_sample_index;
        self.next_sample_index += 1;
        self.telemetry.samples_accepted += 1;
        self.buffer.push(sample);

        // Fill each model's scaled window; skip models whose window the
        // buffer cannot fill yet.
        for slot in &mut self.slots {
            let t_len = slot.params.spec().window_len;
            let s_len = slot.input_columns.len();
            slot.result = None;
            slot.runnable = self.buffer.len() >= t_len;
            if !slot.runnable {
                continue;
            }
            for t in 0..t_len {
                let row = self.buffer.row_from_end(t_len - 1 - t);
                for (ci, (&col, scaling)) in slot
                    .input_columns
                    .iter()
                    .zip(&slot.input_scaling)
                    .enumerate()
                {
                    slot.window[t * s_len + ci] = scaling.scale(row[col]);
                }
            }
        }

        // Hand the independent forward passes to the runner.
        let mut tasks: Vec<InferenceTask<'_>> = Vec::with_capacity(self.slots.len());
        for slot in &mut self.slots {
            if !slot.runnable {
                continue;
            }
            let EngineSlot {
                id,
                params,
                window,
                acts,
                result,
                ..
            } = slot;
            tasks.push(InferenceTask {
                id: *id,
                params,
                window,
                acts,
                result,
            });
        }
        run(&mut tasks);
        drop(tasks);

        // Score in ascending model-id order (slot order).
        let mut per_model = Vec::with_capacity(self.slots.len());
        let mut sed_sum = 0.0;
        let mut models_run = 0usize;
        let mut floor_hits = 0u32;
        let mut faults = 0u32;
        let mut span = 0usize;
        for slot in &mut self.slots {
            if !slot.runnable {
                per_model.push((slot.id, None));
                continue;
            }
            match slot.result.take() {
                Some(Ok(prediction)) => {
                    let y = slot.output_scaling.scale(sample[slot.output_column]);
                    let (value, floored) = sed_floored(y, &prediction);
                    sed_sum += value;
                    models_run += 1;
                    floor_hits += floored as u32;
                    span = span.max(slot.params.spec().window_len);
                    per_model.push((slot.id, Some(value)));
                }
                Some(Err(_)) | None => {
                    faults += 1;
                    per_model.push((slot.id, None));
                }
            }
        }
        self.telemetry.models_run += models_run as u64;
        self.telemetry.sigma_floor_hits += u64::from(floor_hits);
        self.telemetry.model_faults += u64::from(faults);

        let msed = (models_run > 0).then(|| sed_sum / models_run as f64);
        let mut stored = false;
        if let Some(msed) = msed {
            if self.config.min_index_spacing > 0
                && self
                    .store
                    .iter()
                    .any(|w| index.abs_diff(w.end_sample_index()) < self.config.min_index_spacing)
            {
                self.telemetry.windows_skipped_spacing += 1;
            } else if self.store.would_accept(msed, index) {
                // Copy the raw rows only for candidates that will be kept.
                let width = self.schema.len();
                let mut data = Vec::with_capacity(span * width);
                for t in (0..span).rev() {
                    data.extend_from_slice(self.buffer.row_from_end(t));
                }
                let window = Window {
                    rows: span,
                    cols: width,
                    data,
                    origin: WindowOrigin {
                        stream: self.stream_index,
                        end_sample: index,
                    },
                };
                let candidate = ScoredWindow {
                    window,
                    msed,
                    per_model_sed: per_model
                        .iter()
                        .filter_map(|&(id, s)| s.map(|s| (id, s)))
                        .collect(),
                    wall_time_us,
                };
                stored = self.store.offer(candidate);
                self.telemetry.windows_stored += stored as u64;
            }
        }

        TickReport {
            sample_index: Some(index),
            models_run,
            msed,
            per_model,
            stored,
            sigma_floor_hits: floor_hits,
            model_faults: faults,
        }
    }
}
