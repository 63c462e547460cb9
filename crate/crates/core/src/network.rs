//! The probabilistic convolutional regressor.
//!
//! Every model in the ensemble shares one fixed topology, parameterised only
//! by the number of input signals `S`, the window length `T`, the convolution
//! filter count `F` and the dense width `D`:
//!
//! ```text
//! window (T x S)
//!   -> temporal fold   (per-column conv, kernel length T)      -> S x F
//!   -> squeeze         (pointwise 1x1)                         -> S x F
//!   -> expand_wide     (spatial conv, extent S, no padding)    -> 1 x F
//!   |  expand_point    (pointwise 1x1)                         -> S x F
//!   -> fold_wide       (spatial conv, extent 1)                -> 1 x F
//!   |  fold_point      (spatial conv, extent S)                -> 1 x F
//!   -> features z = concat(fold_wide, fold_point)              -> 2F
//! mean head: [z, window] -> 3 x (dense D, leaky ReLU, dropout) -> linear -> mu
//! conf head: [z, window, mu] -> same stack          -> linear -> alpha, sigma = exp(alpha)
//! ```
//!
//! Leaky ReLU follows every convolution and every hidden dense layer; the two
//! output layers are linear. Dropout is inverted (activations are scaled by
//! `1/(1-rate)` at train time) so inference needs no rescaling. The
//! confidence head sees the mean head's output, which lets it widen `sigma`
//! where the mean is unreliable.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;

/// Structural description of one model: which signals it reads, which signal
/// it predicts, and the four size knobs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    /// Names of the input signals, in window column order.
    pub input_signals: Vec<String>,
    /// Name of the predicted signal. Must not appear among the inputs.
    pub output_signal: String,
    /// Window length `T` (rows per window).
    pub window_len: usize,
    /// Convolution filter count `F`.
    pub conv_filters: usize,
    /// Width `D` of the dense layers in both heads.
    pub dense_units: usize,
    /// Negative-side slope of the leaky ReLU.
    pub lrelu_slope: f64,
    /// Dropout rate applied after each hidden dense layer at train time.
    pub dropout_rate: f64,
}

/// Default negative-side slope of the leaky ReLU.
pub const DEFAULT_LRELU_SLOPE: f64 = 0.3;
/// Default dropout rate for the dense stacks.
pub const DEFAULT_DROPOUT_RATE: f64 = 0.5;

/// Errors raised when a [`ModelSpec`] violates a structural invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum SpecError {
    /// The input signal list is empty.
    NoInputs,
    /// A size knob (window length, filters or dense units) is zero.
    ZeroDimension(&'static str),
    /// The output signal also appears among the inputs.
    OutputAmongInputs(String),
    /// The same signal appears twice among the inputs.
    DuplicateInput(String),
    /// The leaky ReLU slope is outside `(0, 1)`.
    BadSlope(f64),
    /// The dropout rate is outside `[0, 1)`.
    BadDropout(f64),
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::NoInputs => write!(f, "model spec has no input signals"),
            SpecError::ZeroDimension(which) => write!(f, "model spec {which} must be nonzero"),
            SpecError::OutputAmongInputs(name) => {
                write!(f, "output signal {name:?} also listed as an input")
            }
            SpecError::DuplicateInput(name) => write!(f, "input signal {name:?} listed twice"),
            SpecError::BadSlope(v) => write!(f, "leaky ReLU slope {v} outside (0, 1)"),
            SpecError::BadDropout(v) => write!(f, "dropout rate {v} outside [0, 1)"),
        }
    }
}

impl core::error::Error for SpecError {}

impl ModelSpec {
    /// Builds a validated spec with the default slope and dropout rate.
    pub fn new(
        input_signals: Vec<String>,
        output_signal: String,
        window_len: usize,
        conv_filters: usize,
        dense_units: usize,
    ) -> Result<Self, SpecError> {
        let spec = ModelSpec {
            input_signals,
            output_signal,
            window_len,
            conv_filters,
            dense_units,
            lrelu_slope: DEFAULT_LRELU_SLOPE,
            dropout_rate: DEFAULT_DROPOUT_RATE,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks all structural invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.input_signals.is_empty() {
            return Err(SpecError::NoInputs);
        }
        if self.window_len == 0 {
            return Err(SpecError::ZeroDimension("window length"));
        }
        if self.conv_filters == 0 {
            return Err(SpecError::ZeroDimension("convolution filter count"));
        }
        if self.dense_units == 0 {
            return Err(SpecError::ZeroDimension("dense unit count"));
        }
        for (i, name) in self.input_signals.iter().enumerate() {
            if self.input_signals[..i].contains(name) {
                return Err(SpecError::DuplicateInput(name.clone()));
            }
        }
        if self.input_signals.contains(&self.output_signal) {
            return Err(SpecError::OutputAmongInputs(self.output_signal.clone()));
        }
        if !(self.lrelu_slope > 0.0 && self.lrelu_slope < 1.0) {
            return Err(SpecError::BadSlope(self.lrelu_slope));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(SpecError::BadDropout(self.dropout_rate));
        }
        Ok(())
    }

    /// Number of input signals `S`.
    pub fn inputs(&self) -> usize {
        self.input_signals.len()
    }

    /// Flattened window length `T * S`.
    pub fn window_values(&self) -> usize {
        self.window_len * self.inputs()
    }

    /// Width of the concatenated convolution features (`2F`).
    pub fn feature_len(&self) -> usize {
        2 * self.conv_filters
    }

    /// Input width of the mean head's first dense layer.
    pub fn mean_input_len(&self) -> usize {
        self.feature_len() + self.window_values()
    }

    /// Input width of the confidence head's first dense layer (mean input
    /// plus the predicted mean itself).
    pub fn conf_input_len(&self) -> usize {
        self.mean_input_len() + 1
    }
}

/// Errors raised by network construction and execution.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkError {
    /// A spec invariant was violated.
    Spec(SpecError),
    /// A dimension did not match what the operation required.
    ShapeMismatch {
        /// Which axis or buffer disagreed.
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// Train-mode forward with nonzero dropout needs a randomness source.
    MissingDropoutRng,
    /// A layer produced a non-finite value.
    NumericFault {
        /// Name of the first layer whose output was non-finite.
        layer: &'static str,
    },
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkError::Spec(e) => write!(f, "invalid model spec: {e}"),
            NetworkError::ShapeMismatch {
                context,
                expected,
                got,
            } => write!(f, "shape mismatch at {context}: expected {expected}, got {got}"),
            NetworkError::MissingDropoutRng => {
                write!(f, "train-mode forward with dropout requires a randomness source")
            }
            NetworkError::NumericFault { layer } => {
                write!(f, "non-finite value produced by layer {layer:?}")
            }
        }
    }
}

impl core::error::Error for NetworkError {}

impl From<SpecError> for NetworkError {
    fn from(e: SpecError) -> Self {
        NetworkError::Spec(e)
    }
}

// ---------------------------------------------------------------------------
// Parameter layout
// ---------------------------------------------------------------------------

/// Identifiers for the 28 parameter tensors, in canonical layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(clippy::enum_variant_names)]
pub(crate) enum Tensor {
    TemporalFoldKernel,
    TemporalFoldBias,
    SqueezeKernel,
    SqueezeBias,
    ExpandWideKernel,
    ExpandWideBias,
    ExpandPointKernel,
    ExpandPointBias,
    FoldWideKernel,
    FoldWideBias,
    FoldPointKernel,
    FoldPointBias,
    MeanDense1Weight,
    MeanDense1Bias,
    MeanDense2Weight,
    MeanDense2Bias,
    MeanDense3Weight,
    MeanDense3Bias,
    MeanOutWeight,
    MeanOutBias,
    ConfDense1Weight,
    ConfDense1Bias,
    ConfDense2Weight,
    ConfDense2Bias,
    ConfDense3Weight,
    ConfDense3Bias,
    ConfOutWeight,
    ConfOutBias,
}

pub(crate) const TENSOR_COUNT: usize = 28;

const TENSOR_ORDER: [Tensor; TENSOR_COUNT] = [
    Tensor::TemporalFoldKernel,
    Tensor::TemporalFoldBias,
    Tensor::SqueezeKernel,
    Tensor::SqueezeBias,
    Tensor::ExpandWideKernel,
    Tensor::ExpandWideBias,
    Tensor::ExpandPointKernel,
    Tensor::ExpandPointBias,
    Tensor::FoldWideKernel,
    Tensor::FoldWideBias,
    Tensor::FoldPointKernel,
    Tensor::FoldPointBias,
    Tensor::MeanDense1Weight,
    Tensor::MeanDense1Bias,
    Tensor::MeanDense2Weight,
    Tensor::MeanDense2Bias,
    Tensor::MeanDense3Weight,
    Tensor::MeanDense3Bias,
    Tensor::MeanOutWeight,
    Tensor::MeanOutBias,
    Tensor::ConfDense1Weight,
    Tensor::ConfDense1Bias,
    Tensor::ConfDense2Weight,
    Tensor::ConfDense2Bias,
    Tensor::ConfDense3Weight,
    Tensor::ConfDense3Bias,
    Tensor::ConfOutWeight,
    Tensor::ConfOutBias,
];

/// One named tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorDef {
    /// Stable name, also used by the on-disk model format.
    pub name: &'static str,
    /// Dimensions; kernels are `[filters, extent, channels]` or
    /// `[filters, channels]`, dense weights are `[units, inputs]` (row-major),
    /// biases are `[units]`.
    pub dims: Vec<usize>,
    /// Offset of the first element in the flat parameter vector.
    pub offset: usize,
}

impl TensorDef {
    /// Number of elements in this tensor.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    /// True when the tensor has no elements (never the case for valid specs).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn tensor_shape(t: Tensor, spec: &ModelSpec) -> (&'static str, Vec<usize>) {
    let s = spec.inputs();
    let tw = spec.window_len;
    let f = spec.conv_filters;
    let d = spec.dense_units;
    let mi = spec.mean_input_len();
    let ci = spec.conf_input_len();
    match t {
        Tensor::TemporalFoldKernel => ("temporal_fold.kernel", vec![f, tw]),
        Tensor::TemporalFoldBias => ("temporal_fold.bias", vec![f]),
        Tensor::SqueezeKernel => ("squeeze.kernel", vec![f, f]),
        Tensor::SqueezeBias => ("squeeze.bias", vec![f]),
        Tensor::ExpandWideKernel => ("expand_wide.kernel", vec![f, s, f]),
        Tensor::ExpandWideBias => ("expand_wide.bias", vec![f]),
        Tensor::ExpandPointKernel => ("expand_point.kernel", vec![f, f]),
        Tensor::ExpandPointBias => ("expand_point.bias", vec![f]),
        Tensor::FoldWideKernel => ("fold_wide.kernel", vec![f, 1, f]),
        Tensor::FoldWideBias => ("fold_wide.bias", vec![f]),
        Tensor::FoldPointKernel => ("fold_point.kernel", vec![f, s, f]),
        Tensor::FoldPointBias => ("fold_point.bias", vec![f]),
        Tensor::MeanDense1Weight => ("mean.dense1.weight", vec![d, mi]),
        Tensor::MeanDense1Bias => ("mean.dense1.bias", vec![d]),
        Tensor::MeanDense2Weight => ("mean.dense2.weight", vec![d, d]),
        Tensor::MeanDense2Bias => ("mean.dense2.bias", vec![d]),
        Tensor::MeanDense3Weight => ("mean.dense3.weight", vec![d, d]),
        Tensor::MeanDense3Bias => ("mean.dense3.bias", vec![d]),
        Tensor::MeanOutWeight => ("mean.out.weight", vec![1, d]),
        Tensor::MeanOutBias => ("mean.out.bias", vec![1]),
        Tensor::ConfDense1Weight => ("conf.dense1.weight", vec![d, ci]),
        Tensor::ConfDense1Bias => ("conf.dense1.bias", vec![d]),
        Tensor::ConfDense2Weight => ("conf.dense2.weight", vec![d, d]),
        Tensor::ConfDense2Bias => ("conf.dense2.bias", vec![d]),
        Tensor::ConfDense3Weight => ("conf.dense3.weight", vec![d, d]),
        Tensor::ConfDense3Bias => ("conf.dense3.bias", vec![d]),
        Tensor::ConfOutWeight => ("conf.out.weight", vec![1, d]),
        Tensor::ConfOutBias => ("conf.out.bias", vec![1]),
    }
}

/// Fan-in used to scale a tensor's initial values; biases start at zero.
fn tensor_fan_in(t: Tensor, spec: &ModelSpec) -> Option<usize> {
    let s = spec.inputs();
    let f = spec.conv_filters;
    let d = spec.dense_units;
    match t {
        Tensor::TemporalFoldKernel => Some(spec.window_len),
        Tensor::SqueezeKernel | Tensor::ExpandPointKernel | Tensor::FoldWideKernel => Some(f),
        Tensor::ExpandWideKernel | Tensor::FoldPointKernel => Some(s * f),
        Tensor::MeanDense1Weight => Some(spec.mean_input_len()),
        Tensor::ConfDense1Weight => Some(spec.conf_input_len()),
        Tensor::MeanDense2Weight
        | Tensor::MeanDense3Weight
        | Tensor::MeanOutWeight
        | Tensor::ConfDense2Weight
        | Tensor::ConfDense3Weight
        | Tensor::ConfOutWeight => Some(d),
        _ => None,
    }
}

/// The frozen mapping from tensors to slices of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    defs: Vec<TensorDef>,
    total: usize,
}

impl Layout {
    /// Derives the layout for a spec. Tensor order and dimensions are part of
    /// the crate's compatibility contract (the model file format round-trips
    /// them), so they never change.
    pub fn for_spec(spec: &ModelSpec) -> Layout {
        let mut defs = Vec::with_capacity(TENSOR_COUNT);
        let mut offset = 0;
        for &t in &TENSOR_ORDER {
            let (name, dims) = tensor_shape(t, spec);
            let len: usize = dims.iter().product();
            defs.push(TensorDef { name, dims, offset });
            offset += len;
        }
        Layout { defs, total: offset }
    }

    /// Total number of parameters.
    pub fn total(&self) -> usize {
        self.total
    }

    /// All tensor definitions in canonical order.
    pub fn tensors(&self) -> &[TensorDef] {
        &self.defs
    }

    pub(crate) fn range(&self, t: Tensor) -> Range<usize> {
        let def = &self.defs[t as usize];
        def.offset..def.offset + def.len()
    }

    pub(crate) fn slice<'a>(&self, values: &'a [f64], t: Tensor) -> &'a [f64] {
        &values[self.range(t)]
    }
}

/// Total trainable parameter count for a spec.
pub fn count_parameters(spec: &ModelSpec) -> usize {
    Layout::for_spec(spec).total()
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// A spec plus its flat parameter vector.
///
/// Values are stored in one contiguous `Vec<f64>` in [`Layout`] order; the
/// optimiser state, gradient buffers and the on-disk format all share this
/// indexing, which makes updates and serialisation trivial.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ModelSpec,
    seed: u64,
    values: Vec<f64>,
    layout: Layout,
}

impl ModelParams {
    /// Wraps an existing flat vector (for example one read back from disk),
    /// checking length and finiteness.
    pub fn from_values(spec: ModelSpec, seed: u64, values: Vec<f64>) -> Result<Self, NetworkError> {
        spec.validate()?;
        let layout = Layout::for_spec(&spec);
        if values.len() != layout.total() {
            return Err(NetworkError::ShapeMismatch {
                context: "parameter vector",
                expected: layout.total(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(NetworkError::NumericFault { layer: "parameters" });
        }
        Ok(ModelParams {
            spec,
            seed,
            values,
            layout,
        })
    }

    /// The structural spec.
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// The seed recorded at initialisation time.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The flat parameter vector in layout order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// The tensor layout.
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Total parameter count.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false for a valid spec.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn tensor(&self, t: Tensor) -> &[f64] {
        self.layout.slice(&self.values, t)
    }
}

/// Seeded parameter initialisation.
///
/// Kernel and dense weights are drawn uniformly from
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; biases start at zero. Draws consume a
/// [`ChaCha8Rng`] in tensor layout order, element by element (biases consume
/// no draws), so a given `(spec, seed)` pair yields identical parameters on
/// every platform.
pub fn init_parameters(spec: &ModelSpec, seed: u64) -> Result<ModelParams, NetworkError> {
    spec.validate()?;
    let layout = Layout::for_spec(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; layout.total()];
    for &t in &TENSOR_ORDER {
        if let Some(fan_in) = tensor_fan_in(t, spec) {
            let bound = 1.0 / math::sqrt(fan_in as f64);
            for v in &mut values[layout.range(t)] {
                let u: f64 = rng.gen();
                *v = bound * (2.0 * u - 1.0);
            }
        }
    }
    Ok(ModelParams {
        spec: spec.clone(),
        seed,
        values,
        layout,
    })
}

// ---------------------------------------------------------------------------
// Generic convolution op
// ---------------------------------------------------------------------------

/// A dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    /// Row count.
    pub rows: usize,
    /// Column count.
    pub cols: usize,
    /// Row-major data, `rows * cols` long.
    pub data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix, checking that the data length matches the shape.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NetworkError> {
        if data.len() != rows * cols {
            return Err(NetworkError::ShapeMismatch {
                context: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Element accessor.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// How a [`conv1d`] kernel slides over its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Slides along rows (time), one independent pass per column; requires a
    /// single-channel kernel whose extent equals the row count, collapsing
    /// the time axis. Output is `input.cols x filters`.
    Temporal,
    /// Slides along rows treating columns as channels, valid padding. Output
    /// is `(rows - extent + 1) x filters`.
    Spatial,
    /// Extent-1 kernel applied at every row. Output is `rows x filters`.
    Pointwise,
}

/// A convolution kernel: `filters x extent x channels` weights, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    /// Number of output filters.
    pub filters: usize,
    /// Sliding extent along the row axis.
    pub extent: usize,
    /// Input channels consumed per position.
    pub channels: usize,
    /// Weights, `filters * extent * channels` long.
    pub weights: Vec<f64>,
}

impl Kernel {
    /// Builds a kernel, checking the weight count.
    pub fn new(
        filters: usize,
        extent: usize,
        channels: usize,
        weights: Vec<f64>,
    ) -> Result<Self, NetworkError> {
        if weights.len() != filters * extent * channels {
            return Err(NetworkError::ShapeMismatch {
                context: "kernel weights",
                expected: filters * extent * channels,
                got: weights.len(),
            });
        }
        Ok(Kernel {
            filters,
            extent,
            channels,
            weights,
        })
    }

    fn weight(&self, f: usize, e: usize, c: usize) -> f64 {
        self.weights[(f * self.extent + e) * self.channels + c]
    }
}

/// One-dimensional convolution in the three orientations the network uses.
///
/// All orientations use valid padding (no padding rows are invented). The
/// bias slice must hold one value per filter.
pub fn conv1d(
    input: &Matrix,
    kernel: &Kernel,
    bias: &[f64],
    orientation: Orientation,
) -> Result<Matrix, NetworkError> {
    if bias.len() != kernel.filters {
        return Err(NetworkError::ShapeMismatch {
            context: "conv bias",
            expected: kernel.filters,
            got: bias.len(),
        });
    }
    match orientation {
        Orientation::Temporal => {
            if kernel.channels != 1 {
                return Err(NetworkError::ShapeMismatch {
                    context: "temporal kernel channels",
                    expected: 1,
                    got: kernel.channels,
                });
            }
            if kernel.extent != input.rows {
                return Err(NetworkError::ShapeMismatch {
                    context: "temporal kernel extent (must fold the whole time axis)",
                    expected: input.rows,
                    got: kernel.extent,
                });
            }
            // Each column is convolved independently by every filter; the
            // collapsed output puts columns on rows and filters on columns.
            let mut out = vec![0.0; input.cols * kernel.filters];
            for s in 0..input.cols {
                for f in 0..kernel.filters {
                    let mut acc = bias[f];
                    for t in 0..kernel.extent {
                        acc += kernel.weight(f, t, 0) * input.get(t, s);
                    }
                    out[s * kernel.filters + f] = acc;
                }
            }
            Matrix::new(input.cols, kernel.filters, out)
        }
        Orientation::Spatial => {
            if kernel.channels != input.cols {
                return Err(NetworkError::ShapeMismatch {
                    context: "spatial kernel channels",
                    expected: input.cols,
                    got: kernel.channels,
                });
            }
            if kernel.extent == 0 || kernel.extent > input.rows {
                return Err(NetworkError::ShapeMismatch {
                    context: "spatial kernel extent",
                    expected: input.rows,
                    got: kernel.extent,
                });
            }
            let out_rows = input.rows - kernel.extent + 1;
            let mut out = vec![0.0; out_rows * kernel.filters];
            for p in 0..out_rows {
                for f in 0..kernel.filters {
                    let mut acc = bias[f];
                    for e in 0..kernel.extent {
                        for c in 0..input.cols {
                            acc += kernel.weight(f, e, c) * input.get(p + e, c);
                        }
                    }
                    out[p * kernel.filters + f] = acc;
                }
            }
            Matrix::new(out_rows, kernel.filters, out)
        }
        Orientation::Pointwise => {
            if kernel.extent != 1 {
                return Err(NetworkError::ShapeMismatch {
                    context: "pointwise kernel extent",
                    expected: 1,
                    got: kernel.extent,
                });
            }
            if kernel.channels != input.cols {
                return Err(NetworkError::ShapeMismatch {
                    context: "pointwise kernel channels",
                    expected: input.cols,
                    got: kernel.channels,
                });
            }
            let mut out = vec![0.0; input.rows * kernel.filters];
            for p in 0..input.rows {
                for f in 0..kernel.filters {
                    let mut acc = bias[f];
                    for c in 0..input.cols {
                        acc += kernel.weight(f, 0, c) * input.get(p, c);
                    }
                    out[p * kernel.filters + f] = acc;
                }
            }
            Matrix::new(input.rows, kernel.filters, out)
        }
    }
}

/// Leaky ReLU.
#[inline(always)]
pub fn lrelu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Derivative of the leaky ReLU with respect to its pre-activation. The
/// kink at zero takes the negative-side slope.
#[inline(always)]
pub fn lrelu_grad(pre: f64, slope: f64) -> f64 {
    if pre > 0.0 {
        1.0
    } else {
        slope
    }
}

// ---------------------------------------------------------------------------
// Windows and predictions
// ---------------------------------------------------------------------------

/// Where a window came from: which stream segment and which sample closed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowOrigin {
    /// Stream segment counter; bumped at every stream boundary.
    pub stream: u64,
    /// Index of the newest sample in the window (monotone over the whole
    /// session, not reset at boundaries).
    pub end_sample: u64,
}

/// A scaled model input: `rows` consecutive samples of the model's input
/// signals, newest last.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Window length `T`.
    pub rows: usize,
    /// Input signal count `S`.
    pub cols: usize,
    /// Row-major scaled values, `rows * cols` long.
    pub data: Vec<f64>,
    /// Provenance of the newest row.
    pub origin: WindowOrigin,
}

impl Window {
    /// Builds a window, checking the data length.
    pub fn new(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        origin: WindowOrigin,
    ) -> Result<Self, NetworkError> {
        if data.len() != rows * cols {
            return Err(NetworkError::ShapeMismatch {
                context: "window data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Window {
            rows,
            cols,
            data,
            origin,
        })
    }
}

/// A model's output for one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Predicted mean of the target signal (in scaled units).
    pub mu: f64,
    /// Predicted log standard deviation.
    pub alpha: f64,
    /// `exp(alpha)`, the predicted standard deviation.
    pub sigma: f64,
}

impl Prediction {
    /// Bundles the two raw network outputs, deriving `sigma`.
    pub fn from_outputs(mu: f64, alpha: f64) -> Prediction {
        Prediction {
            mu,
            alpha,
            sigma: math::exp(alpha),
        }
    }
}

/// Whether a forward pass applies dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active; requires a randomness source when the rate is nonzero.
    Train,
    /// Deterministic inference; dropout is the identity.
    Infer,
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

/// Scratch space for one forward (and optionally backward) pass.
///
/// Reused across calls so the streaming hot path performs no allocation.
/// Fields `a*` hold pre-activations, `h*` post-activations; the mask vectors
/// hold the inverted-dropout multiplier actually applied (all ones outside
/// train mode).
#[derive(Debug, Clone)]
pub(crate) struct Activations {
    pub a1: Vec<f64>,
    pub h1: Vec<f64>,
    pub a2: Vec<f64>,
    pub h2: Vec<f64>,
    pub a3: Vec<f64>,
    pub h3: Vec<f64>,
    pub a4: Vec<f64>,
    pub h4: Vec<f64>,
    pub a5: Vec<f64>,
    pub h5: Vec<f64>,
    pub a6: Vec<f64>,
    pub h6: Vec<f64>,
    pub u_mean: Vec<f64>,
    pub u_conf: Vec<f64>,
    pub m_pre: [Vec<f64>; 3],
    pub m_post: [Vec<f64>; 3],
    pub m_mask: [Vec<f64>; 3],
    pub c_pre: [Vec<f64>; 3],
    pub c_post: [Vec<f64>; 3],
    pub c_mask: [Vec<f64>; 3],
    pub mu: f64,
    pub alpha: f64,
}

impl Activations {
    pub(crate) fn for_spec(spec: &ModelSpec) -> Activations {
        let s = spec.inputs();
        let f = spec.conv_filters;
        let d = spec.dense_units;
        let sf = s * f;
        let dvec = || vec![0.0; d];
        Activations {
            a1: vec![0.0; sf],
            h1: vec![0.0; sf],
            a2: vec![0.0; sf],
            h2: vec![0.0; sf],
            a3: vec![0.0; f],
            h3: vec![0.0; f],
            a4: vec![0.0; sf],
            h4: vec![0.0; sf],
            a5: vec![0.0; f],
            h5: vec![0.0; f],
            a6: vec![0.0; f],
            h6: vec![0.0; f],
            u_mean: vec![0.0; spec.mean_input_len()],
            u_conf: vec![0.0; spec.conf_input_len()],
            m_pre: [dvec(), dvec(), dvec()],
            m_post: [dvec(), dvec(), dvec()],
            m_mask: [dvec(), dvec(), dvec()],
            c_pre: [dvec(), dvec(), dvec()],
            c_post: [dvec(), dvec(), dvec()],
            c_mask: [dvec(), dvec(), dvec()],
            mu: 0.0,
            alpha: 0.0,
        }
    }
}

fn check_finite(values: &[f64], layer: &'static str) -> Result<(), NetworkError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NetworkError::NumericFault { layer })
    }
}

/// Fills one dense head layer: `pre = W x + b`, `post = dropout(lrelu(pre))`.
#[allow(clippy::too_many_arguments)]
fn head_layer<R: RngCore + ?Sized>(
    x: &[f64],
    weight: &[f64],
    bias: &[f64],
    pre: &mut [f64],
    post: &mut [f64],
    mask: &mut [f64],
    slope: f64,
    rate: f64,
    mode: Mode,
    rng: &mut Option<&mut R>,
) -> Result<(), NetworkError> {
    let units = bias.len();
    let n = x.len();
    for u in 0..units {
        pre[u] = math::dot(&weight[u * n..(u + 1) * n], x) + bias[u];
    }
    let dropping = mode == Mode::Train && rate > 0.0;
    if dropping {
        let rng = rng.as_mut().ok_or(NetworkError::MissingDropoutRng)?;
        let keep_scale = 1.0 / (1.0 - rate);
        for m in mask[..units].iter_mut() {
            let draw: f64 = rng.gen();
            *m = if draw >= rate { keep_scale } else { 0.0 };
        }
    } else {
        mask[..units].fill(1.0);
    }
    for u in 0..units {
        post[u] = lrelu(pre[u], slope) * mask[u];
    }
    Ok(())
}

/// Runs the network over one scaled window, recording every intermediate in
/// `acts`. Dropout draws (train mode only) consume the source in layer order,
/// mean head before confidence head.
pub(crate) fn run_forward<R: RngCore + ?Sized>(
    params: &ModelParams,
    window: &[f64],
    mode: Mode,
    mut rng: Option<&mut R>,
    acts: &mut Activations,
) -> Result<(), NetworkError> {
    let spec = params.spec();
    let s = spec.inputs();
    let t = spec.window_len;
    let f = spec.conv_filters;
    let slope = spec.lrelu_slope;
    let rate = spec.dropout_rate;
    if window.len() != t * s {
        return Err(NetworkError::ShapeMismatch {
            context: "window data",
            expected: t * s,
            got: window.len(),
        });
    }
    check_finite(window, "input window")?;

    // Temporal fold: each input column collapsed over time by every filter.
    {
        let k = params.tensor(Tensor::TemporalFoldKernel);
        let b = params.tensor(Tensor::TemporalFoldBias);
        for si in 0..s {
            for fi in 0..f {
                let mut acc = b[fi];
                for ti in 0..t {
                    acc += k[fi * t + ti] * window[ti * s + si];
                }
                acts.a1[si * f + fi] = acc;
            }
        }
        for i in 0..s * f {
            acts.h1[i] = lrelu(acts.a1[i], slope);
        }
        check_finite(&acts.h1, "temporal_fold")?;
    }

    // Squeeze: pointwise mixing of the F channels at each of the S positions.
    {
        let k = params.tensor(Tensor::SqueezeKernel);
        let b = params.tensor(Tensor::SqueezeBias);
        for si in 0..s {
            let row = &acts.h1[si * f..(si + 1) * f];
            for fi in 0..f {
                acts.a2[si * f + fi] = math::dot(&k[fi * f..(fi + 1) * f], row) + b[fi];
            }
        }
        for i in 0..s * f {
            acts.h2[i] = lrelu(acts.a2[i], slope);
        }
        check_finite(&acts.h2, "squeeze")?;
    }

    // Expand wide: spatial convolution across all S positions at once.
    {
        let k = params.tensor(Tensor::ExpandWideKernel);
        let b = params.tensor(Tensor::ExpandWideBias);
        let width = s * f;
        for fi in 0..f {
            acts.a3[fi] = math::dot(&k[fi * width..(fi + 1) * width], &acts.h2) + b[fi];
        }
        for i in 0..f {
            acts.h3[i] = lrelu(acts.a3[i], slope);
        }
        check_finite(&acts.h3, "expand_wide")?;
    }

    // Expand point: pointwise mixing, keeping the S positions.
    {
        let k = params.tensor(Tensor::ExpandPointKernel);
        let b = params.tensor(Tensor::ExpandPointBias);
        for si in 0..s {
            let row = &acts.h2[si * f..(si + 1) * f];
            for fi in 0..f {
                acts.a4[si * f + fi] = math::dot(&k[fi * f..(fi + 1) * f], row) + b[fi];
            }
        }
        for i in 0..s * f {
            acts.h4[i] = lrelu(acts.a4[i], slope);
        }
        check_finite(&acts.h4, "expand_point")?;
    }

    // Fold wide: extent-1 spatial convolution over the single wide row.
    {
        let k = params.tensor(Tensor::FoldWideKernel);
        let b = params.tensor(Tensor::FoldWideBias);
        for fi in 0..f {
            acts.a5[fi] = math::dot(&k[fi * f..(fi + 1) * f], &acts.h3) + b[fi];
        }
        for i in 0..f {
            acts.h5[i] = lrelu(acts.a5[i], slope);
        }
        check_finite(&acts.h5, "fold_wide")?;
    }

    // Fold point: full-extent spatial convolution collapsing the S positions.
    {
        let k = params.tensor(Tensor::FoldPointKernel);
        let b = params.tensor(Tensor::FoldPointBias);
        let width = s * f;
        for fi in 0..f {
            acts.a6[fi] = math::dot(&k[fi * width..(fi + 1) * width], &acts.h4) + b[fi];
        }
        for i in 0..f {
            acts.h6[i] = lrelu(acts.a6[i], slope);
        }
        check_finite(&acts.h6, "fold_point")?;
    }

    // Mean head input: [h5, h6, window].
    acts.u_mean[..f].copy_from_slice(&acts.h5);
    acts.u_mean[f..2 * f].copy_from_slice(&acts.h6);
    acts.u_mean[2 * f..].copy_from_slice(window);

    {
        let (w1, b1) = (
            params.tensor(Tensor::MeanDense1Weight),
            params.tensor(Tensor::MeanDense1Bias),
        );
        let (w2, b2) = (
            params.tensor(Tensor::MeanDense2Weight),
            params.tensor(Tensor::MeanDense2Bias),
        );
        let (w3, b3) = (
            params.tensor(Tensor::MeanDense3Weight),
            params.tensor(Tensor::MeanDense3Bias),
        );
        let u_mean = core::mem::take(&mut acts.u_mean);
        head_layer(
            &u_mean,
            w1,
            b1,
            &mut acts.m_pre[0],
            &mut acts.m_post[0],
            &mut acts.m_mask[0],
            slope,
            rate,
            mode,
            &mut rng,
        )?;
        acts.u_mean = u_mean;
        let p0 = core::mem::take(&mut acts.m_post[0]);
        head_layer(
            &p0,
            w2,
            b2,
            &mut acts.m_pre[1],
            &mut acts.m_post[1],
            &mut acts.m_mask[1],
            slope,
            rate,
            mode,
            &mut rng,
        )?;
        acts.m_post[0] = p0;
        let p1 = core::mem::take(&mut acts.m_post[1]);
        head_layer(
            &p1,
            w3,
            b3,
            &mut acts.m_pre[2],
            &mut acts.m_post[2],
            &mut acts.m_mask[2],
            slope,
            rate,
            mode,
            &mut rng,
        )?;
        acts.m_post[1] = p1;
        check_finite(&acts.m_post[2], "mean dense stack")?;
        let wo = params.tensor(Tensor::MeanOutWeight);
        let bo = params.tensor(Tensor::MeanOutBias);
        acts.mu = math::dot(wo, &acts.m_post[2]) + bo[0];
        if !acts.mu.is_finite() {
            return Err(NetworkError::NumericFault { layer: "mean output" });
        }
    }

    // Confidence head input: [h5, h6, window, mu].
    let ci = acts.u_conf.len();
    acts.u_conf[..f].copy_from_slice(&acts.h5);
    acts.u_conf[f..2 * f].copy_from_slice(&acts.h6);
    acts.u_conf[2 * f..ci - 1].copy_from_slice(window);
    acts.u_conf[ci - 1] = acts.mu;

    {
        let (w1, b1) = (
            params.tensor(Tensor::ConfDense1Weight),
            params.tensor(Tensor::ConfDense1Bias),
        );
        let (w2, b2) = (
            params.tensor(Tensor::ConfDense2Weight),
            params.tensor(Tensor::ConfDense2Bias),
        );
        let (w3, b3) = (
            params.tensor(Tensor::ConfDense3Weight),
            params.tensor(Tensor::ConfDense3Bias),
        );
        let u_conf = core::mem::take(&mut acts.u_conf);
        head_layer(
            &u_conf,
            w1,
            b1,
            &mut acts.c_pre[0],
            &mut acts.c_post[0],
            &mut acts.c_mask[0],
            slope,
            rate,
            mode,
            &mut rng,
        )?;
        acts.u_conf = u_conf;
        let p0 = core::mem::take(&mut acts.c_post[0]);
        head_layer(
            &p0,
            w2,
            b2,
            &mut acts.c_pre[1],
            &mut acts.c_post[1],
            &mut acts.c_mask[1],
            slope,
            rate,
            mode,
            &mut rng,
        )?;
        acts.c_post[0] = p0;
        let p1 = core::mem::take(&mut acts.c_post[1]);
        head_layer(
            &p1,
            w3,
            b3,
            &mut acts.c_pre[2],
            &mut acts.c_post[2],
            &mut acts.c_mask[2],
            slope,
            rate,
            mode,
            &mut rng,
        )?;
        acts.c_post[1] = p1;
        check_finite(&acts.c_post[2], "conf dense stack")?;
        let wo = params.tensor(Tensor::ConfOutWeight);
        let bo = params.tensor(Tensor::ConfOutBias);
        acts.alpha = math::dot(wo, &acts.c_post[2]) + bo[0];
        if !acts.alpha.is_finite() {
            return Err(NetworkError::NumericFault { layer: "conf output" });
        }
    }

    Ok(())
}

/// Runs the network over one window.
///
/// In [`Mode::Train`] with a nonzero dropout rate, `dropout` must supply the
/// randomness for the dropout masks; in [`Mode::Infer`] it is ignored. The
/// same `(parameters, window, dropout stream)` triple always produces the
/// same prediction.
pub fn forward(
    params: &ModelParams,
    window: &Window,
    mode: Mode,
    dropout: Option<&mut dyn RngCore>,
) -> Result<Prediction, NetworkError> {
    let spec = params.spec();
    if window.rows != spec.window_len {
        return Err(NetworkError::ShapeMismatch {
            context: "window rows",
            expected: spec.window_len,
            got: window.rows,
        });
    }
    if window.cols != spec.inputs() {
        return Err(NetworkError::ShapeMismatch {
            context: "window cols",
            expected: spec.inputs(),
            got: window.cols,
        });
    }
    let mut acts = Activations::for_spec(spec);
    run_forward(params, &window.data, mode, dropout, &mut acts)?;
    Ok(Prediction::from_outputs(acts.mu, acts.alpha))
}

/// Deterministic inference into a reusable scratch buffer; the engine's
/// per-tick path.
pub(crate) fn infer_into(
    params: &ModelParams,
    window: &[f64],
    acts: &mut Activations,
) -> Result<Prediction, NetworkError> {
    run_forward(params, window, Mode::Infer, None::<&mut dyn RngCore>, acts)?;
    Ok(Prediction::from_outputs(acts.mu, acts.alpha))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::string::ToString;

    pub(crate) fn names(names: &[&str]) -> Vec<String> {
        names.iter().map(|n| n.to_string()).collect()
    }

    /// The small spec used throughout the unit tests: S=2, T=2, F=2, D=3.
    pub(crate) fn tiny_spec() -> ModelSpec {
        ModelSpec::new(names(&["in_a", "in_b"]), "out".to_string(), 2, 2, 3).unwrap()
    }

    fn nasa_spec() -> ModelSpec {
        ModelSpec::new(names(&["s1", "s2", "s3"]), "s4".to_string(), 1, 64, 64).unwrap()
    }

    #[test]
    fn spec_validation_rejects_bad_shapes() {
        assert_eq!(
            ModelSpec::new(vec![], "y".into(), 1, 1, 1),
            Err(SpecError::NoInputs)
        );
        assert_eq!(
            ModelSpec::new(names(&["a"]), "a".into(), 1, 1, 1),
            Err(SpecError::OutputAmongInputs("a".into()))
        );
        assert_eq!(
            ModelSpec::new(names(&["a", "a"]), "y".into(), 1, 1, 1),
            Err(SpecError::DuplicateInput("a".into()))
        );
        assert_eq!(
            ModelSpec::new(names(&["a"]), "y".into(), 0, 1, 1),
            Err(SpecError::ZeroDimension("window length"))
        );
        let mut s = tiny_spec();
        s.dropout_rate = 1.0;
        assert_eq!(s.validate(), Err(SpecError::BadDropout(1.0)));
        let mut s = tiny_spec();
        s.lrelu_slope = 0.0;
        assert_eq!(s.validate(), Err(SpecError::BadSlope(0.0)));
    }

    // Parameter counts audited by hand from the 28 tensor shapes.
    //
    // Tiny (S=2, T=2, F=2, D=3): trunk 44 + mean head 55 + conf head 58 = 157.
    // Turbofan size (S=3, T=1, F=64, D=64): trunk 37312 + mean 16833
    // + conf 16897 = 71042.
    #[test]
    fn parameter_count_tiny() {
        assert_eq!(count_parameters(&tiny_spec()), 157);
    }

    #[test]
    fn parameter_count_turbofan() {
        assert_eq!(count_parameters(&nasa_spec()), 71_042);
    }

    #[test]
    fn layout_has_28_contiguous_tensors() {
        let layout = Layout::for_spec(&tiny_spec());
        assert_eq!(layout.tensors().len(), TENSOR_COUNT);
        let mut offset = 0;
        for def in layout.tensors() {
            assert_eq!(def.offset, offset, "tensor {} not contiguous", def.name);
            offset += def.len();
        }
        assert_eq!(offset, layout.total());
        assert_eq!(layout.tensors()[0].name, "temporal_fold.kernel");
        assert_eq!(layout.tensors()[TENSOR_COUNT - 1].name, "conf.out.bias");
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let spec = tiny_spec();
        let a = init_parameters(&spec, 42).unwrap();
        let b = init_parameters(&spec, 42).unwrap();
        assert_eq!(a.values(), b.values());
        let c = init_parameters(&spec, 43).unwrap();
        assert_ne!(a.values(), c.values());

        // Every weight obeys its fan-in bound; every bias starts at zero.
        let layout = a.layout().clone();
        for (&t, def) in TENSOR_ORDER.iter().zip(layout.tensors()) {
            let slice = layout.slice(a.values(), t);
            match tensor_fan_in(t, &spec) {
                Some(fan_in) => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    for &v in slice {
                        assert!(v.abs() <= bound, "{} exceeds bound", def.name);
                    }
                }
                None => assert!(slice.iter().all(|&v| v == 0.0), "{} not zeroed", def.name),
            }
        }
    }

    #[test]
    fn init_weights_center_near_zero() {
        let spec = nasa_spec();
        let p = init_parameters(&spec, 7).unwrap();
        let nonzero: Vec<f64> = p.values().iter().copied().filter(|&v| v != 0.0).collect();
        assert!(nonzero.len() > 60_000);
        let mean = math::mean(&nonzero);
        assert!(mean.abs() < 2e-3, "init mean {mean} too far from zero");
    }

    #[test]
    fn from_values_checks_length_and_finiteness() {
        let spec = tiny_spec();
        assert!(matches!(
            ModelParams::from_values(spec.clone(), 0, vec![0.0; 10]),
            Err(NetworkError::ShapeMismatch { .. })
        ));
        let mut vals = vec![0.0; 157];
        vals[5] = f64::NAN;
        assert!(matches!(
            ModelParams::from_values(spec, 0, vals),
            Err(NetworkError::NumericFault { .. })
        ));
    }

    #[test]
    fn conv1d_temporal_folds_each_column() {
        // Window [[1,2],[3,4]]; one filter [k1,k2]=[1,10], bias 0.5.
        let input = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let kernel = Kernel::new(1, 2, 1, vec![1.0, 10.0]).unwrap();
        let out = conv1d(&input, &kernel, &[0.5], Orientation::Temporal).unwrap();
        assert_eq!((out.rows, out.cols), (2, 1));
        assert_eq!(out.data, vec![1.0 + 30.0 + 0.5, 2.0 + 40.0 + 0.5]);
    }

    #[test]
    fn conv1d_spatial_full_extent_collapses_rows() {
        let input = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let kernel = Kernel::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = conv1d(&input, &kernel, &[1.0], Orientation::Spatial).unwrap();
        assert_eq!((out.rows, out.cols), (1, 1));
        assert_eq!(out.data, vec![1.0 + 4.0 + 9.0 + 16.0 + 1.0]);
    }

    #[test]
    fn conv1d_spatial_valid_padding_slides() {
        // 3 rows, extent 2 -> 2 output positions.
        let input = Matrix::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let kernel = Kernel::new(1, 2, 1, vec![1.0, -1.0]).unwrap();
        let out = conv1d(&input, &kernel, &[0.0], Orientation::Spatial).unwrap();
        assert_eq!((out.rows, out.cols), (2, 1));
        assert_eq!(out.data, vec![-1.0, -1.0]);
    }

    #[test]
    fn conv1d_pointwise_keeps_rows() {
        let input = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let kernel = Kernel::new(2, 1, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = conv1d(&input, &kernel, &[0.5, -0.5], Orientation::Pointwise).unwrap();
        assert_eq!((out.rows, out.cols), (2, 2));
        assert_eq!(out.data, vec![1.5, 1.5, 3.5, 3.5]);
    }

    #[test]
    fn conv1d_rejects_incompatible_shapes() {
        let input = Matrix::new(2, 2, vec![0.0; 4]).unwrap();
        let k_short = Kernel::new(1, 1, 1, vec![1.0]).unwrap();
        assert!(matches!(
            conv1d(&input, &k_short, &[0.0], Orientation::Temporal),
            Err(NetworkError::ShapeMismatch { .. })
        ));
        let k_chan = Kernel::new(1, 2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(
            conv1d(&input, &k_chan, &[0.0], Orientation::Spatial),
            Err(NetworkError::ShapeMismatch { .. })
        ));
        let k_ext = Kernel::new(1, 2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(
            conv1d(&input, &k_ext, &[0.0], Orientation::Pointwise),
            Err(NetworkError::ShapeMismatch { .. })
        ));
        // Bias length must match the filter count.
        let k_ok = Kernel::new(2, 1, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(
            conv1d(&input, &k_ok, &[0.0], Orientation::Pointwise),
            Err(NetworkError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn lrelu_examples() {
        assert_eq!(lrelu(2.0, 0.3), 2.0);
        assert_eq!(lrelu(-2.0, 0.3), -0.6);
        assert_eq!(lrelu(0.0, 0.3), 0.0);
        assert_eq!(lrelu_grad(1.0, 0.3), 1.0);
        assert_eq!(lrelu_grad(-1.0, 0.3), 0.3);
    }

    #[test]
    fn forward_validates_window_and_finiteness() {
        use rand::SeedableRng;
        let spec = tiny_spec();
        let params = init_parameters(&spec, 1).unwrap();
        let bad = Window::new(1, 2, vec![0.0; 2], WindowOrigin::default()).unwrap();
        assert!(matches!(
            forward(&params, &bad, Mode::Infer, None),
            Err(NetworkError::ShapeMismatch { .. })
        ));
        let nan = Window::new(2, 2, vec![0.0, f64::NAN, 0.0, 0.0], WindowOrigin::default()).unwrap();
        assert!(matches!(
            forward(&params, &nan, Mode::Infer, None),
            Err(NetworkError::NumericFault { .. })
        ));
        let ok = Window::new(2, 2, vec![0.1, 0.2, 0.3, 0.4], WindowOrigin::default()).unwrap();
        // Train mode with dropout needs a source...
        assert_eq!(
            forward(&params, &ok, Mode::Train, None),
            Err(NetworkError::MissingDropoutRng)
        );
        // ...and with one supplied it succeeds and is reproducible.
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let p1 = forward(&params, &ok, Mode::Train, Some(&mut r1)).unwrap();
        let p2 = forward(&params, &ok, Mode::Train, Some(&mut r2)).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn zero_dropout_train_matches_infer() {
        let mut spec = tiny_spec();
        spec.dropout_rate = 0.0;
        let params = init_parameters(&spec, 5).unwrap();
        let w = Window::new(2, 2, vec![0.3, -0.1, 0.7, 0.2], WindowOrigin::default()).unwrap();
        let infer = forward(&params, &w, Mode::Infer, None).unwrap();
        let train = forward(&params, &w, Mode::Train, None).unwrap();
        assert_eq!(infer, train);
        assert!((infer.sigma - math::exp(infer.alpha)).abs() < 1e-15);
    }

    #[test]
    fn train_mode_dropout_perturbs_output() {
        use rand::SeedableRng;
        let spec = tiny_spec(); // dropout 0.5
        let params = init_parameters(&spec, 11).unwrap();
        let w = Window::new(2, 2, vec![0.9, 0.1, 0.4, 0.6], WindowOrigin::default()).unwrap();
        let infer = forward(&params, &w, Mode::Infer, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut saw_difference = false;
        for _ in 0..8 {
            let t = forward(&params, &w, Mode::Train, Some(&mut rng)).unwrap();
            if (t.mu - infer.mu).abs() > 1e-12 {
                saw_difference = true;
            }
        }
        assert!(saw_difference, "dropout never changed the output");
    }
}
