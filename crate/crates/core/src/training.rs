//! Heteroscedastic maximum-likelihood training.
//!
//! Models are fitted by minimising the Gaussian negative log-likelihood
//!
//! ```text
//! L = (1/B) * sum_i [ 1/2 * ((y_i - mu_i) * exp(-alpha_i))^2 + alpha_i + 1/2 * ln(2*pi) ]
//! ```
//!
//! which trains the mean and the log standard deviation jointly: wherever the
//! mean cannot explain the data the optimiser is rewarded for raising
//! `alpha`, so the predicted variance becomes a calibrated noise estimate
//! rather than a constant. Gradients are computed by a hand-written backward
//! pass over the fixed topology (no autograd, no heap churn per sample) and
//! applied with rectified Adam under a linear warm-up/decay schedule.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::network::{
    init_parameters, lrelu_grad, run_forward, Activations, Mode, ModelParams, ModelSpec,
    NetworkError, Prediction, Tensor,
};

/// Everything that shapes one training run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    /// Samples per optimiser step.
    pub batch_size: usize,
    /// Peak learning rate, reached at the end of warm-up.
    pub learning_rate: f64,
    /// Learning rate at step 0 and again at `total_steps`.
    pub min_learning_rate: f64,
    /// Horizon of the warm-up/decay schedule, in optimiser steps.
    pub total_steps: usize,
    /// Fraction of `total_steps` spent warming up, in `(0, 1)`.
    pub warmup_proportion: f64,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    /// Hard epoch cap.
    pub max_epochs: usize,
    /// Seeds parameter init, per-epoch shuffling and dropout.
    pub seed: u64,
    /// When set, the confidence head treats the predicted mean it receives as
    /// a constant: no gradient flows from the confidence loss back into the
    /// mean head through that input.
    pub stop_gradient_on_mean_input: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            learning_rate: 1e-3,
            min_learning_rate: 1e-5,
            total_steps: 50_000,
            warmup_proportion: 0.1,
            patience: 10,
            max_epochs: 100,
            seed: 42,
            stop_gradient_on_mean_input: false,
        }
    }
}

impl TrainConfig {
    /// Checks the numeric invariants.
    pub fn validate(&self) -> Result<(), TrainingError> {
        if self.batch_size == 0 {
            return Err(TrainingError::BadConfig("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainingError::BadConfig("learning_rate must be positive"));
        }
        if !(self.min_learning_rate > 0.0 && self.min_learning_rate.is_finite()) {
            return Err(TrainingError::BadConfig("min_learning_rate must be positive"));
        }
        if self.min_learning_rate > self.learning_rate {
            return Err(TrainingError::BadConfig(
                "min_learning_rate must not exceed learning_rate",
            ));
        }
        if self.total_steps == 0 {
            return Err(TrainingError::BadConfig("total_steps must be at least 1"));
        }
        if !(self.warmup_proportion > 0.0 && self.warmup_proportion < 1.0) {
            return Err(TrainingError::BadConfig("warmup_proportion must lie in (0, 1)"));
        }
        if self.patience == 0 {
            return Err(TrainingError::BadConfig("patience must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(TrainingError::BadConfig("max_epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Errors raised by the training pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainingError {
    /// A sample set that must be non-empty was empty.
    EmptySet(&'static str),
    /// Two buffers that must agree in length did not.
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// A [`TrainConfig`] invariant was violated.
    BadConfig(&'static str),
    /// A batch index pointed outside the sample set.
    IndexOutOfRange { index: usize, len: usize },
    /// The network itself failed.
    Network(NetworkError),
    /// Training produced a non-finite loss or parameter; the run is
    /// unrecoverable and the caller should retune or reseed.
    Diverged { epoch: usize },
}

impl fmt::Display for TrainingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainingError::EmptySet(which) => write!(f, "{which} must not be empty"),
            TrainingError::ShapeMismatch {
                context,
                expected,
                got,
            } => write!(f, "shape mismatch at {context}: expected {expected}, got {got}"),
            TrainingError::BadConfig(msg) => write!(f, "invalid train config: {msg}"),
            TrainingError::IndexOutOfRange { index, len } => {
                write!(f, "sample index {index} out of range for set of {len}")
            }
            TrainingError::Network(e) => write!(f, "network error: {e}"),
            TrainingError::Diverged { epoch } => {
                write!(f, "training diverged (non-finite loss) at epoch {epoch}")
            }
        }
    }
}

impl core::error::Error for TrainingError {}

impl From<NetworkError> for TrainingError {
    fn from(e: NetworkError) -> Self {
        TrainingError::Network(e)
    }
}

// ---------------------------------------------------------------------------
// Sample sets
// ---------------------------------------------------------------------------

/// A flat collection of `(window, target)` pairs with a shared shape.
#[derive(Debug, Clone, Default)]
pub struct SampleSet {
    rows: usize,
    cols: usize,
    windows: Vec<f64>,
    targets: Vec<f64>,
}

impl SampleSet {
    /// An empty set of `rows x cols` windows.
    pub fn new(rows: usize, cols: usize) -> SampleSet {
        SampleSet {
            rows,
            cols,
            windows: Vec::new(),
            targets: Vec::new(),
        }
    }

    /// Appends one sample; the window must be `rows * cols` long.
    pub fn push(&mut self, window: &[f64], target: f64) -> Result<(), TrainingError> {
        if window.len() != self.rows * self.cols {
            return Err(TrainingError::ShapeMismatch {
                context: "sample window",
                expected: self.rows * self.cols,
                got: window.len(),
            });
        }
        self.windows.extend_from_slice(window);
        self.targets.push(target);
        Ok(())
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    /// True when the set holds no samples.
    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Window length `T`.
    pub fn window_rows(&self) -> usize {
        self.rows
    }

    /// Input signal count `S`.
    pub fn window_cols(&self) -> usize {
        self.cols
    }

    /// The `i`-th window, row-major.
    pub fn window(&self, i: usize) -> &[f64] {
        let w = self.rows * self.cols;
        &self.windows[i * w..(i + 1) * w]
    }

    /// The `i`-th target.
    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    /// All targets.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    fn check_spec(&self, spec: &ModelSpec, what: &'static str) -> Result<(), TrainingError> {
        if self.is_empty() {
            return Err(TrainingError::EmptySet(what));
        }
        if self.rows != spec.window_len {
            return Err(TrainingError::ShapeMismatch {
                context: "sample set window rows",
                expected: spec.window_len,
                got: self.rows,
            });
        }
        if self.cols != spec.inputs() {
            return Err(TrainingError::ShapeMismatch {
                context: "sample set window cols",
                expected: spec.inputs(),
                got: self.cols,
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Mean heteroscedastic Gaussian negative log-likelihood of a batch.
pub fn nll_loss(predictions: &[Prediction], targets: &[f64]) -> Result<f64, TrainingError> {
    if predictions.is_empty() {
        return Err(TrainingError::EmptySet("loss batch"));
    }
    if predictions.len() != targets.len() {
        return Err(TrainingError::ShapeMismatch {
            context: "loss batch",
            expected: predictions.len(),
            got: targets.len(),
        });
    }
    let mut sum = 0.0;
    for (p, &y) in predictions.iter().zip(targets) {
        let scaled = (y - p.mu) * math::exp(-p.alpha);
        sum += 0.5 * scaled * scaled + p.alpha + math::HALF_LN_TWO_PI;
    }
    Ok(sum / predictions.len() as f64)
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

/// Mean loss and the gradient of that loss for one batch.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    /// Mean NLL over the batch.
    pub nll: f64,
    /// Gradient aligned with [`ModelParams::values`].
    pub grads: Vec<f64>,
}

const MEAN_HEAD: [Tensor; 8] = [
    Tensor::MeanDense1Weight,
    Tensor::MeanDense1Bias,
    Tensor::MeanDense2Weight,
    Tensor::MeanDense2Bias,
    Tensor::MeanDense3Weight,
    Tensor::MeanDense3Bias,
    Tensor::MeanOutWeight,
    Tensor::MeanOutBias,
];

const CONF_HEAD: [Tensor; 8] = [
    Tensor::ConfDense1Weight,
    Tensor::ConfDense1Bias,
    Tensor::ConfDense2Weight,
    Tensor::ConfDense2Bias,
    Tensor::ConfDense3Weight,
    Tensor::ConfDense3Bias,
    Tensor::ConfOutWeight,
    Tensor::ConfOutBias,
];

/// Scratch buffers reused across the samples of a batch.
struct Workspace {
    acts: Activations,
    d_a: Vec<f64>,
    d_b: Vec<f64>,
    d_u_mean: Vec<f64>,
    d_u_conf: Vec<f64>,
    dz: Vec<f64>,
    dh1: Vec<f64>,
    dh2: Vec<f64>,
    dh3: Vec<f64>,
    dh4: Vec<f64>,
}

impl Workspace {
    fn for_spec(spec: &ModelSpec) -> Workspace {
        let s = spec.inputs();
        let f = spec.conv_filters;
        let d = spec.dense_units;
        Workspace {
            acts: Activations::for_spec(spec),
            d_a: vec![0.0; d],
            d_b: vec![0.0; d],
            d_u_mean: vec![0.0; spec.mean_input_len()],
            d_u_conf: vec![0.0; spec.conf_input_len()],
            dz: vec![0.0; 2 * f],
            dh1: vec![0.0; s * f],
            dh2: vec![0.0; s * f],
            dh3: vec![0.0; f],
            dh4: vec![0.0; s * f],
        }
    }
}

/// Backpropagates one dense head: output layer plus three hidden layers.
/// Accumulates parameter gradients into `grads` and writes the gradient with
/// respect to the head's input vector into `d_input`.
#[allow(clippy::too_many_arguments)]
fn head_backward(
    params: &ModelParams,
    grads: &mut [f64],
    tensors: &[Tensor; 8],
    input: &[f64],
    pre: &[Vec<f64>; 3],
    post: &[Vec<f64>; 3],
    mask: &[Vec<f64>; 3],
    g_out: f64,
    slope: f64,
    d_input: &mut [f64],
    d_a: &mut [f64],
    d_b: &mut [f64],
) {
    let layout = params.layout();
    let [w1, b1, w2, b2, w3, b3, wo, bo] = *tensors;
    let d = pre[0].len();

    // Output layer: mu or alpha = wo . post3 + bo.
    let wo_w = params.tensor(wo);
    math::axpy(&mut grads[layout.range(wo)], g_out, &post[2]);
    grads[layout.range(bo).start] += g_out;
    for j in 0..d {
        d_a[j] = g_out * wo_w[j];
    }

    // Hidden layer 3: consumes d_a (d post3), emits d_b (d post2).
    {
        let w = params.tensor(w3);
        let w_off = layout.range(w3).start;
        let b_off = layout.range(b3).start;
        for j in 0..d {
            let dp = d_a[j] * mask[2][j] * lrelu_grad(pre[2][j], slope);
            math::axpy(&mut grads[w_off + j * d..w_off + (j + 1) * d], dp, &post[1]);
            grads[b_off + j] += dp;
            d_a[j] = dp;
        }
        d_b.fill(0.0);
        for j in 0..d {
            math::axpy(d_b, d_a[j], &w[j * d..(j + 1) * d]);
        }
    }

    // Hidden layer 2: consumes d_b, emits d_a (d post1).
    {
        let w = params.tensor(w2);
        let w_off = layout.range(w2).start;
        let b_off = layout.range(b2).start;
        for j in 0..d {
            let dp = d_b[j] * mask[1][j] * lrelu_grad(pre[1][j], slope);
            math::axpy(&mut grads[w_off + j * d..w_off + (j + 1) * d], dp, &post[0]);
            grads[b_off + j] += dp;
            d_b[j] = dp;
        }
        d_a.fill(0.0);
        for j in 0..d {
            math::axpy(d_a, d_b[j], &w[j * d..(j + 1) * d]);
        }
    }

    // Hidden layer 1: consumes d_a, emits d_input.
    {
        let w = params.tensor(w1);
        let n = input.len();
        let w_off = layout.range(w1).start;
        let b_off = layout.range(b1).start;
        d_input.fill(0.0);
        for j in 0..d {
            let dp = d_a[j] * mask[0][j] * lrelu_grad(pre[0][j], slope);
            math::axpy(&mut grads[w_off + j * n..w_off + (j + 1) * n], dp, input);
            grads[b_off + j] += dp;
            math::axpy(d_input, dp, &w[j * n..(j + 1) * n]);
        }
    }
}

/// Computes the mean NLL and its gradient over the batch `indices`.
///
/// Runs a train-mode forward per sample (consuming `dropout` exactly as
/// [`crate::network::forward`] would) and backpropagates by hand through both
/// heads and the convolution trunk. When
/// `config.stop_gradient_on_mean_input` is set, the predicted mean fed to the
/// confidence head is treated as a constant.
pub fn backward(
    params: &ModelParams,
    set: &SampleSet,
    indices: &[usize],
    config: &TrainConfig,
    mut dropout: Option<&mut dyn RngCore>,
) -> Result<BatchGradients, TrainingError> {
    let spec = params.spec();
    set.check_spec(spec, "batch sample set")?;
    if indices.is_empty() {
        return Err(TrainingError::EmptySet("batch indices"));
    }
    let s = spec.inputs();
    let t = spec.window_len;
    let f = spec.conv_filters;
    let slope = spec.lrelu_slope;
    let layout = params.layout().clone();

    let mut ws = Workspace::for_spec(spec);
    let mut grads = vec![0.0; params.len()];
    let mut nll_sum = 0.0;

    for &i in indices {
        if i >= set.len() {
            return Err(TrainingError::IndexOutOfRange {
                index: i,
                len: set.len(),
            });
        }
        let window = set.window(i);
        let y = set.target(i);
        run_forward(params, window, Mode::Train, dropout.as_deref_mut(), &mut ws.acts)?;

        let r = y - ws.acts.mu;
        let e2 = math::exp(-2.0 * ws.acts.alpha);
        nll_sum += 0.5 * r * r * e2 + ws.acts.alpha + math::HALF_LN_TWO_PI;
        let g_mu_direct = -r * e2;
        let g_alpha = 1.0 - r * r * e2;

        // Confidence head first: its input gradient feeds the mean head.
        head_backward(
            params,
            &mut grads,
            &CONF_HEAD,
            &ws.acts.u_conf,
            &ws.acts.c_pre,
            &ws.acts.c_post,
            &ws.acts.c_mask,
            g_alpha,
            slope,
            &mut ws.d_u_conf,
            &mut ws.d_a,
            &mut ws.d_b,
        );
        let d_mu_from_conf = ws.d_u_conf[spec.conf_input_len() - 1];
        let g_mu = if config.stop_gradient_on_mean_input {
            g_mu_direct
        } else {
            g_mu_direct + d_mu_from_conf
        };

        head_backward(
            params,
            &mut grads,
            &MEAN_HEAD,
            &ws.acts.u_mean,
            &ws.acts.m_pre,
            &ws.acts.m_post,
            &ws.acts.m_mask,
            g_mu,
            slope,
            &mut ws.d_u_mean,
            &mut ws.d_a,
            &mut ws.d_b,
        );

        // Both heads see the features [h5, h6] at the front of their inputs.
        for j in 0..2 * f {
            ws.dz[j] = ws.d_u_conf[j] + ws.d_u_mean[j];
        }

        // Fold wide: h5 = lrelu(K_fw . h3 + b).
        ws.dh3.fill(0.0);
        {
            let k = params.tensor(Tensor::FoldWideKernel);
            let k_off = layout.range(Tensor::FoldWideKernel).start;
            let b_off = layout.range(Tensor::FoldWideBias).start;
            for fi in 0..f {
                let da = ws.dz[fi] * lrelu_grad(ws.acts.a5[fi], slope);
                math::axpy(&mut grads[k_off + fi * f..k_off + (fi + 1) * f], da, &ws.acts.h3);
                grads[b_off + fi] += da;
                math::axpy(&mut ws.dh3, da, &k[fi * f..(fi + 1) * f]);
            }
        }

        // Fold point: h6 = lrelu(K_fp . h4 + b), kernel spans all S positions.
        ws.dh4.fill(0.0);
        {
            let k = params.tensor(Tensor::FoldPointKernel);
            let k_off = layout.range(Tensor::FoldPointKernel).start;
            let b_off = layout.range(Tensor::FoldPointBias).start;
            let width = s * f;
            for fi in 0..f {
                let da = ws.dz[f + fi] * lrelu_grad(ws.acts.a6[fi], slope);
                math::axpy(
                    &mut grads[k_off + fi * width..k_off + (fi + 1) * width],
                    da,
                    &ws.acts.h4,
                );
                grads[b_off + fi] += da;
                math::axpy(&mut ws.dh4, da, &k[fi * width..(fi + 1) * width]);
            }
        }

        // Expand wide: h3 = lrelu(K_ew . h2 + b), kernel spans all S positions.
        ws.dh2.fill(0.0);
        {
            let k = params.tensor(Tensor::ExpandWideKernel);
            let k_off = layout.range(Tensor::ExpandWideKernel).start;
            let b_off = layout.range(Tensor::ExpandWideBias).start;
            let width = s * f;
            for fi in 0..f {
                let da = ws.dh3[fi] * lrelu_grad(ws.acts.a3[fi], slope);
                math::axpy(
                    &mut grads[k_off + fi * width..k_off + (fi + 1) * width],
                    da,
                    &ws.acts.h2,
                );
                grads[b_off + fi] += da;
                math::axpy(&mut ws.dh2, da, &k[fi * width..(fi + 1) * width]);
            }
        }

        // Expand point: h4[s] = lrelu(K_ep . h2[s] + b) at each position.
        {
            let k = params.tensor(Tensor::ExpandPointKernel);
            let k_off = layout.range(Tensor::ExpandPointKernel).start;
            let b_off = layout.range(Tensor::ExpandPointBias).start;
            for si in 0..s {
                let h2_row = &ws.acts.h2[si * f..(si + 1) * f];
                for fi in 0..f {
                    let da = ws.dh4[si * f + fi] * lrelu_grad(ws.acts.a4[si * f + fi], slope);
                    math::axpy(&mut grads[k_off + fi * f..k_off + (fi + 1) * f], da, h2_row);
                    grads[b_off + fi] += da;
                    math::axpy(
                        &mut ws.dh2[si * f..(si + 1) * f],
                        da,
                        &k[fi * f..(fi + 1) * f],
                    );
                }
            }
        }

        // Squeeze: h2[s] = lrelu(K_sq . h1[s] + b) at each position.
        ws.dh1.fill(0.0);
        {
            let k = params.tensor(Tensor::SqueezeKernel);
            let k_off = layout.range(Tensor::SqueezeKernel).start;
            let b_off = layout.range(Tensor::SqueezeBias).start;
            for si in 0..s {
                let h1_row = &ws.acts.h1[si * f..(si + 1) * f];
                for fi in 0..f {
                    let da = ws.dh2[si * f + fi] * lrelu_grad(ws.acts.a2[si * f + fi], slope);
                    math::axpy(&mut grads[k_off + fi * f..k_off + (fi + 1) * f], da, h1_row);
                    grads[b_off + fi] += da;
                    math::axpy(
                        &mut ws.dh1[si * f..(si + 1) * f],
                        da,
                        &k[fi * f..(fi + 1) * f],
                    );
                }
            }
        }

        // Temporal fold: h1[s, f] = lrelu(sum_t K_tf[f, t] * x[t, s] + b).
        {
            let k_off = layout.range(Tensor::TemporalFoldKernel).start;
            let b_off = layout.range(Tensor::TemporalFoldBias).start;
            for si in 0..s {
                for fi in 0..f {
                    let da = ws.dh1[si * f + fi] * lrelu_grad(ws.acts.a1[si * f + fi], slope);
                    for ti in 0..t {
                        grads[k_off + fi * t + ti] += da * window[ti * s + si];
                    }
                    grads[b_off + fi] += da;
                }
            }
        }
    }

    let scale = 1.0 / indices.len() as f64;
    for g in &mut grads {
        *g *= scale;
    }
    Ok(BatchGradients {
        nll: nll_sum * scale,
        grads,
    })
}

// ---------------------------------------------------------------------------
// Rectified Adam
// ---------------------------------------------------------------------------

/// First-moment decay.
pub const RADAM_BETA1: f64 = 0.9;
/// Second-moment decay.
pub const RADAM_BETA2: f64 = 0.999;
/// Denominator stabiliser.
pub const RADAM_EPSILON: f64 = 1e-8;

/// Exponential moving moments carried between optimiser steps.
#[derive(Debug, Clone)]
pub struct RadamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl RadamState {
    /// Fresh zeroed state for a parameter vector of length `len`.
    pub fn new(len: usize) -> RadamState {
        RadamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// The scheduled learning rate at 1-based `step`: linear warm-up from the
/// minimum to the peak over `ceil(warmup_proportion * total_steps)` steps,
/// then linear decay back to the minimum at `total_steps` (and the minimum
/// thereafter).
pub fn learning_rate_at(config: &TrainConfig, step: usize) -> f64 {
    let total = config.total_steps.max(1);
    let warmup = (libm::ceil(config.warmup_proportion * total as f64) as usize).clamp(1, total);
    let lo = config.min_learning_rate;
    let hi = config.learning_rate;
    if step <= warmup {
        lo + (hi - lo) * step as f64 / warmup as f64
    } else if step >= total {
        lo
    } else {
        hi - (hi - lo) * (step - warmup) as f64 / (total - warmup) as f64
    }
}

/// Applies one rectified-Adam update in place.
///
/// The variance-rectification term `rho_t` gates the step: while
/// `rho_t <= 4` (the first four steps at the default decay rates) the update
/// uses bias-corrected momentum alone; afterwards the adaptive step with the
/// rectification factor engages.
pub fn radam_step(
    params: &mut ModelParams,
    state: &mut RadamState,
    grads: &[f64],
    step: usize,
    config: &TrainConfig,
) -> Result<(), TrainingError> {
    if step == 0 {
        return Err(TrainingError::BadConfig("optimiser step index starts at 1"));
    }
    if grads.len() != params.len() {
        return Err(TrainingError::ShapeMismatch {
            context: "gradient vector",
            expected: params.len(),
            got: grads.len(),
        });
    }
    if state.m.len() != params.len() {
        return Err(TrainingError::ShapeMismatch {
            context: "optimiser state",
            expected: params.len(),
            got: state.m.len(),
        });
    }
    let lr = learning_rate_at(config, step);
    let t = step as f64;
    let beta1_t = math::pow(RADAM_BETA1, t);
    let beta2_t = math::pow(RADAM_BETA2, t);
    let rho_inf = 2.0 / (1.0 - RADAM_BETA2) - 1.0;
    let rho_t = rho_inf - 2.0 * t * beta2_t / (1.0 - beta2_t);
    let rectified = rho_t > 4.0;
    let rect_factor = if rectified {
        math::sqrt(
            ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t),
        )
    } else {
        0.0
    };

    let values = params.values_mut();
    let mut finite = true;
    for i in 0..values.len() {
        let g = grads[i];
        state.m[i] = RADAM_BETA1 * state.m[i] + (1.0 - RADAM_BETA1) * g;
        state.v[i] = RADAM_BETA2 * state.v[i] + (1.0 - RADAM_BETA2) * g * g;
        let m_hat = state.m[i] / (1.0 - beta1_t);
        let update = if rectified {
            let v_hat = state.v[i] / (1.0 - beta2_t);
            lr * rect_factor * m_hat / (math::sqrt(v_hat) + RADAM_EPSILON)
        } else {
            lr * m_hat
        };
        values[i] -= update;
        finite &= values[i].is_finite();
    }
    if !finite {
        return Err(TrainingError::Diverged { epoch: 0 });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// What one training run did, epoch by epoch.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Epochs actually run.
    pub epochs: usize,
    /// Optimiser steps taken.
    pub steps: usize,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Validation NLL of the kept parameters.
    pub best_validation_nll: f64,
    /// Mean train NLL per epoch.
    pub train_nll: Vec<f64>,
    /// Validation NLL per epoch.
    pub validation_nll: Vec<f64>,
    /// True when patience ran out before `max_epochs`.
    pub stopped_early: bool,
}

/// Deterministic inference over a whole sample set.
pub fn infer_set(params: &ModelParams, set: &SampleSet) -> Result<Vec<Prediction>, TrainingError> {
    set.check_spec(params.spec(), "inference sample set")?;
    let mut acts = Activations::for_spec(params.spec());
    let mut out = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        run_forward(params, set.window(i), Mode::Infer, None::<&mut dyn RngCore>, &mut acts)?;
        out.push(Prediction::from_outputs(acts.mu, acts.alpha));
    }
    Ok(out)
}

/// Mean NLL of deterministic predictions over a sample set.
pub fn evaluate_nll(params: &ModelParams, set: &SampleSet) -> Result<f64, TrainingError> {
    let preds = infer_set(params, set)?;
    nll_loss(&preds, set.targets())
}

/// Trains a model from scratch.
///
/// Initialises parameters from `config.seed`, then runs shuffled mini-batch
/// epochs with rectified Adam until `max_epochs` or until `patience` epochs
/// pass without the validation NLL improving. Returns the parameters of the
/// best validation epoch. The caller is responsible for keeping the two sets
/// disjoint; everything else (shuffling, dropout, init) is derived from the
/// seed, so identical inputs yield identical outputs.
pub fn train(
    spec: &ModelSpec,
    train_set: &SampleSet,
    validation_set: &SampleSet,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport), TrainingError> {
    config.validate()?;
    train_set.check_spec(spec, "training set")?;
    validation_set.check_spec(spec, "validation set")?;

    let mut params = init_parameters(spec, config.seed)?;
    let mut state = RadamState::new(params.len());
    // Init consumed its own generator; the loop generator drives shuffling
    // and dropout.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let n = train_set.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    let mut best_values = params.values().to_vec();
    let mut best_nll = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;
    let mut report = TrainReport {
        epochs: 0,
        steps: 0,
        best_epoch: 0,
        best_validation_nll: f64::INFINITY,
        train_nll: Vec::new(),
        validation_nll: Vec::new(),
        stopped_early: false,
    };

    for epoch in 1..=config.max_epochs {
        indices.shuffle(&mut rng);
        let mut epoch_nll = 0.0;
        for chunk in indices.chunks(config.batch_size) {
            let batch = backward(&params, train_set, chunk, config, Some(&mut rng))?;
            step += 1;
            radam_step(&mut params, &mut state, &batch.grads, step, config)
                .map_err(|e| match e {
                    TrainingError::Diverged { .. } => TrainingError::Diverged { epoch },
                    other => other,
                })?;
            epoch_nll += batch.nll * chunk.len() as f64;
        }
        epoch_nll /= n as f64;
        let val_nll = evaluate_nll(&params, validation_set)?;
        if !epoch_nll.is_finite() || !val_nll.is_finite() {
            return Err(TrainingError::Diverged { epoch });
        }
        report.train_nll.push(epoch_nll);
        report.validation_nll.push(val_nll);
        report.epochs = epoch;

        if val_nll < best_nll {
            best_nll = val_nll;
            best_epoch = epoch;
            best_values.copy_from_slice(params.values());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                report.stopped_early = true;
                break;
            }
        }
    }

    params.values_mut().copy_from_slice(&best_values);
    report.steps = step;
    report.best_epoch = best_epoch;
    report.best_validation_nll = best_nll;
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::{names, tiny_spec};
    use alloc::string::ToString;

    fn flat_config(lr: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            min_learning_rate: lr,
            total_steps: 1000,
            warmup_proportion: 0.5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig {
                min_learning_rate: 1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                patience: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(TrainingError::BadConfig(_))));
        }
    }

    // Loss values frozen from direct evaluation of the closed form at
    // y=1.0, mu=0.5, alpha=-0.2.
    #[test]
    fn nll_point_value() {
        let p = Prediction::from_outputs(0.5, -0.2);
        let nll = nll_loss(&[p], &[1.0]).unwrap();
        assert!((nll - 0.905_416_620_409_831_5).abs() < 1e-15);
    }

    #[test]
    fn nll_alpha_minimiser_is_log_abs_residual() {
        // With mu fixed, d NLL / d alpha = 0 at alpha = ln|y - mu|.
        let y = 1.0;
        let mu = 0.5;
        let best = math::ln(y - mu);
        assert!((best + core::f64::consts::LN_2).abs() < 1e-15);
        let at = |a: f64| nll_loss(&[Prediction::from_outputs(mu, a)], &[y]).unwrap();
        assert!(at(best) < at(best - 0.1));
        assert!(at(best) < at(best + 0.1));
    }

    #[test]
    fn nll_rejects_empty_and_mismatched() {
        assert!(matches!(nll_loss(&[], &[]), Err(TrainingError::EmptySet(_))));
        let p = Prediction::from_outputs(0.0, 0.0);
        assert!(matches!(
            nll_loss(&[p], &[1.0, 2.0]),
            Err(TrainingError::ShapeMismatch { .. })
        ));
    }

    fn single_sample_set(window: &[f64], target: f64) -> SampleSet {
        let mut set = SampleSet::new(2, 2);
        set.push(window, target).unwrap();
        set
    }

    // Analytic residual gradients frozen from the closed form at the same
    // point as `nll_point_value`: dL/dmu = -0.7459123488206352,
    // dL/dalpha = 0.6270438255896824.
    #[test]
    fn backward_matches_frozen_output_gradients() {
        let mut spec = tiny_spec();
        spec.dropout_rate = 0.0;
        let params = init_parameters(&spec, 3).unwrap();
        let window = [0.2, -0.4, 0.5, 0.1];
        let set = single_sample_set(&window, 0.0);
        let config = TrainConfig {
            stop_gradient_on_mean_input: true,
            ..TrainConfig::default()
        };
        let out = backward(&params, &set, &[0], &config, None).unwrap();

        // With stop-gradient, the mean-output bias gradient is exactly
        // dL/dmu, and the conf-output bias gradient exactly dL/dalpha.
        let acts_pred = infer_set(&params, &set).unwrap()[0];
        let r = 0.0 - acts_pred.mu;
        let e2 = math::exp(-2.0 * acts_pred.alpha);
        let layout = params.layout();
        let mo_bias = layout.range(Tensor::MeanOutBias).start;
        let co_bias = layout.range(Tensor::ConfOutBias).start;
        assert!((out.grads[mo_bias] - (-r * e2)).abs() < 1e-12);
        assert!((out.grads[co_bias] - (1.0 - r * r * e2)).abs() < 1e-12);
    }

    #[test]
    fn stop_gradient_only_changes_mean_side() {
        let mut spec = tiny_spec();
        spec.dropout_rate = 0.0;
        let params = init_parameters(&spec, 8).unwrap();
        let set = single_sample_set(&[0.3, 0.9, -0.2, 0.4], 0.7);
        let mut config = TrainConfig {
            stop_gradient_on_mean_input: false,
            ..TrainConfig::default()
        };
        let free = backward(&params, &set, &[0], &config, None).unwrap();
        config.stop_gradient_on_mean_input = true;
        let stopped = backward(&params, &set, &[0], &config, None).unwrap();

        let layout = params.layout();
        let conf_w = layout.range(Tensor::ConfOutWeight);
        assert_eq!(&free.grads[conf_w.clone()], &stopped.grads[conf_w]);
        let mean_w = layout.range(Tensor::MeanOutWeight);
        assert_ne!(&free.grads[mean_w.clone()], &stopped.grads[mean_w]);
    }

    #[test]
    fn learning_rate_schedule_shape() {
        let config = TrainConfig {
            learning_rate: 1e-3,
            min_learning_rate: 1e-5,
            total_steps: 100,
            warmup_proportion: 0.1,
            ..TrainConfig::default()
        };
        // Warm-up covers ceil(0.1 * 100) = 10 steps.
        assert!((learning_rate_at(&config, 1) - 1.09e-4).abs() < 1e-12);
        assert!((learning_rate_at(&config, 10) - 1e-3).abs() < 1e-15);
        assert!((learning_rate_at(&config, 55) - 5.05e-4).abs() < 1e-12);
        assert!((learning_rate_at(&config, 100) - 1e-5).abs() < 1e-15);
        assert!((learning_rate_at(&config, 150) - 1e-5).abs() < 1e-15);
    }

    #[test]
    fn radam_zero_gradients_leave_params_unchanged() {
        let spec = tiny_spec();
        let mut params = init_parameters(&spec, 4).unwrap();
        let before = params.values().to_vec();
        let mut state = RadamState::new(params.len());
        let zeros = vec![0.0; params.len()];
        let config = flat_config(0.1);
        for step in 1..=10 {
            radam_step(&mut params, &mut state, &zeros, step, &config).unwrap();
        }
        assert_eq!(params.values(), &before[..]);
    }

    // Scalar hand-trace of the published recurrence with constant gradient 1
    // and flat learning rate 0.1: bias-corrected momentum is exactly 1, so
    // steps 1-4 (rho_t <= 4) subtract exactly 0.1 each; step 5 is the first
    // rectified step and lands at 0.5982688497006801.
    #[test]
    fn radam_momentum_only_hand_trace() {
        let spec = tiny_spec();
        let mut params = init_parameters(&spec, 0).unwrap();
        let len = params.len();
        params.values_mut().fill(1.0);
        let mut state = RadamState::new(len);
        let ones = vec![1.0; len];
        let config = flat_config(0.1);
        let expected = [0.9, 0.8, 0.7, 0.6];
        for (step, want) in (1..=4).zip(expected) {
            radam_step(&mut params, &mut state, &ones, step, &config).unwrap();
            assert!(
                (params.values()[0] - want).abs() < 1e-12,
                "step {step}: got {}",
                params.values()[0]
            );
        }
        radam_step(&mut params, &mut state, &ones, 5, &config).unwrap();
        assert!((params.values()[0] - 0.598_268_849_700_680_1).abs() < 1e-12);
    }

    // Convergence smoke oracle: descending f(w) = w^2 must reach and hold a
    // monotone decrease once warm-up ends.
    #[test]
    fn radam_descends_quadratic_bowl() {
        let spec = tiny_spec();
        let mut params = init_parameters(&spec, 0).unwrap();
        let len = params.len();
        params.values_mut().fill(1.0);
        let mut state = RadamState::new(len);
        let config = TrainConfig {
            learning_rate: 0.05,
            min_learning_rate: 1e-4,
            total_steps: 200,
            warmup_proportion: 0.1,
            ..TrainConfig::default()
        };
        let mut last = f64::INFINITY;
        for step in 1..=200 {
            let w = params.values()[0];
            let grads = vec![2.0 * w; len];
            radam_step(&mut params, &mut state, &grads, step, &config).unwrap();
            let f = params.values()[0] * params.values()[0];
            if step > 20 {
                assert!(f <= last + 1e-12, "f rose at step {step}: {last} -> {f}");
            }
            last = f;
        }
        assert!(last < 0.5, "bowl not descended: f = {last}");
    }

    #[test]
    fn train_overfits_a_deterministic_map() {
        let mut spec = tiny_spec();
        spec.dropout_rate = 0.0;
        // y = 0.8*a - 0.3*b from the newest row; 96 train + 32 val samples.
        let gen = |i: usize| {
            let a = (i as f64 * 0.731).sin() * 0.5;
            let b = (i as f64 * 0.417).cos() * 0.5;
            ([a * 0.9, b * 0.9, a, b], 0.8 * a - 0.3 * b)
        };
        let mut train_set = SampleSet::new(2, 2);
        let mut val_set = SampleSet::new(2, 2);
        for i in 0..96 {
            let (w, y) = gen(i);
            train_set.push(&w, y).unwrap();
        }
        for i in 96..128 {
            let (w, y) = gen(i);
            val_set.push(&w, y).unwrap();
        }
        let config = TrainConfig {
            batch_size: 16,
            learning_rate: 5e-3,
            min_learning_rate: 1e-4,
            total_steps: 600,
            warmup_proportion: 0.1,
            patience: 40,
            max_epochs: 100,
            seed: 7,
            stop_gradient_on_mean_input: false,
        };
        let (params, report) = train(&spec, &train_set, &val_set, &config).unwrap();
        assert!(report.epochs >= 1);
        assert_eq!(report.validation_nll.len(), report.epochs);
        assert!(
            report.best_validation_nll < report.validation_nll[0],
            "no improvement over the first epoch: {:?}",
            report.validation_nll
        );
        // The kept parameters reproduce the reported best NLL.
        let check = evaluate_nll(&params, &val_set).unwrap();
        assert!((check - report.best_validation_nll).abs() < 1e-12);
        // And the fit is a real fit: mean absolute error well under the
        // target's scale.
        let preds = infer_set(&params, &val_set).unwrap();
        let mae: f64 = preds
            .iter()
            .zip(val_set.targets())
            .map(|(p, y)| (p.mu - y).abs())
            .sum::<f64>()
            / preds.len() as f64;
        assert!(mae < 0.1, "validation MAE {mae} too large");
    }

    #[test]
    fn train_is_deterministic() {
        let mut spec = tiny_spec();
        spec.dropout_rate = 0.25;
        let mut train_set = SampleSet::new(2, 2);
        let mut val_set = SampleSet::new(2, 2);
        for i in 0..40 {
            let x = i as f64 / 40.0;
            let w = [x, 1.0 - x, x * x, 0.5];
            if i % 5 == 0 {
                val_set.push(&w, x).unwrap();
            } else {
                train_set.push(&w, x).unwrap();
            }
        }
        let config = TrainConfig {
            batch_size: 8,
            max_epochs: 5,
            patience: 5,
            total_steps: 50,
            ..TrainConfig::default()
        };
        let (p1, r1) = train(&spec, &train_set, &val_set, &config).unwrap();
        let (p2, r2) = train(&spec, &train_set, &val_set, &config).unwrap();
        assert_eq!(p1.values(), p2.values());
        assert_eq!(r1.validation_nll, r2.validation_nll);
    }

    #[test]
    fn train_rejects_bad_inputs() {
        let spec = tiny_spec();
        let empty = SampleSet::new(2, 2);
        let mut ok = SampleSet::new(2, 2);
        ok.push(&[0.0; 4], 0.0).unwrap();
        assert!(matches!(
            train(&spec, &empty, &ok, &TrainConfig::default()),
            Err(TrainingError::EmptySet(_))
        ));
        let mut wrong_shape = SampleSet::new(1, 2);
        wrong_shape.push(&[0.0; 2], 0.0).unwrap();
        assert!(matches!(
            train(&spec, &wrong_shape, &ok, &TrainConfig::default()),
            Err(TrainingError::ShapeMismatch { .. })
        ));
        let other = ModelSpec::new(names(&["x"]), "y".to_string(), 2, 2, 3).unwrap();
        drop(other);
    }

    #[test]
    fn backward_needs_rng_only_with_dropout() {
        let spec = tiny_spec(); // dropout 0.5
        let params = init_parameters(&spec, 2).unwrap();
        let set = single_sample_set(&[0.1, 0.2, 0.3, 0.4], 0.5);
        let config = TrainConfig::default();
        assert!(matches!(
            backward(&params, &set, &[0], &config, None),
            Err(TrainingError::Network(NetworkError::MissingDropoutRng))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(backward(&params, &set, &[0], &config, Some(&mut rng)).is_ok());
    }
}
