//! Quantitative analysis of streaming results: MAE, MSED-versus-position
//! summaries, Mann-Whitney U comparisons and run-duration statistics.
//!
//! Everything here is a pure function over immutable result sets; the host
//! crate turns the returned tables into CSV reports.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::datasets::ScalingPair;
use crate::math;
use crate::runtime::RunRecord;

/// Largest `n1 * n2` for which the exact Mann-Whitney null distribution is
/// enumerated; larger (or tied) inputs use the tie-corrected normal
/// approximation.
pub const MAX_EXACT_PRODUCT: usize = 400;

/// Errors raised by the analysis functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvaluationError {
    /// An input collection that must be non-empty was empty.
    Empty(&'static str),
    /// Paired inputs had different lengths.
    LengthMismatch { expected: usize, got: usize },
    /// A run was too short to split into halves.
    RunTooShort { run: usize, len: usize },
    /// Fewer than two position bins requested.
    BadBins(usize),
    /// Quantile cut outside `(0, 1]`.
    BadQuantileCut,
}

impl fmt::Display for EvaluationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluationError::Empty(what) => write!(f, "{what} must not be empty"),
            EvaluationError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            EvaluationError::RunTooShort { run, len } => {
                write!(f, "run {run} has {len} samples; halving needs at least 2")
            }
            EvaluationError::BadBins(bins) => write!(f, "need at least 2 bins, got {bins}"),
            EvaluationError::BadQuantileCut => write!(f, "quantile cut outside (0, 1]"),
        }
    }
}

impl core::error::Error for EvaluationError {}

// ---------------------------------------------------------------------------
// MAE
// ---------------------------------------------------------------------------

/// Mean absolute error. In scaled units by default; passing the target's
/// scaling pair converts both sides back to original units first.
pub fn mae(
    predictions: &[f64],
    targets: &[f64],
    scale: Option<ScalingPair>,
) -> Result<f64, EvaluationError> {
    if predictions.len() != targets.len() {
        return Err(EvaluationError::LengthMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvaluationError::Empty("prediction set"));
    }
    let mut sum = 0.0;
    match scale {
        None => {
            for (&p, &t) in predictions.iter().zip(targets) {
                sum += math::abs(p - t);
            }
        }
        Some(pair) => {
            for (&p, &t) in predictions.iter().zip(targets) {
                sum += math::abs(pair.unscale(p) - pair.unscale(t));
            }
        }
    }
    Ok(sum / predictions.len() as f64)
}

// ---------------------------------------------------------------------------
// MSED series
// ---------------------------------------------------------------------------

/// One run's MSED trace against normalised position in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MsedSeries {
    positions: Vec<f64>,
    mseds: Vec<f64>,
}

impl MsedSeries {
    /// Wraps a full run: sample `i` of `n` sits at position `i / (n - 1)`
    /// (a single-sample run sits at 0).
    pub fn from_run(mseds: &[f64]) -> Result<MsedSeries, EvaluationError> {
        if mseds.is_empty() {
            return Err(EvaluationError::Empty("msed run"));
        }
        let n = mseds.len();
        let positions = (0..n)
            .map(|i| {
                if n == 1 {
                    0.0
                } else {
                    i as f64 / (n - 1) as f64
                }
            })
            .collect();
        Ok(MsedSeries {
            positions,
            mseds: mseds.to_vec(),
        })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.mseds.len()
    }

    /// Always false: construction rejects empty runs.
    pub fn is_empty(&self) -> bool {
        self.mseds.is_empty()
    }

    /// Normalised positions, non-decreasing in `[0, 1]`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// The MSED values.
    pub fn mseds(&self) -> &[f64] {
        &self.mseds
    }

    /// Splits by sample count: the first half takes `ceil(n / 2)` samples.
    pub fn halves(&self) -> (&[f64], &[f64]) {
        let split = self.mseds.len().div_ceil(2);
        self.mseds.split_at(split)
    }
}

// ---------------------------------------------------------------------------
// Mann-Whitney U
// ---------------------------------------------------------------------------

/// Outcome of a two-sided Mann-Whitney U test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UTestResult {
    /// U statistic of the first sample: `#(a > b) + 0.5 * #(a = b)`.
    pub u_statistic: f64,
    /// Two-sided p-value in `[0, 1]`.
    pub p_value: f64,
    /// Arithmetic mean of the first sample.
    pub mean_first: f64,
    /// Arithmetic mean of the second sample.
    pub mean_second: f64,
    /// First sample size.
    pub n1: usize,
    /// Second sample size.
    pub n2: usize,
    /// Whether the exact null distribution was used (only without ties and
    /// for `n1 * n2` up to [`MAX_EXACT_PRODUCT`]).
    pub exact: bool,
    /// Set when every pooled value was identical; `p_value` is then 1 by
    /// convention.
    pub degenerate: bool,
}

/// Midranks of the pooled samples plus the tie correction term
/// `sum(t^3 - t)` over tie groups.
fn midranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // Items order[i..=j] share the average of ranks i+1 ..= j+1.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_term)
}

/// Coefficients of the exact Mann-Whitney null distribution: entry `u`
/// counts the arrangements of `n1 + n2` items with statistic `u`. Computed
/// as the Gaussian binomial coefficient; all counts are integers well below
/// 2^53 for the sizes admitted by [`MAX_EXACT_PRODUCT`], so `f64` holds
/// them exactly.
fn exact_u_counts(n1: usize, n2: usize) -> Vec<f64> {
    let degree = n1 * n2;
    let mut poly = vec![0.0; degree + 1];
    poly[0] = 1.0;
    for k in 1..=n1 {
        // Multiply by (1 - q^(n2 + k)): descending so reads are unmodified.
        let m = n2 + k;
        for u in (m..=degree).rev() {
            poly[u] -= poly[u - m];
        }
        // Divide by (1 - q^k): ascending prefix accumulation.
        for u in k..=degree {
            poly[u] += poly[u - k];
        }
    }
    poly
}

/// Two-sided Mann-Whitney U test of `sample1` against `sample2`.
///
/// The statistic is U of the first sample via midranks. The p-value doubles
/// the survival probability of `max(U1, U2)`: from the exact distribution
/// when the pooled data is tie-free and `n1 * n2` is at most
/// [`MAX_EXACT_PRODUCT`], otherwise from the tie- and continuity-corrected
/// normal approximation; either way clipped to `[0, 1]`. When every pooled
/// value is identical the test is meaningless: `p_value` is 1 and
/// `degenerate` is set.
pub fn mann_whitney(sample1: &[f64], sample2: &[f64]) -> Result<UTestResult, EvaluationError> {
    if sample1.is_empty() {
        return Err(EvaluationError::Empty("first sample"));
    }
    if sample2.is_empty() {
        return Err(EvaluationError::Empty("second sample"));
    }
    let n1 = sample1.len();
    let n2 = sample2.len();
    let mut pooled = Vec::with_capacity(n1 + n2);
    pooled.extend_from_slice(sample1);
    pooled.extend_from_slice(sample2);
    let (ranks, tie_term) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let u2 = (n1 * n2) as f64 - u1;
    let u_max = if u1 >= u2 { u1 } else { u2 };
    let mean_first = math::mean(sample1);
    let mean_second = math::mean(sample2);

    let n = (n1 + n2) as f64;
    let variance = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        // All pooled values identical.
        return Ok(UTestResult {
            u_statistic: u1,
            p_value: 1.0,
            mean_first,
            mean_second,
            n1,
            n2,
            exact: false,
            degenerate: true,
        });
    }

    let has_ties = tie_term > 0.0;
    let (p, exact) = if !has_ties && n1 * n2 <= MAX_EXACT_PRODUCT {
        let counts = exact_u_counts(n1, n2);
        let total: f64 = counts.iter().sum();
        let upper: f64 = counts[u_max as usize..].iter().sum();
        ((2.0 * upper / total).min(1.0), true)
    } else {
        let z = (u_max - (n1 * n2) as f64 / 2.0 - 0.5) / math::sqrt(variance);
        // Doubling the one-sided survival function of z.
        (math::normal_two_sided(z).min(1.0), false)
    };

    Ok(UTestResult {
        u_statistic: u1,
        p_value: p,
        mean_first,
        mean_second,
        n1,
        n2,
        exact,
        degenerate: false,
    })
}

/// Pools first halves against second halves across runs and compares the
/// distributions, reproducing the degradation analysis: rising MSED late in
/// runs shows up as `mean_second > mean_first` with a small p-value.
pub fn half_run_comparison(series: &[MsedSeries]) -> Result<UTestResult, EvaluationError> {
    if series.is_empty() {
        return Err(EvaluationError::Empty("series collection"));
    }
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (run, s) in series.iter().enumerate() {
        if s.len() < 2 {
            return Err(EvaluationError::RunTooShort { run, len: s.len() });
        }
        let (a, b) = s.halves();
        first.extend_from_slice(a);
        second.extend_from_slice(b);
    }
    mann_whitney(&first, &second)
}

// ---------------------------------------------------------------------------
// MSED by position
// ---------------------------------------------------------------------------

/// Distribution summary of MSED within one normalised-position bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionBin {
    /// Inclusive lower edge.
    pub lo: f64,
    /// Exclusive upper edge (inclusive for the last bin).
    pub hi: f64,
    /// Samples that fell in the bin.
    pub count: usize,
    /// Mean MSED, absent for empty bins.
    pub mean: Option<f64>,
    /// First quartile.
    pub q1: Option<f64>,
    /// Median.
    pub median: Option<f64>,
    /// Third quartile.
    pub q3: Option<f64>,
}

/// Bins every sample of every run by its normalised position and summarises
/// the MSED distribution per bin.
pub fn msed_by_position(
    series: &[MsedSeries],
    bins: usize,
) -> Result<Vec<PositionBin>, EvaluationError> {
    if bins < 2 {
        return Err(EvaluationError::BadBins(bins));
    }
    if series.iter().map(MsedSeries::len).sum::<usize>() == 0 {
        return Err(EvaluationError::Empty("series collection"));
    }
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for s in series {
        for (&pos, &msed) in s.positions().iter().zip(s.mseds()) {
            let b = ((pos * bins as f64) as usize).min(bins - 1);
            buckets[b].push(msed);
        }
    }
    let width = 1.0 / bins as f64;
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(b, mut values)| {
            let (mean, q1, median, q3) = if values.is_empty() {
                (None, None, None, None)
            } else {
                values.sort_by(f64::total_cmp);
                (
                    Some(math::mean(&values)),
                    Some(math::quantile_sorted(&values, 0.25)),
                    Some(math::quantile_sorted(&values, 0.5)),
                    Some(math::quantile_sorted(&values, 0.75)),
                )
            };
            PositionBin {
                lo: b as f64 * width,
                hi: (b + 1) as f64 * width,
                count: values.len(),
                mean,
                q1,
                median,
                q3,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Duration histogram
// ---------------------------------------------------------------------------

/// One histogram bin over tick durations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    /// Inclusive lower edge in microseconds.
    pub lo: f64,
    /// Exclusive upper edge (inclusive for the last bin).
    pub hi: f64,
    /// Records in the bin.
    pub count: usize,
}

/// Tick-duration statistics plus a histogram curtailed at a quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationSummary {
    /// Mean duration over all records, microseconds.
    pub mean_us: f64,
    /// Median duration over all records.
    pub median_us: f64,
    /// 95th percentile duration over all records.
    pub p95_us: f64,
    /// Implied maximum sustainable tick rate, `1 / p95`, in ticks per
    /// second.
    pub rate_per_second: f64,
    /// Records with duration at or below the cut quantile.
    pub included: usize,
    /// All records.
    pub total: usize,
    /// Histogram over `[min, quantile_cut]`.
    pub bins: Vec<HistogramBin>,
}

/// Summarises tick durations: mean/median/p95 over every record, and a
/// `bins`-bar histogram curtailed at the `quantile_cut` quantile (pass 1.0
/// to include everything).
pub fn duration_histogram(
    records: &[RunRecord],
    quantile_cut: f64,
    bins: usize,
) -> Result<DurationSummary, EvaluationError> {
    if records.is_empty() {
        return Err(EvaluationError::Empty("run records"));
    }
    if !(quantile_cut > 0.0 && quantile_cut <= 1.0) {
        return Err(EvaluationError::BadQuantileCut);
    }
    if bins == 0 {
        return Err(EvaluationError::BadBins(bins));
    }
    let mut durations: Vec<f64> = records.iter().map(|r| r.duration_us).collect();
    durations.sort_by(f64::total_cmp);
    let mean_us = math::mean(&durations);
    let median_us = math::quantile_sorted(&durations, 0.5);
    let p95_us = math::quantile_sorted(&durations, 0.95);
    let cut = math::quantile_sorted(&durations, quantile_cut);
    let lo = durations[0];
    let included = durations.iter().take_while(|&&d| d <= cut).count();
    let width = (cut - lo) / bins as f64;
    let mut table = vec![0usize; bins];
    for &d in &durations[..included] {
        let b = if width > 0.0 {
            (((d - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        table[b] += 1;
    }
    let bins = table
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count,
        })
        .collect();
    Ok(DurationSummary {
        mean_us,
        median_us,
        p95_us,
        rate_per_second: 1e6 / p95_us,
        included,
        total: durations.len(),
        bins,
    })
}
