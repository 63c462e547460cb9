//! Scalar math shims and small dense-kernel helpers.
//!
//! `no_std` has no float math, so the transcendental functions used by the
//! models are routed through [`libm`]. Everything downstream calls these
//! wrappers rather than `libm` directly, which keeps the dependency in one
//! place and guarantees bit-identical results across hosts.

/// `exp(x)`.
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// Natural logarithm.
#[inline(always)]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// `sqrt(x)`.
#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `x^y` for real exponents.
#[inline(always)]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// Complementary error function.
#[inline(always)]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `sin(x)`.
#[inline(always)]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

/// Absolute value.
#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// `0.5 * ln(2 * pi)`, the constant term of the Gaussian log-density.
pub const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// Differential entropy of a Gaussian with standard deviation `sigma`:
/// `0.5 * ln(2*pi*e*sigma^2)`. This is the expected NLL of a perfectly
/// calibrated heteroscedastic predictor.
#[inline]
pub fn gaussian_entropy(sigma: f64) -> f64 {
    HALF_LN_TWO_PI + 0.5 + ln(sigma)
}

/// Standard normal cumulative distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / core::f64::consts::SQRT_2)
}

/// Two-sided tail probability of a standard normal: `P(|Z| >= z)` for `z >= 0`.
#[inline]
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z / core::f64::consts::SQRT_2)
}

/// Dot product with four independent accumulators.
///
/// The fixed association order keeps results deterministic while letting the
/// compiler vectorise; this is the innermost loop of every convolution and
/// dense layer.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..chunks {
        let j = i * 4;
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..n {
        tail += a[j] * b[j];
    }
    (s0 + s1) + (s2 + s3) + tail
}

/// `acc += scale * x`, element-wise.
#[inline]
pub fn axpy(acc: &mut [f64], scale: f64, x: &[f64]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, v) in acc.iter_mut().zip(x) {
        *a += scale * v;
    }
}

/// Mean of a slice; `NaN` for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linear-interpolation quantile of an already sorted slice.
///
/// Uses the standard `h = q * (n - 1)` positioning, so `q = 0` is the minimum
/// and `q = 1` the maximum.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Pearson correlation of two equal-length slices; `NaN` if either side is
/// constant or the slices are shorter than two elements.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / sqrt(sxx * syy)
}
