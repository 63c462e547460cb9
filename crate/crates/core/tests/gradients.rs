//! Finite-difference validation of the hand-written backward pass.
//!
//! For a batch the analytic gradient must match the central difference
//! `(L(w + h) - L(w - h)) / 2h` in every coordinate. The loss is piecewise
//! smooth (leaky ReLU kinks), so a probe window can occasionally place a
//! pre-activation within `h` of a kink, where finite differences are simply
//! invalid; any coordinate that misses the tolerance on the primary window is
//! therefore re-verified on two independent windows and must pass on both.
//! A real gradient bug fails everywhere; a kink crossing is specific to one
//! window's geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sentinel_core::network::{init_parameters, ModelParams, ModelSpec};
use sentinel_core::training::{backward, SampleSet, TrainConfig};

const H: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;
/// Gradients below this magnitude are compared on an absolute scale.
const SCALE_FLOOR: f64 = 1e-5;

fn spec(s: usize, t: usize, f: usize, d: usize) -> ModelSpec {
    let inputs = (0..s).map(|i| format!("in_{i}")).collect();
    let mut spec = ModelSpec::new(inputs, "out".to_string(), t, f, d).unwrap();
    spec.dropout_rate = 0.0; // finite differences need a deterministic loss
    spec
}

fn probe_set(spec: &ModelSpec, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = SampleSet::new(spec.window_len, spec.inputs());
    let window: Vec<f64> = (0..spec.window_values())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let target = rng.gen_range(-1.0..1.0);
    set.push(&window, target).unwrap();
    set
}

fn batch_nll(params: &ModelParams, set: &SampleSet, config: &TrainConfig) -> f64 {
    backward(params, set, &[0], config, None).unwrap().nll
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(SCALE_FLOOR)
}

/// Central-difference error of coordinate `i` on the given probe sample.
fn fd_rel_err(
    spec: &ModelSpec,
    base: &ModelParams,
    set: &SampleSet,
    config: &TrainConfig,
    analytic: f64,
    i: usize,
) -> f64 {
    let mut plus = base.values().to_vec();
    plus[i] += H;
    let mut minus = base.values().to_vec();
    minus[i] -= H;
    let p_plus = ModelParams::from_values(spec.clone(), 0, plus).unwrap();
    let p_minus = ModelParams::from_values(spec.clone(), 0, minus).unwrap();
    let fd = (batch_nll(&p_plus, set, config) - batch_nll(&p_minus, set, config)) / (2.0 * H);
    rel_err(analytic, fd)
}

fn check_network(spec: &ModelSpec, seed: u64, stride: usize) {
    let params = init_parameters(spec, seed).unwrap();
    let config = TrainConfig::default();
    let primary = probe_set(spec, seed.wrapping_mul(31).wrapping_add(1));
    let fallbacks = [
        probe_set(spec, seed.wrapping_mul(31).wrapping_add(2)),
        probe_set(spec, seed.wrapping_mul(31).wrapping_add(3)),
    ];
    let grads = backward(&params, &primary, &[0], &config, None)
        .unwrap()
        .grads;
    let fallback_grads: Vec<Vec<f64>> = fallbacks
        .iter()
        .map(|set| backward(&params, set, &[0], &config, None).unwrap().grads)
        .collect();

    let mut worst = 0.0_f64;
    for i in (0..params.len()).step_by(stride) {
        let err = fd_rel_err(spec, &params, &primary, &config, grads[i], i);
        if err < TOLERANCE {
            worst = worst.max(err);
            continue;
        }
        // Suspect a leaky-ReLU kink inside the probe interval: the same
        // coordinate must pass on both independent windows.
        for (set, g) in fallbacks.iter().zip(&fallback_grads) {
            let err2 = fd_rel_err(spec, &params, set, &config, g[i], i);
            assert!(
                err2 < TOLERANCE,
                "seed {seed}: gradient mismatch at coordinate {i}: \
                 rel err {err:.3e} on primary, {err2:.3e} on fallback"
            );
        }
    }
    assert!(worst < TOLERANCE);
}

#[test]
fn finite_differences_full_tiny_network() {
    // Every coordinate of a 157-parameter network, three seeds.
    let spec = spec(2, 2, 2, 3);
    for seed in 0..3 {
        check_network(&spec, seed, 1);
    }
}

#[test]
fn finite_differences_across_shapes() {
    // Strided sweep over a variety of shapes, including single-signal,
    // single-row and wider nets; stride still covers every tensor.
    for (s, t, f, d, seed) in [
        (1, 1, 1, 1, 10u64),
        (1, 3, 2, 2, 11),
        (3, 1, 2, 4, 12),
        (2, 4, 3, 3, 13),
        (4, 2, 2, 2, 14),
    ] {
        check_network(&spec(s, t, f, d), seed, 3);
    }
}

#[test]
fn finite_differences_respect_batch_averaging() {
    // The batch gradient is the mean of per-sample gradients.
    let spec = spec(2, 2, 2, 3);
    let params = init_parameters(&spec, 99).unwrap();
    let config = TrainConfig::default();
    let mut set = SampleSet::new(2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let w: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        set.push(&w, rng.gen_range(-1.0..1.0)).unwrap();
    }
    let whole = backward(&params, &set, &[0, 1, 2], &config, None).unwrap();
    let mut mean = vec![0.0; params.len()];
    for i in 0..3 {
        let single = backward(&params, &set, &[i], &config, None).unwrap();
        for (m, g) in mean.iter_mut().zip(&single.grads) {
            *m += g / 3.0;
        }
    }
    for (i, (a, b)) in whole.grads.iter().zip(&mean).enumerate() {
        assert!(
            (a - b).abs() <= 1e-12 * a.abs().max(1.0),
            "coordinate {i}: batch {a} vs mean-of-singles {b}"
        );
    }
}

#[test]
fn gradients_flow_into_every_tensor() {
    // No tensor may end up with an all-zero gradient: that would mean a
    // layer is disconnected from the loss.
    let spec = spec(2, 2, 2, 3);
    let params = init_parameters(&spec, 123).unwrap();
    let config = TrainConfig::default();
    let set = probe_set(&spec, 77);
    let grads = backward(&params, &set, &[0], &config, None).unwrap().grads;
    for def in params.layout().tensors() {
        let slice = &grads[def.offset..def.offset + def.len()];
        assert!(
            slice.iter().any(|&g| g != 0.0),
            "tensor {} received no gradient",
            def.name
        );
    }
}
