//! Parameter updates (SGD, Adam), global-norm clipping, and the central
//! finite-difference gradient checker.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{GradientSet, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0
            && self.clip_norm > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid optimizer settings {self:?}"
            )))
        }
    }
}

/// Adam moment accumulators and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub step: u64,
    pub m: ModelParams,
    pub v: ModelParams,
}

impl OptimState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// Scales `grads` so their global L2 norm is at most `clip_norm`. Returns the
/// norm before clipping.
///
/// Norms within one part in 10¹² of the threshold count as already clipped,
/// which makes the operation exactly idempotent under rounding.
pub fn clip_gradients(grads: &mut GradientSet, clip_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > clip_norm * (1.0 + 1e-12) {
        grads.scale(clip_norm / norm);
    }
    norm
}

fn check_finite(grads: &GradientSet) -> Result<()> {
    match grads.first_non_finite() {
        Some(name) => Err(Error::Divergence(name.to_string())),
        None => Ok(()),
    }
}

/// Bias-corrected Adam update; increments `state.step`.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &GradientSet,
    state: &mut OptimState,
    cfg: &OptimConfig,
) -> Result<()> {
    params.check_congruent(grads)?;
    check_finite(grads)?;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let lr = cfg.learning_rate;
    let pts = params.named_tensors_mut();
    let gts = grads.named_tensors();
    let mts = state.m.named_tensors_mut();
    let vts = state.v.named_tensors_mut();
    for ((((_, p), (_, g)), (_, m)), (_, v)) in pts.into_iter().zip(gts).zip(mts).zip(vts) {
        let p = p.data_mut();
        let m = m.data_mut();
        let v = v.data_mut();
        for (k, &gk) in g.data().iter().enumerate() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            let mhat = m[k] / bc1;
            let vhat = v[k] / bc2;
            p[k] -= lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    if let Some(name) = params.first_non_finite() {
        return Err(Error::Divergence(name.to_string()));
    }
    Ok(())
}

pub fn sgd_step(
    params: &mut ModelParams,
    grads: &GradientSet,
    state: &mut OptimState,
    cfg: &OptimConfig,
) -> Result<()> {
    params.check_congruent(grads)?;
    check_finite(grads)?;
    state.step += 1;
    for ((_, p), (_, g)) in params
        .named_tensors_mut()
        .into_iter()
        .zip(grads.named_tensors())
    {
        crate::nn::axpy(-cfg.learning_rate, g.data(), p.data_mut());
    }
    Ok(())
}

/// Applies the configured update rule.
pub fn step(
    params: &mut ModelParams,
    grads: &GradientSet,
    state: &mut OptimState,
    cfg: &OptimConfig,
) -> Result<()> {
    match cfg.algorithm {
        Algorithm::Adam => adam_step(params, grads, state, cfg),
        Algorithm::Sgd => sgd_step(params, grads, state, cfg),
    }
}

/// Flat coordinate access, so the gradient checker works on plain vectors and
/// on full parameter sets alike.
pub trait FlatParams: Clone {
    fn flat_len(&self) -> usize;
    fn flat_get(&self, i: usize) -> f64;
    fn flat_set(&mut self, i: usize, v: f64);
}

impl FlatParams for Vec<f64> {
    fn flat_len(&self) -> usize {
        self.len()
    }

    fn flat_get(&self, i: usize) -> f64 {
        self[i]
    }

    fn flat_set(&mut self, i: usize, v: f64) {
        self[i] = v;
    }
}

impl ModelParams {
    fn locate(&self, mut i: usize) -> (usize, usize) {
        for (k, (_, t)) in self.named_tensors().iter().enumerate() {
            if i < t.len() {
                return (k, i);
            }
            i -= t.len();
        }
        panic!("flat index out of range");
    }
}

impl FlatParams for ModelParams {
    fn flat_len(&self) -> usize {
        self.num_params()
    }

    fn flat_get(&self, i: usize) -> f64 {
        let (k, j) = self.locate(i);
        self.named_tensors()[k].1.data()[j]
    }

    fn flat_set(&mut self, i: usize, v: f64) {
        let (k, j) = self.locate(i);
        self.named_tensors_mut().swap_remove(k).1.data_mut()[j] = v;
    }
}

/// Finite-difference step used by [`gradient_check`].
pub const FD_STEP: f64 = 1e-5;

/// Worst coordinate found by [`gradient_check_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub probes: usize,
}

/// Loss values the checker can difference. `f64` is the usual case; an
/// extended-precision type lets tests difference losses without the
/// cancellation noise of plain doubles.
pub trait FdValue {
    /// `self − other`, rounded to `f64`.
    fn fd_sub(&self, other: &Self) -> f64;
}

impl FdValue for f64 {
    fn fd_sub(&self, other: &Self) -> f64 {
        self - other
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compares `analytic` against central differences of `loss` at
/// `probe_count` random coordinates (all coordinates when `probe_count` is 0
/// or exceeds the parameter count).
pub fn gradient_check_report<P: FlatParams, L: FdValue>(
    loss: impl Fn(&P) -> L,
    params: &P,
    analytic: &P,
    probe_count: usize,
    seed: u64,
) -> GradCheck {
    let n = params.flat_len();
    let coords: Vec<usize> = if probe_count == 0 || probe_count >= n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = sample(&mut rng, n, probe_count).into_vec();
        c.sort_unstable();
        c
    };
    let mut worst = GradCheck {
        max_rel_error: 0.0,
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        probes: coords.len(),
    };
    let mut probe = params.clone();
    for (n_probe, &i) in coords.iter().enumerate() {
        let orig = params.flat_get(i);
        let (hi, lo) = (orig + FD_STEP, orig - FD_STEP);
        probe.flat_set(i, hi);
        let up = loss(&probe);
        probe.flat_set(i, lo);
        let down = loss(&probe);
        probe.flat_set(i, orig);
        // The representable step, not the nominal 2h.
        let numeric = up.fd_sub(&down) / (hi - lo);
        let a = analytic.flat_get(i);
        let err = relative_error(a, numeric);
        if n_probe == 0 || err > worst.max_rel_error {
            worst = GradCheck {
                max_rel_error: err,
                index: i,
                analytic: a,
                numeric,
                probes: coords.len(),
            };
        }
    }
    worst
}

/// Maximum relative error `|a − n| / max(|a|, |n|, 1e-8)` over the probes.
pub fn gradient_check<P: FlatParams, L: FdValue>(
    loss: impl Fn(&P) -> L,
    params: &P,
    analytic: &P,
    probe_count: usize,
    seed: u64,
) -> f64 {
    gradient_check_report(loss, params, analytic, probe_count, seed).max_rel_error
}
