//! Adam with bias correction, global-norm gradient clipping, and uniform initialization.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::nn::rng::SplitMix64;
use crate::nn::{ParamStore, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates per parameter name plus the shared step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<String, (Vec<T>, Vec<T>)>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self, name: &str) -> Option<(&[T], &[T])> {
        self.moments.get(name).map(|(m, v)| (m.as_slice(), v.as_slice()))
    }

    pub fn iter_moments(&self) -> impl Iterator<Item = (&str, &[T], &[T])> {
        self.moments
            .iter()
            .map(|(k, (m, v))| (k.as_str(), m.as_slice(), v.as_slice()))
    }

    /// Restores a saved state (used when resuming from a checkpoint).
    pub fn restore(config: AdamConfig, step: u64, moments: BTreeMap<String, (Vec<T>, Vec<T>)>) -> Self {
        Self {
            config,
            step,
            moments,
        }
    }
}

/// One bias-corrected Adam update over every parameter in `store`, then zeroes
/// the gradients.
pub fn adam_step<T: Real>(store: &mut ParamStore<T>, state: &mut AdamState<T>) -> Result<()> {
    if let Some((name, _)) = store.iter().find(|(_, t)| t.grad().is_none()) {
        return Err(Error::MissingGrad(name.to_string()));
    }
    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let bc1 = T::of(1.0 - beta1.powi(t));
    let bc2 = T::of(1.0 - beta2.powi(t));
    let (b1, b2, lr, eps) = (T::of(beta1), T::of(beta2), T::of(lr), T::of(epsilon));

    for (name, p) in store.iter_mut() {
        let n = p.numel();
        let (m, v) = state
            .moments
            .entry(name.to_string())
            .or_insert_with(|| (vec![T::zero(); n], vec![T::zero(); n]));
        if m.len() != n {
            return Err(Error::Invalid(format!(
                "optimizer state for `{name}` has {} entries, parameter has {n}",
                m.len()
            )));
        }
        let g = p.grad().expect("checked above").to_vec();
        for (i, w) in p.values_mut().iter_mut().enumerate() {
            m[i] = b1 * m[i] + (T::one() - b1) * g[i];
            v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.zero_grad();
    }
    Ok(())
}

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(store: &mut ParamStore<T>, max_norm: f64) -> Result<f64> {
    if max_norm.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return invalid(format!("max_norm must be positive, got {max_norm}"));
    }
    let norm = store.grad_norm();
    if norm > max_norm {
        let scale = T::of(max_norm / norm);
        for (_, t) in store.iter_mut() {
            if let Some(g) = t.grad_mut() {
                g.iter_mut().for_each(|x| *x *= scale);
            }
        }
    }
    Ok(norm)
}

/// Fills every parameter with draws from `[lo, hi)`. Each tensor uses its own
/// substream keyed by name, so a parameter's initial value depends only on
/// `(seed, name, shape)`.
pub fn uniform_init<T: Real>(store: &mut ParamStore<T>, lo: f64, hi: f64, seed: u64) -> Result<()> {
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return invalid(format!("uniform_init needs lo < hi, got [{lo}, {hi})"));
    }
    let (lo_t, hi_t) = (T::of(lo), T::of(hi));
    for (name, t) in store.iter_mut() {
        let mut rng = SplitMix64::substream(seed, name);
        for w in t.values_mut() {
            // Rounding to a narrower type can land on `hi`; redraw in that case.
            *w = loop {
                let x = T::of(lo + (hi - lo) * rng.next_f64());
                if x >= lo_t && x < hi_t {
                    break x;
                }
            };
        }
    }
    Ok(())
}
