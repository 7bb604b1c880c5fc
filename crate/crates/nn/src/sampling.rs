//! Reparameterized diagonal-Gaussian sampling.

use ndarray::{Array1, Array2, ArrayView1};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Result};

pub const LOGVAR_MIN: f64 = -20.0;
pub const LOGVAR_MAX: f64 = 5.0;

pub fn clamp_logvar(v: f64) -> f64 {
    v.clamp(LOGVAR_MIN, LOGVAR_MAX)
}

/// Returns `(mean + exp(½·logvar) ⊙ ε, ε)` with ε ~ N(0, I).
///
/// `logvar` is clamped to `[LOGVAR_MIN, LOGVAR_MAX]` first. The noise is
/// returned so callers can backpropagate with it held fixed.
pub fn gaussian_sample(
    mean: ArrayView1<f64>,
    logvar: ArrayView1<f64>,
    rng: &mut impl rand::Rng,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_dim("gaussian sample", mean.len(), logvar.len())?;
    let eps: Array1<f64> = (0..mean.len()).map(|_| StandardNormal.sample(rng)).collect();
    let mut z = eps.clone();
    ndarray::Zip::from(&mut z)
        .and(mean)
        .and(logvar)
        .for_each(|z, &m, &lv| *z = m + (0.5 * clamp_logvar(lv)).exp() * *z);
    Ok((z, eps))
}

pub fn standard_normal(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

/// Batched `mean + exp(½·clamp(logvar)) ⊙ eps`.
pub fn reparameterize(mean: &Array2<f64>, logvar: &Array2<f64>, eps: &Array2<f64>) -> Array2<f64> {
    let mut z = eps.clone();
    ndarray::Zip::from(&mut z)
        .and(mean)
        .and(logvar)
        .for_each(|z, &m, &lv| *z = m + (0.5 * clamp_logvar(lv)).exp() * *z);
    z
}

/// Gradient of a sample w.r.t. its logvar entry; zero where the clamp is active.
pub fn logvar_sensitivity(logvar: f64, eps: f64) -> f64 {
    if (LOGVAR_MIN..=LOGVAR_MAX).contains(&logvar) {
        0.5 * (0.5 * logvar).exp() * eps
    } else {
        0.0
    }
}
