//! Spectral normalization by power iteration.
//!
//! A weight `W` (shape `in × out`) is replaced by `W / σ̂` where
//! `σ̂ = uᵀ W v` and `(u, v)` are persistent estimates of the leading left and
//! right singular vectors. The estimates are refined by [`SpectralNorm::power_iterate`]
//! once per training step and held fixed during evaluation, so scoring with a
//! frozen network is a pure function.

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{NnError, Result};

/// Lower clamp on the singular-value estimate.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralNorm {
    u: Array1<f64>,
    v: Array1<f64>,
}

impl SpectralNorm {
    pub fn new(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Self {
        let mut u: Array1<f64> = (0..rows).map(|_| StandardNormal.sample(rng)).collect();
        let mut v: Array1<f64> = (0..cols).map(|_| StandardNormal.sample(rng)).collect();
        normalize_in_place(&mut u);
        normalize_in_place(&mut v);
        Self { u, v }
    }

    pub fn left(&self) -> &Array1<f64> {
        &self.u
    }

    pub fn right(&self) -> &Array1<f64> {
        &self.v
    }

    pub fn power_iterate(&mut self, weight: &Array2<f64>, iters: usize) {
        for _ in 0..iters {
            let v = weight.t().dot(&self.u);
            if l2(&v) > SIGMA_FLOOR {
                self.v = v;
                normalize_in_place(&mut self.v);
            }
            let u = weight.dot(&self.v);
            if l2(&u) > SIGMA_FLOOR {
                self.u = u;
                normalize_in_place(&mut self.u);
            }
        }
    }

    /// Current estimate `uᵀ W v`, clamped below at [`SIGMA_FLOOR`].
    pub fn sigma(&self, weight: &Array2<f64>) -> f64 {
        self.u.dot(&weight.dot(&self.v)).max(SIGMA_FLOOR)
    }

    pub fn normalize(&mut self, weight: &Array2<f64>, iters: usize) -> Array2<f64> {
        self.power_iterate(weight, iters);
        weight / self.sigma(weight)
    }
}

/// Divides `weight` by its power-iteration estimate of the largest singular value.
pub fn spectral_normalize(
    weight: &Array2<f64>,
    power_iters: usize,
    state: &mut SpectralNorm,
) -> Result<Array2<f64>> {
    if power_iters == 0 {
        return Err(NnError::InvalidArgument(
            "spectral normalization needs at least one power iteration".into(),
        ));
    }
    let (r, c) = weight.dim();
    if state.u.len() != r || state.v.len() != c {
        return Err(NnError::InvalidArgument(format!(
            "singular-vector estimates sized {}x{} for a {}x{} weight",
            state.u.len(),
            state.v.len(),
            r,
            c
        )));
    }
    Ok(state.normalize(weight, power_iters))
}

fn l2(x: &Array1<f64>) -> f64 {
    x.dot(x).sqrt()
}

fn normalize_in_place(x: &mut Array1<f64>) {
    let n = l2(x);
    if n > SIGMA_FLOOR {
        *x /= n;
    }
}
