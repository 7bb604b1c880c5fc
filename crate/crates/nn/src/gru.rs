//! Gated recurrent cell with explicit per-step caches for truncated BPTT.

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::dense::sigmoid;
use crate::error::{check_dim, Result};
use crate::param::{ParamTensor, Parameterized};

/// GRU cell. Gate blocks are laid out `[reset | update | candidate]` along the
/// column axis of each weight.
///
/// ```text
/// r  = σ(x Wr + br + h Ur + cr)
/// u  = σ(x Wu + bu + h Uu + cu)
/// n  = tanh(x Wn + bn + r ⊙ (h Un + cn))
/// h' = (1 − u) ⊙ n + u ⊙ h
/// ```
#[derive(Debug, Clone)]
pub struct GruCell {
    input_dim: usize,
    hidden_dim: usize,
    pub w_input: ParamTensor,
    pub w_hidden: ParamTensor,
    pub b_input: ParamTensor,
    pub b_hidden: ParamTensor,
}

/// Everything the reverse pass of one step needs.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    x: Array2<f64>,
    h: Array2<f64>,
    r: Array2<f64>,
    u: Array2<f64>,
    n: Array2<f64>,
    hidden_candidate: Array2<f64>,
}

impl GruCell {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut impl rand::Rng) -> Self {
        let k = 1.0 / (hidden_dim as f64).sqrt();
        let mut init = |r, c| Array2::from_shape_fn((r, c), |_| rng.random_range(-k..k));
        let w_input = init(input_dim, 3 * hidden_dim);
        let w_hidden = init(hidden_dim, 3 * hidden_dim);
        Self {
            input_dim,
            hidden_dim,
            w_input: ParamTensor::new("gru.w_input", w_input),
            w_hidden: ParamTensor::new("gru.w_hidden", w_hidden),
            b_input: ParamTensor::zeros("gru.b_input", 1, 3 * hidden_dim),
            b_hidden: ParamTensor::zeros("gru.b_hidden", 1, 3 * hidden_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn initial_state(&self, batch: usize) -> Array2<f64> {
        Array2::zeros((batch, self.hidden_dim))
    }

    fn gates(&self, x: ArrayView2<f64>, h: ArrayView2<f64>) -> Result<[Array2<f64>; 4]> {
        check_dim("gru input", self.input_dim, x.ncols())?;
        check_dim("gru hidden", self.hidden_dim, h.ncols())?;
        check_dim("gru batch", x.nrows(), h.nrows())?;
        let d = self.hidden_dim;
        let gx = x.dot(&self.w_input.value) + &self.b_input.value;
        let gh = h.dot(&self.w_hidden.value) + &self.b_hidden.value;
        let mut r = &gx.slice(s![.., 0..d]) + &gh.slice(s![.., 0..d]);
        r.mapv_inplace(sigmoid);
        let mut u = &gx.slice(s![.., d..2 * d]) + &gh.slice(s![.., d..2 * d]);
        u.mapv_inplace(sigmoid);
        let hidden_candidate = gh.slice(s![.., 2 * d..]).to_owned();
        let mut n = &r * &hidden_candidate + gx.slice(s![.., 2 * d..]);
        n.mapv_inplace(f64::tanh);
        Ok([r, u, n, hidden_candidate])
    }

    fn combine(h: ArrayView2<f64>, u: &Array2<f64>, n: &Array2<f64>) -> Array2<f64> {
        let mut out = n.clone();
        ndarray::Zip::from(&mut out)
            .and(u)
            .and(h)
            .for_each(|o, &u, &h| *o = (1.0 - u) * *o + u * h);
        out
    }

    /// One step without caching.
    pub fn step(&self, x: ArrayView2<f64>, h: ArrayView2<f64>) -> Result<Array2<f64>> {
        let [_, u, n, _] = self.gates(x, h)?;
        Ok(Self::combine(h, &u, &n))
    }

    pub fn step_cached(&self, x: ArrayView2<f64>, h: ArrayView2<f64>) -> Result<(Array2<f64>, GruStepCache)> {
        let [r, u, n, hidden_candidate] = self.gates(x, h)?;
        let next = Self::combine(h, &u, &n);
        let cache = GruStepCache {
            x: x.to_owned(),
            h: h.to_owned(),
            r,
            u,
            n,
            hidden_candidate,
        };
        Ok((next, cache))
    }

    /// Accumulates parameter gradients for one step and returns
    /// `(d input, d previous hidden)`.
    pub fn backward_step(&mut self, cache: &GruStepCache, grad_next: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let GruStepCache {
            x,
            h,
            r,
            u,
            n,
            hidden_candidate,
        } = cache;
        let d = self.hidden_dim;
        let batch = x.nrows();

        let mut dn_pre = grad_next * &u.mapv(|v| 1.0 - v);
        dn_pre.zip_mut_with(n, |g, &n| *g *= 1.0 - n * n);
        let mut du_pre = grad_next * &(h - n);
        du_pre.zip_mut_with(u, |g, &u| *g *= u * (1.0 - u));
        let mut dr_pre = &dn_pre * hidden_candidate;
        dr_pre.zip_mut_with(r, |g, &r| *g *= r * (1.0 - r));

        let mut dgx = Array2::zeros((batch, 3 * d));
        dgx.slice_mut(s![.., 0..d]).assign(&dr_pre);
        dgx.slice_mut(s![.., d..2 * d]).assign(&du_pre);
        dgx.slice_mut(s![.., 2 * d..]).assign(&dn_pre);
        let mut dgh = dgx.clone();
        dgh.slice_mut(s![.., 2 * d..]).assign(&(&dn_pre * r));

        self.w_input.grad += &x.t().dot(&dgx);
        self.b_input.grad += &dgx.sum_axis(Axis(0)).insert_axis(Axis(0));
        self.w_hidden.grad += &h.t().dot(&dgh);
        self.b_hidden.grad += &dgh.sum_axis(Axis(0)).insert_axis(Axis(0));

        let dx = dgx.dot(&self.w_input.value.t());
        let dh = dgh.dot(&self.w_hidden.value.t()) + grad_next * u;
        (dx, dh)
    }
}

impl Parameterized for GruCell {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.w_input, &self.w_hidden, &self.b_input, &self.b_hidden]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![
            &mut self.w_input,
            &mut self.w_hidden,
            &mut self.b_input,
            &mut self.b_hidden,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use crate::gradcheck::check_gradients;
    use crate::rng::seeded;

    /// Unrolls the cell over `xs` and returns ½‖h_T‖².
    fn unrolled_loss(cell: &GruCell, xs: &[Array2<f64>], h0: &Array2<f64>) -> f64 {
        let mut h = h0.clone();
        for x in xs {
            h = cell.step(x.view(), h.view()).unwrap();
        }
        0.5 * h.iter().map(|v| v * v).sum::<f64>()
    }

    fn unrolled_backward(cell: &mut GruCell, xs: &[Array2<f64>], h0: &Array2<f64>) -> Array2<f64> {
        let mut h = h0.clone();
        let mut caches = Vec::new();
        for x in xs {
            let (next, cache) = cell.step_cached(x.view(), h.view()).unwrap();
            caches.push(cache);
            h = next;
        }
        let mut dh = h;
        for cache in caches.iter().rev() {
            let (_, prev) = cell.backward_step(cache, &dh);
            dh = prev;
        }
        dh
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = seeded(21);
        for trial in 0..10 {
            let mut cell = GruCell::new(3, 4, &mut rng);
            // non-zero biases so every gate term is exercised
            for p in cell.params_mut() {
                p.value.mapv_inplace(|v| v + 0.1);
            }
            let xs: Vec<Array2<f64>> = (0..3)
                .map(|_| Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0)))
                .collect();
            let h0 = Array2::from_shape_fn((2, 4), |_| rng.random_range(-0.5..0.5));
            let report = check_gradients(
                &mut cell,
                |c| unrolled_loss(c, &xs, &h0),
                |c| {
                    unrolled_backward(c, &xs, &h0);
                },
                1e-5,
                None,
                &mut rng,
            );
            assert!(report.max_rel_error < 1e-3, "trial {trial}: {report:?}");
        }
    }

    #[test]
    fn hidden_gradient_matches_finite_differences() {
        let mut rng = seeded(22);
        let mut cell = GruCell::new(2, 3, &mut rng);
        let xs = vec![Array2::from_shape_fn((1, 2), |_| rng.random_range(-1.0..1.0)); 2];
        let h0 = Array2::from_shape_fn((1, 3), |_| rng.random_range(-0.5..0.5));
        let dh0 = unrolled_backward(&mut cell, &xs, &h0);
        for j in 0..3 {
            let mut hp = h0.clone();
            let mut hm = h0.clone();
            hp[[0, j]] += 1e-5;
            hm[[0, j]] -= 1e-5;
            let num = (unrolled_loss(&cell, &xs, &hp) - unrolled_loss(&cell, &xs, &hm)) / 2e-5;
            assert!(crate::relative_error(dh0[[0, j]], num) < 1e-4);
        }
    }

    #[test]
    fn step_is_deterministic_and_preserves_hidden_dim() {
        let mut rng = seeded(23);
        let cell = GruCell::new(5, 7, &mut rng);
        let x = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0));
        let h = cell.initial_state(4);
        let a = cell.step(x.view(), h.view()).unwrap();
        let b = cell.step(x.view(), h.view()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), (4, 7));
        let c = cell.step(x.view(), a.view()).unwrap();
        assert_eq!(c.dim(), (4, 7));
    }
}
