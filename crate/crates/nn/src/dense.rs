use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, NnError, Result};
use crate::param::{ParamTensor, Parameterized};
use crate::spectral::SpectralNorm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: &mut Array2<f64>) {
        match self {
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => x.mapv_inplace(sigmoid),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the activation derivative, expressed through the
    /// activation's output.
    fn backprop(self, output: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Relu => grad.zip_mut_with(output, |g, &y| {
                if y <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Sigmoid => grad.zip_mut_with(output, |g, &y| *g *= y * (1.0 - y)),
            Activation::Identity => {}
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
struct DenseCache {
    input: Array2<f64>,
    output: Array2<f64>,
    /// normalized weight and the σ̂ it was divided by
    normalized: Option<(Array2<f64>, f64)>,
}

/// Fully connected layer `y = act(x W + b)` with `W` of shape `in × out`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
    pub activation: Activation,
    spectral: Option<SpectralNorm>,
    cache: Option<DenseCache>,
}

impl Dense {
    pub fn new(input: usize, output: usize, activation: Activation, rng: &mut impl rand::Rng) -> Self {
        let limit = match activation {
            Activation::Relu => (6.0 / input as f64).sqrt(),
            _ => (6.0 / (input + output) as f64).sqrt(),
        };
        let w = Array2::from_shape_fn((input, output), |_| rng.random_range(-limit..limit));
        Self::from_parts(w, Array2::zeros((1, output)), activation)
    }

    pub fn from_parts(weight: Array2<f64>, bias: Array2<f64>, activation: Activation) -> Self {
        Self {
            weight: ParamTensor::new("weight", weight),
            bias: ParamTensor::new("bias", bias),
            activation,
            spectral: None,
            cache: None,
        }
    }

    pub fn with_spectral_norm(mut self, rng: &mut impl rand::Rng) -> Self {
        let (i, o) = self.weight.value.dim();
        self.spectral = Some(SpectralNorm::new(i, o, rng));
        self
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn spectral(&self) -> Option<&SpectralNorm> {
        self.spectral.as_ref()
    }

    pub fn is_spectral(&self) -> bool {
        self.spectral.is_some()
    }

    /// One power-iteration refinement of the singular-vector estimates.
    pub fn refresh_spectral(&mut self, iters: usize) {
        if let Some(sn) = self.spectral.as_mut() {
            sn.power_iterate(&self.weight.value, iters);
        }
    }

    /// The weight actually used in the forward pass.
    pub fn effective_weight(&self) -> Array2<f64> {
        match &self.spectral {
            Some(sn) => &self.weight.value / sn.sigma(&self.weight.value),
            None => self.weight.value.clone(),
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim("dense input", self.input_dim(), x.ncols())?;
        let mut y = match &self.spectral {
            Some(sn) => x.dot(&self.weight.value) / sn.sigma(&self.weight.value),
            None => x.dot(&self.weight.value),
        };
        y += &self.bias.value;
        self.activation.apply(&mut y);
        Ok(y)
    }

    pub fn forward(&mut self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_dim("dense input", self.input_dim(), x.ncols())?;
        let normalized = self.spectral.as_ref().map(|sn| {
            let sigma = sn.sigma(&self.weight.value);
            (&self.weight.value / sigma, sigma)
        });
        let w = normalized.as_ref().map(|(w, _)| w).unwrap_or(&self.weight.value);
        let mut y = x.dot(w);
        y += &self.bias.value;
        self.activation.apply(&mut y);
        self.cache = Some(DenseCache {
            input: x.clone(),
            output: y.clone(),
            normalized,
        });
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, grad_out: &Array2<f64>) -> Result<Array2<f64>> {
        let cache = self.cache.as_ref().ok_or(NnError::MissingCache)?;
        check_dim("dense upstream gradient", self.output_dim(), grad_out.ncols())?;
        check_dim("dense upstream batch", cache.output.nrows(), grad_out.nrows())?;
        let mut delta = grad_out.clone();
        self.activation.backprop(&cache.output, &mut delta);
        let g_w = cache.input.t().dot(&delta);
        self.bias.grad += &delta.sum_axis(Axis(0)).insert_axis(Axis(0));
        let grad_in = match (&cache.normalized, &self.spectral) {
            (Some((w_bar, sigma)), Some(sn)) => {
                // d(W/σ)/dW with σ = uᵀWv and (u, v) held fixed
                let inner: f64 = (&g_w * w_bar).sum();
                let u = sn.left().view().insert_axis(Axis(1));
                let v = sn.right().view().insert_axis(Axis(0));
                let correction = u.dot(&v) * inner;
                self.weight.grad.scaled_add(1.0 / sigma, &(g_w - correction));
                delta.dot(&w_bar.t())
            }
            _ => {
                self.weight.grad += &g_w;
                delta.dot(&self.weight.value.t())
            }
        };
        Ok(grad_in)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

/// Forward caches of every layer of a [`DenseNet`], detached so one network
/// can be unrolled several times before the reverse pass.
#[derive(Debug, Clone)]
pub struct NetCache(Vec<Option<DenseCache>>);

/// A chain of dense layers.
#[derive(Debug, Clone)]
pub struct DenseNet {
    layers: Vec<Dense>,
}

impl DenseNet {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NnError::InvalidArgument("a network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_dim("layer chaining", pair[0].output_dim(), pair[1].input_dim())?;
        }
        Ok(Self { layers })
    }

    /// Multi-layer perceptron with `hidden_act` on every hidden layer.
    pub fn mlp(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_act: Activation,
        output_act: Activation,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output_act } else { hidden_act };
                Dense::new(dims[i], dims[i + 1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn with_spectral_norm(mut self, rng: &mut impl rand::Rng) -> Self {
        self.layers = self
            .layers
            .into_iter()
            .map(|l| l.with_spectral_norm(rng))
            .collect();
        self
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn refresh_spectral(&mut self, iters: usize) {
        for l in &mut self.layers {
            l.refresh_spectral(iters);
        }
    }

    /// Batched forward pass that caches what [`DenseNet::backward`] needs.
    pub fn forward(&mut self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut h = self.layers[0].forward(x)?;
        for l in &mut self.layers[1..] {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    pub fn forward_one(&mut self, x: &Array1<f64>) -> Result<Array1<f64>> {
        let y = self.forward(&x.view().insert_axis(Axis(0)).to_owned())?;
        Ok(y.row(0).to_owned())
    }

    /// Cache-free evaluation; safe to call concurrently on a frozen network.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut h = self.layers[0].predict(x)?;
        for l in &self.layers[1..] {
            h = l.predict(h.view())?;
        }
        Ok(h)
    }

    pub fn predict_one(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        let y = self.predict(x.view().insert_axis(Axis(0)))?;
        Ok(y.row(0).to_owned())
    }

    pub fn backward(&mut self, grad_out: &Array2<f64>) -> Result<Array2<f64>> {
        let mut g = grad_out.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g)?;
        }
        Ok(g)
    }

    pub fn backward_one(&mut self, grad_out: &Array1<f64>) -> Result<Array1<f64>> {
        let g = self.backward(&grad_out.view().insert_axis(Axis(0)).to_owned())?;
        Ok(g.row(0).to_owned())
    }

    pub fn clear_cache(&mut self) {
        for l in &mut self.layers {
            l.clear_cache();
        }
    }

    /// Moves the forward caches out of the network.
    pub fn take_cache(&mut self) -> NetCache {
        NetCache(self.layers.iter_mut().map(|l| l.cache.take()).collect())
    }

    /// Reinstalls caches taken by [`DenseNet::take_cache`] so that
    /// [`DenseNet::backward`] can run against that forward pass.
    pub fn restore_cache(&mut self, cache: NetCache) -> Result<()> {
        check_dim("restored cache layers", self.layers.len(), cache.0.len())?;
        for (l, c) in self.layers.iter_mut().zip(cache.0) {
            l.cache = c;
        }
        Ok(())
    }
}

impl Parameterized for DenseNet {
    fn params(&self) -> Vec<&ParamTensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use crate::gradcheck::check_gradients;
    use crate::rng::seeded;
    use ndarray::array;

    fn squared_sum(y: &Array2<f64>) -> (f64, Array2<f64>) {
        (0.5 * y.iter().map(|v| v * v).sum::<f64>(), y.clone())
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let l = Dense::from_parts(Array2::eye(2), Array2::zeros((1, 2)), Activation::Identity);
        let mut net = DenseNet::from_layers(vec![l]).unwrap();
        let y = net.forward_one(&array![1.0, 2.0]).unwrap();
        assert_eq!(y, array![1.0, 2.0]);
    }

    #[test]
    fn zero_sigmoid_layer_outputs_half() {
        let l = Dense::from_parts(Array2::zeros((3, 4)), Array2::zeros((1, 4)), Activation::Sigmoid);
        let net = DenseNet::from_layers(vec![l]).unwrap();
        let y = net.predict_one(&array![5.0, -3.0, 0.25]).unwrap();
        assert!(y.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn hand_evaluated_two_layer_relu() {
        // h = relu([1,-1] · W1 + b1), W1 = [[1,2],[3,-1]], b1 = [0.5, 0]
        //   = relu([1-3+0.5, 2+1+0]) = relu([-1.5, 3]) = [0, 3]
        // y = h · W2 + b2, W2 = [[2],[0.5]], b2 = [1] → 0*2 + 3*0.5 + 1 = 2.5
        let l1 = Dense::from_parts(array![[1.0, 2.0], [3.0, -1.0]], array![[0.5, 0.0]], Activation::Relu);
        let l2 = Dense::from_parts(array![[2.0], [0.5]], array![[1.0]], Activation::Identity);
        let mut net = DenseNet::from_layers(vec![l1, l2]).unwrap();
        let y = net.forward_one(&array![1.0, -1.0]).unwrap();
        assert_eq!(y, array![2.5]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut rng = seeded(0);
        let mut net = DenseNet::mlp(3, &[4], 2, Activation::Relu, Activation::Identity, &mut rng);
        assert!(matches!(
            net.forward_one(&array![1.0, 2.0]),
            Err(NnError::DimensionMismatch { .. })
        ));
        let a = Dense::new(3, 4, Activation::Relu, &mut rng);
        let b = Dense::new(5, 1, Activation::Relu, &mut rng);
        assert!(DenseNet::from_layers(vec![a, b]).is_err());
    }

    #[test]
    fn backward_without_forward_is_an_error() {
        let mut rng = seeded(0);
        let mut net = DenseNet::mlp(2, &[3], 1, Activation::Relu, Activation::Identity, &mut rng);
        assert!(matches!(net.backward_one(&array![1.0]), Err(NnError::MissingCache)));
    }

    #[test]
    fn zero_upstream_leaves_gradients_unchanged() {
        let mut rng = seeded(1);
        let mut net = DenseNet::mlp(3, &[5], 2, Activation::Relu, Activation::Sigmoid, &mut rng);
        net.forward_one(&array![0.1, 0.2, 0.3]).unwrap();
        net.backward_one(&array![1.0, -1.0]).unwrap();
        let before: Vec<_> = net.params().iter().map(|p| p.grad.clone()).collect();
        net.forward_one(&array![0.4, -0.2, 0.9]).unwrap();
        net.backward_one(&array![0.0, 0.0]).unwrap();
        let after: Vec<_> = net.params().iter().map(|p| p.grad.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn scalar_quadratic_matches_analytic() {
        // f(x) = w · x² realised as a 1×1 identity layer fed x²: df/dw = x²,
        // and the chain rule through the square gives df/dx = 2 w x.
        let w = 1.7;
        let x = 0.6;
        let l = Dense::from_parts(array![[w]], array![[0.0]], Activation::Identity);
        let mut net = DenseNet::from_layers(vec![l]).unwrap();
        net.forward_one(&array![x * x]).unwrap();
        let g_in = net.backward_one(&array![1.0]).unwrap();
        let dfdx = g_in[0] * 2.0 * x;
        assert!((dfdx - 2.0 * w * x).abs() / (2.0 * w * x) < 1e-4);
        assert!((net.params()[0].grad[[0, 0]] - x * x).abs() < 1e-12);
    }

    #[test]
    fn random_three_layer_net_matches_finite_differences() {
        let mut rng = seeded(11);
        for trial in 0..10 {
            let mut net = DenseNet::mlp(4, &[6, 5], 3, Activation::Relu, Activation::Sigmoid, &mut rng);
            let x = Array2::from_shape_fn((1, 4), |_| rng.random_range(-1.0..1.0));
            let report = check_gradients(
                &mut net,
                |n| squared_sum(&n.predict(x.view()).unwrap()).0,
                |n| {
                    let y = n.forward(&x).unwrap();
                    n.backward(&squared_sum(&y).1).unwrap();
                },
                1e-5,
                None,
                &mut rng,
            );
            assert!(report.max_rel_error < 1e-3, "trial {trial}: {report:?}");
        }
    }

    #[test]
    fn restored_caches_backpropagate_an_unrolled_net() {
        // loss = ½‖f(f(x))‖², one network applied twice
        let mut rng = seeded(13);
        let mut net = DenseNet::mlp(3, &[4], 3, Activation::Relu, Activation::Identity, &mut rng);
        let x = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
        let report = check_gradients(
            &mut net,
            |n| squared_sum(&n.predict(n.predict(x.view()).unwrap().view()).unwrap()).0,
            |n| {
                let y1 = n.forward(&x).unwrap();
                let first = n.take_cache();
                let y2 = n.forward(&y1).unwrap();
                let g1 = n.backward(&squared_sum(&y2).1).unwrap();
                n.restore_cache(first).unwrap();
                n.backward(&g1).unwrap();
            },
            1e-5,
            None,
            &mut rng,
        );
        assert!(report.max_rel_error < 1e-3, "{report:?}");
    }

    #[test]
    fn spectral_layers_match_finite_differences() {
        let mut rng = seeded(12);
        for trial in 0..5 {
            let mut net = DenseNet::mlp(4, &[6], 1, Activation::Relu, Activation::Identity, &mut rng)
                .with_spectral_norm(&mut rng);
            net.refresh_spectral(1);
            let x = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
            let report = check_gradients(
                &mut net,
                |n| squared_sum(&n.predict(x.view()).unwrap()).0,
                |n| {
                    let y = n.forward(&x).unwrap();
                    n.backward(&squared_sum(&y).1).unwrap();
                },
                1e-5,
                None,
                &mut rng,
            );
            assert!(report.max_rel_error < 1e-3, "trial {trial}: {report:?}");
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = seeded(13);
        let mut net = DenseNet::mlp(3, &[4], 2, Activation::Relu, Activation::Sigmoid, &mut rng);
        let x = array![0.3, -0.7, 0.2];
        let y = net.forward_one(&x).unwrap();
        let g = net.backward_one(&y).unwrap();
        for i in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += 1e-5;
            xm[i] -= 1e-5;
            let fp = 0.5 * net.predict_one(&xp).unwrap().mapv(|v| v * v).sum();
            let fm = 0.5 * net.predict_one(&xm).unwrap().mapv(|v| v * v).sum();
            let num = (fp - fm) / 2e-5;
            assert!(crate::relative_error(g[i], num) < 1e-4);
        }
    }

    #[test]
    fn sigmoid_output_in_open_unit_interval() {
        let mut rng = seeded(14);
        let net = DenseNet::mlp(2, &[8], 3, Activation::Relu, Activation::Sigmoid, &mut rng);
        let x = Array2::from_shape_fn((50, 2), |_| rng.random_range(-3.0..3.0));
        let y = net.predict(x.view()).unwrap();
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
