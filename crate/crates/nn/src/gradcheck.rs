//! Central finite-difference gradient checking.

use rand::seq::index::sample;

use crate::param::Parameterized;

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// (parameter name, flat index, analytic, numeric) of the worst coordinate
    pub worst: Option<(String, usize, f64, f64)>,
}

/// `|a − n| / max(|a|, |n|, 1e-7)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

/// Compares analytic gradients against central differences.
///
/// `analytic` must populate the model's gradients (they are zeroed first);
/// `loss` must evaluate the scalar objective without touching parameter
/// values. With `max_coords = Some(k)` at most `k` coordinates per tensor
/// are sampled; otherwise every coordinate is checked.
pub fn check_gradients<M, L, G>(
    model: &mut M,
    mut loss: L,
    mut analytic: G,
    step: f64,
    max_coords: Option<usize>,
    rng: &mut impl rand::Rng,
) -> GradCheckReport
where
    M: Parameterized + ?Sized,
    L: FnMut(&mut M) -> f64,
    G: FnMut(&mut M),
{
    model.zero_grad();
    analytic(model);
    let grads: Vec<_> = model.params().iter().map(|p| p.grad.clone()).collect();
    let names: Vec<_> = model.params().iter().map(|p| p.name.clone()).collect();

    let mut report = GradCheckReport::default();
    for (pi, grad) in grads.iter().enumerate() {
        let len = grad.len();
        let coords: Vec<usize> = match max_coords {
            Some(k) if k < len => sample(rng, len, k).into_vec(),
            _ => (0..len).collect(),
        };
        for idx in coords {
            let original = flat_get(model, pi, idx);
            flat_set(model, pi, idx, original + step);
            let up = loss(model);
            flat_set(model, pi, idx, original - step);
            let down = loss(model);
            flat_set(model, pi, idx, original);
            let numeric = (up - down) / (2.0 * step);
            let a = grad.as_slice_memory_order().map(|s| s[idx]).unwrap_or_else(|| grad.iter().nth(idx).copied().unwrap());
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((names[pi].clone(), idx, a, numeric));
            }
        }
    }
    model.zero_grad();
    report
}

fn flat_get<M: Parameterized + ?Sized>(model: &M, param: usize, idx: usize) -> f64 {
    let p = model.params()[param];
    let cols = p.value.ncols();
    p.value[[idx / cols, idx % cols]]
}

fn flat_set<M: Parameterized + ?Sized>(model: &mut M, param: usize, idx: usize, v: f64) {
    let mut params = model.params_mut();
    let p = &mut params[param];
    let cols = p.value.ncols();
    p.value[[idx / cols, idx % cols]] = v;
}
