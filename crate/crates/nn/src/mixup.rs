use ndarray::{Array1, ArrayView1};
use rand_distr::{Beta, Distribution};

use crate::error::{check_dim, NnError, Result};

/// A mixed input/label pair and the weight that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixed {
    pub x: Array1<f64>,
    pub y: f64,
    pub lambda: f64,
}

/// Draws λ ~ Beta(alpha, alpha).
pub fn sample_mixup_lambda(alpha: f64, rng: &mut impl rand::Rng) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(NnError::InvalidArgument(format!("mixup alpha must be positive, got {alpha}")));
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| NnError::InvalidArgument(e.to_string()))?;
    Ok(beta.sample(rng).clamp(0.0, 1.0))
}

pub fn mixup_with_lambda(
    x1: ArrayView1<f64>,
    y1: f64,
    x2: ArrayView1<f64>,
    y2: f64,
    lambda: f64,
) -> Result<Mixed> {
    check_dim("mixup pair", x1.len(), x2.len())?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(NnError::InvalidArgument(format!("mixup weight {lambda} outside [0, 1]")));
    }
    let x = if lambda == 1.0 {
        x1.to_owned()
    } else if lambda == 0.0 {
        x2.to_owned()
    } else {
        &x1 * lambda + &x2 * (1.0 - lambda)
    };
    let y = if lambda == 1.0 {
        y1
    } else if lambda == 0.0 {
        y2
    } else {
        lambda * y1 + (1.0 - lambda) * y2
    };
    Ok(Mixed { x, y, lambda })
}

pub fn mixup_pair(
    x1: ArrayView1<f64>,
    y1: f64,
    x2: ArrayView1<f64>,
    y2: f64,
    alpha: f64,
    rng: &mut impl rand::Rng,
) -> Result<Mixed> {
    check_dim("mixup pair", x1.len(), x2.len())?;
    let lambda = sample_mixup_lambda(alpha, rng)?;
    mixup_with_lambda(x1, y1, x2, y2, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn unit_weight_returns_first_pair() {
        let a = array![1.0, 2.0];
        let b = array![-4.0, 9.0];
        let m = mixup_with_lambda(a.view(), 1.0, b.view(), 0.0, 1.0).unwrap();
        assert_eq!(m.x, a);
        assert_eq!(m.y, 1.0);
    }

    #[test]
    fn midpoint_is_elementwise_mean() {
        let a = array![1.0, 2.0];
        let b = array![3.0, -2.0];
        let m = mixup_with_lambda(a.view(), 1.0, b.view(), 0.0, 0.5).unwrap();
        assert_eq!(m.x, array![2.0, 0.0]);
        assert_eq!(m.y, 0.5);
    }

    #[test]
    fn uniform_weight_has_mean_one_half() {
        let mut rng = seeded(31);
        let n = 10_000;
        let mean = (0..n).map(|_| sample_mixup_lambda(1.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean λ = {mean}");
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = seeded(32);
        let a = array![1.0, 2.0];
        let b = array![1.0];
        assert!(mixup_pair(a.view(), 1.0, b.view(), 0.0, 1.0, &mut rng).is_err());
        assert!(mixup_pair(a.view(), 1.0, a.view(), 0.0, 0.0, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn outputs_are_convex_combinations(
            pair in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..8),
            y1 in 0.0f64..=1.0,
            y2 in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let mut rng = seeded(seed);
            let x1: Array1<f64> = pair.iter().map(|p| p.0).collect();
            let x2: Array1<f64> = pair.iter().map(|p| p.1).collect();
            let m = mixup_pair(x1.view(), y1, x2.view(), y2, 1.0, &mut rng).unwrap();
            prop_assert!((0.0..=1.0).contains(&m.lambda));
            for i in 0..x1.len() {
                let lo = x1[i].min(x2[i]) - 1e-12;
                let hi = x1[i].max(x2[i]) + 1e-12;
                prop_assert!(m.x[i] >= lo && m.x[i] <= hi);
            }
            prop_assert!(m.y >= y1.min(y2) - 1e-12 && m.y <= y1.max(y2) + 1e-12);
        }
    }
}
