//! Minimal differentiable-computation substrate.
//!
//! Every layer implements its own reverse pass; there is no tape. Batches are
//! row-major `Array2<f64>` with one sample per row, so forward passes reduce to
//! a handful of matrix products.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod error;
pub mod gradcheck;
pub mod gru;
pub mod mixup;
pub mod param;
pub mod rng;
pub mod sampling;
pub mod spectral;

pub use adam::AdamState;
pub use dense::{Activation, Dense, DenseNet, NetCache};
pub use error::{NnError, Result};
pub use gradcheck::{check_gradients, relative_error, GradCheckReport};
pub use gru::{GruCell, GruStepCache};
pub use mixup::{mixup_pair, mixup_with_lambda, sample_mixup_lambda, Mixed};
pub use param::{fingerprint, ParamTensor, Parameterized};
pub use rng::{seeded, substream, Rng};
pub use sampling::{clamp_logvar, gaussian_sample, reparameterize, LOGVAR_MAX, LOGVAR_MIN};
pub use spectral::{spectral_normalize, SpectralNorm};
