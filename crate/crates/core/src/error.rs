use bee_nn::NnError;
use bee_sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("non-finite {what}: {value}")]
    NonFiniteLoss { what: &'static str, value: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset error at byte {offset}: {message}")]
    Dataset { offset: u64, message: String },
    #[error("metrics error: {0}")]
    Metrics(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CoreError::NonFiniteLoss { what, value })
    }
}
