use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("episode horizon of {horizon} steps exhausted")]
    HorizonExhausted { horizon: usize },
    #[error("pgm: {0}")]
    Pgm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
