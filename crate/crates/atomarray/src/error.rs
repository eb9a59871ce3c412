use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("fit failure: {0}")]
    FitFailure(String),
    #[error("under-sampled grid: need resolution <= {required_um:.4} um along the tweezer axis, got {got_um:.4} um")]
    UnderSampled { required_um: f64, got_um: f64 },
    #[error("unreachable target: {0}")]
    Unreachable(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("numerical instability: {0}")]
    Unstable(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
