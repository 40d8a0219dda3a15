use thiserror::Error;

#[derive(Debug, Error)]
pub enum DdrfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rotation angle is zero; rotation axes are undefined")]
    UndefinedAxes,

    #[error("register of {0} spins exceeds the dense-unitary limit of {max}", max = crate::register::MAX_DENSE_REGISTER)]
    RegisterTooLarge(usize),

    #[error("unknown spin label `{0}`")]
    UnknownSpin(String),

    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },

    #[error("sweep axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DdrfError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> DdrfError {
    DdrfError::InvalidInput(msg.into())
}
