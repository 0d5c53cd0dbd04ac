use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("evaluation at a pole (omega = {omega})")]
    EvaluationAtPole { omega: f64 },
    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),
    #[error("singular Sylvester operator: operands share an eigenvalue")]
    SingularSylvester,
    #[error("singular Lyapunov operator: A and -A share an eigenvalue")]
    SingularLyapunov,
    #[error("Riccati solve failed: {0}")]
    Riccati(String),
    #[error("algebraic loop: I - s*D1*D2 is singular")]
    AlgebraicLoop,
    #[error("system is unstable: {0}")]
    Unstable(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("identification failed: {0}")]
    Identification(String),
    #[error("matrix exponential overflow: {0}")]
    Overflow(String),
    #[error("simulation produced a non-finite value at step {step}")]
    NonFinite { step: usize },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::InvalidParam(_)
                | Error::Parse { .. }
                | Error::Format(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }

    /// Process exit code: 2 input error, 3 numerical failure,
    /// 4 verification failure.
    pub fn exit_code(&self) -> i32 {
        if self.is_input_error() {
            2
        } else if matches!(self, Error::Verification(_) | Error::Unstable(_)) {
            4
        } else {
            3
        }
    }
}
