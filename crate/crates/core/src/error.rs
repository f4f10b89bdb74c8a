use thiserror::Error;

/// Errors raised by valuation, network construction, clearing and calibration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("bank {bank} would hold negative external assets ({value})")]
    NegativeAssets { bank: usize, value: f64 },

    #[error("record {id}: {what} computes negative ({value})")]
    NegativeBalance {
        id: String,
        what: &'static str,
        value: f64,
    },

    #[error("I - Pi_e^T is singular or has spectral radius >= 1")]
    SingularLeontief,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("external face value is zero; repayment fraction undefined")]
    DivisionByZero,

    #[error("root not bracketed on [{lo}, {hi}]")]
    RootBracketFailure { lo: f64, hi: f64 },

    #[error("marginal imbalance {relative:e} exceeds allowed {allowed:e}")]
    ImbalanceTooLarge { relative: f64, allowed: f64 },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
