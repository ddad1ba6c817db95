use thiserror::Error;

/// Errors raised by the numerical core and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("root finder did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error(
        "negative discriminant {discriminant:e} for lambda = {lambda}{}",
        match n0 { Some(n) => format!("; smallest admissible mode index is {n}"), None => String::new() }
    )]
    Discriminant {
        lambda: f64,
        discriminant: f64,
        n0: Option<usize>,
    },

    #[error("packet M = {m} starts at mode {first} below the admissible index n0 = {n0}")]
    PacketBelowAdmissible { m: usize, first: usize, n0: usize },

    #[error("mode index {index} is outside the table (1..={len})")]
    ModeOutOfRange { index: usize, len: usize },

    #[error("constraint matrix has effective rank 8 (smallest singular value {smallest:e}, largest {largest:e})")]
    FullRank { smallest: f64, largest: f64 },

    #[error("time step too large: lambda*dt = {ratio} exceeds {limit}; use at least {suggested_steps} steps")]
    Stability {
        ratio: f64,
        limit: f64,
        suggested_steps: usize,
    },

    #[error("non-positive value {value} at point {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Io(_)
            | Error::NonConvergence { .. }
            | Error::Quadrature(_)
            | Error::Numerical(_)
            | Error::NoSignChange { .. } => 3,
            Error::Domain(_)
            | Error::Discriminant { .. }
            | Error::PacketBelowAdmissible { .. }
            | Error::ModeOutOfRange { .. }
            | Error::FullRank { .. }
            | Error::Stability { .. }
            | Error::NonPositive { .. }
            | Error::TooFewPoints { .. } => 4,
        }
    }
}
