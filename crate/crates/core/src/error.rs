//! Crate-wide error type.

use crate::arima::{ArimaFit, ArimaOrder};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the forecasting toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input is degenerate for the requested operation (e.g. zero variance).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A value is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A CSV file failed to parse; carries the offending line when known.
    #[error("parse error in {path} (line {line}): {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    /// Join keys or row contents are inconsistent across tables.
    #[error("data integrity error: {0}")]
    DataIntegrity(String),

    /// A requested record does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// ARIMA optimizer hit the iteration cap; the best iterate is preserved
    /// so callers may still inspect or use it.
    #[error("ARIMA({},{},{}) did not converge within {iterations} iterations",
            best.order.p, best.order.d, best.order.q)]
    ArimaNonConvergence {
        best: Box<ArimaFit>,
        iterations: usize,
    },

    /// Additive-model optimizer hit the sweep cap; carries the best iterate.
    #[error("additive model fit did not converge within {sweeps} sweeps")]
    AdditiveNonConvergence {
        best: Box<crate::additive::AdditiveFit>,
        sweeps: usize,
    },

    /// Every candidate order in an ARIMA grid search failed to fit.
    #[error("all {} candidate ARIMA fits failed: {}", failures.len(), format_failures(failures))]
    AllFitsFailed {
        failures: Vec<(ArimaOrder, String)>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

fn format_failures(failures: &[(ArimaOrder, String)]) -> String {
    failures
        .iter()
        .map(|(o, m)| format!("({},{},{}): {}", o.p, o.d, o.q, m))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
