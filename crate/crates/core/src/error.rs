use thiserror::Error;

/// Errors raised by the analysis, simulation and scoring routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("singular {what} at omega = {omega} rad/s (condition estimate {condition:.3e})")]
    Singular {
        what: &'static str,
        omega: f64,
        condition: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("reset element is not open-loop stable (worst eigenvalue modulus {worst_modulus:.6})")]
    OpenLoopUnstable { worst_modulus: f64 },

    #[error("convergence: {0}")]
    Convergence(String),

    #[error("no reset instant exists: arcsine argument {argument:.6} exceeds 1 in magnitude")]
    NoResetInstant { argument: f64 },

    #[error("algebraic loop: {0}")]
    AlgebraicLoop(String),

    #[error("no gain crossover found in [{lo_hz}, {hi_hz}] Hz")]
    NoCrossover { lo_hz: f64, hi_hz: f64 },

    #[error("simulation did not reach steady state after {periods} periods (last relative change {last_change:.3e})")]
    NotConverged { periods: usize, last_change: f64 },

    #[error("Zeno behaviour: more than {limit} resets in one period near t = {time:.6} s")]
    Zeno { limit: usize, time: f64 },

    #[error("simulation diverged at t = {time:.6} s")]
    Diverged { time: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("config: {0}")]
    Config(String),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Analytic,
    Simulation,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Dimension(_) | Error::NonFinite(_) => {
                ErrorKind::Config
            }
            Error::NotConverged { .. } | Error::Zeno { .. } | Error::Diverged { .. } => ErrorKind::Simulation,
            _ => ErrorKind::Analytic,
        }
    }

    /// Short machine-readable reason string.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::NonFinite(_) => "non-finite",
            Error::Singular { .. } => "singular",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::OpenLoopUnstable { .. } => "open-loop-unstable",
            Error::Convergence(_) => "convergence",
            Error::NoResetInstant { .. } => "no-reset-instant",
            Error::AlgebraicLoop(_) => "algebraic-loop",
            Error::NoCrossover { .. } => "no-crossover",
            Error::NotConverged { .. } => "not-converged",
            Error::Zeno { .. } => "zeno",
            Error::Diverged { .. } => "diverged",
            Error::UndefinedMetric(_) => "undefined-metric",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
