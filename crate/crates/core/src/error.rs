use thiserror::Error;

/// Which evaluation branch of the Mittag-Leffler function was active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlRegime {
    Series,
    Integral,
    Asymptotic,
}

impl std::fmt::Display for MlRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MlRegime::Series => "power series",
            MlRegime::Integral => "integral representation",
            MlRegime::Asymptotic => "asymptotic expansion",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("Mittag-Leffler {regime} did not reach tolerance {tol:e} (estimate {achieved:e})")]
    MlNonConvergence {
        regime: MlRegime,
        tol: f64,
        achieved: f64,
    },

    #[error("invalid mesh request: {0}")]
    Mesh(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear solver failed: {reason} (relative residual {residual:e})")]
    Solver { reason: String, residual: f64 },

    #[error("output time {t} is not on the time grid (tau = {tau})")]
    OffGrid { t: f64, tau: f64 },

    #[error("{path}:{line}: {msg}")]
    Config {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("expression error: {0}")]
    Expression(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
