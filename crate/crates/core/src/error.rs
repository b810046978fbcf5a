use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid setup: grid too small, bad parameters, failed validation.
    /// Carries every violation found, not just the first.
    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    /// API misuse such as mixing fields from different grids.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{0}")]
    NonConvergence(Box<crate::scf::NonConvergenceReport>),

    #[error("step-size error: {0}")]
    StepSize(String),

    #[error("non-finite values at step {step} (t = {time}); last good state kept")]
    NonFinite {
        step: usize,
        time: f64,
        last_good: Box<Vec<crate::fock::TpOrbital>>,
    },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }

    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::Numerical(_) => "numerical",
            Error::NonConvergence(_) => "non-convergence",
            Error::StepSize(_) => "step-size",
            Error::NonFinite { .. } => "non-finite",
            Error::Analysis(_) => "analysis",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
