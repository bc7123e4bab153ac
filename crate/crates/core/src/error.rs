use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outside model domain: {0}")]
    Domain(String),

    #[error("eigensolver did not converge ({0})")]
    NonConvergence(String),

    #[error("basis not converged for mode {mode}: level shift {delta:.3e} GHz exceeds {tol:.1e} GHz")]
    BasisConvergence { mode: String, delta: f64, tol: f64 },

    #[error("ambiguous state labeling: {0}")]
    AmbiguousLabel(String),

    #[error("integrator failed at t = {t} ns: {reason}")]
    Integration { t: f64, reason: String },

    #[error("tomography failed: {0}")]
    Tomography(String),

    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Domain(_) => "domain",
            Error::NonConvergence(_) => "non_convergence",
            Error::BasisConvergence { .. } => "basis_convergence",
            Error::AmbiguousLabel(_) => "ambiguous_label",
            Error::Integration { .. } => "integration",
            Error::Tomography(_) => "tomography",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
