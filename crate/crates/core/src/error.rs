use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A log-spectrum estimate would be `-inf` at this Fourier bin.
    #[error("degenerate spectrum: zero power at frequency bin {bin}")]
    DegenerateSpectrum { bin: usize },

    /// Pooled within-group covariance is numerically singular.
    #[error(
        "ill-conditioned within-group covariance: smallest/largest eigenvalue ratio {ratio:e} \
         (smallest {smallest:e}, largest {largest:e})"
    )]
    IllConditioned { ratio: f64, smallest: f64, largest: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::File {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for failures caused by the numbers themselves rather than by the
    /// caller's arguments or files.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::DegenerateSpectrum { .. } | Error::IllConditioned { .. })
    }
}
