use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid function: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state kind mismatch: {0}")]
    StateKind(String),

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("time {t} is not aligned to the grid (N = {n}); {cells} cells")]
    Misaligned { t: f64, n: usize, cells: f64 },

    #[error("blow-up guard tripped at t = {t}: norm = {norm}")]
    BlowUp { t: f64, norm: f64 },

    #[error("Picard iteration diverges on this horizon (iteration {iteration}, increment {increment})")]
    PicardDivergence { iteration: usize, increment: f64 },

    #[error("matrix is not Hurwitz (spectral abscissa {abscissa})")]
    NotHurwitz { abscissa: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: estimated error {estimate} on [{a}, {b}]")]
    Quadrature { a: f64, b: f64, estimate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
