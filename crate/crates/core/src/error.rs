use crate::C64;

/// Errors raised by the solvers and checks in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate frequency point: xi' = 0 and lambda = 0")]
    DegenerateFrequency,

    #[error("ellipticity violated at xi = {direction:?} (angular margin {margin:.3e})")]
    Ellipticity { direction: Vec<f64>, margin: f64 },

    #[error("found {found} stable roots, expected {expected} (ellipticity violated)")]
    RootCount { found: usize, expected: usize },

    #[error("root {root} lies within {tol:.1e} of the real axis")]
    RealAxisRoot { root: C64, tol: f64 },

    #[error("Lopatinskii-Shapiro failure at xi' = {xi_prime:?}, lambda = {lambda}: condition number {condition:.3e}")]
    LopatinskiiShapiro {
        xi_prime: Vec<f64>,
        lambda: C64,
        condition: f64,
    },

    #[error("inadmissible exponent query: r - p[t + k - m_j - s]_+ = {value} <= -1")]
    Inadmissible { value: f64 },

    #[error("symbol lambda - A(xi) is numerically singular at xi = {xi:?}")]
    Conditioning { xi: Vec<f64> },

    #[error("contour rejected: {0}")]
    Contour(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
