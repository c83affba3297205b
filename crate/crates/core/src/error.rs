use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel is not radially symmetric")]
    NonRadial,
    #[error("no admissible root: discriminant {discriminant:.3e} is negative")]
    NoAdmissibleRoot { discriminant: f64 },
    #[error("{what}: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ToleranceNotMet { what: String, residual: f64, tolerance: f64 },
    #[error("degenerate parameterization: |X'| vanishes near s = {s:.6}")]
    DegenerateParameterization { s: f64 },
    #[error("ill-posed configuration: well-stretched constant {lambda:.3e} too small")]
    IllPosed { lambda: f64 },
    #[error("evaluation point lies on the contour")]
    OnContour,
    #[error("evaluation point within {distance:.3e} of the contour; use a near-field method")]
    NearContour { distance: f64 },
    #[error("non-finite state at t = {time}")]
    BlowUp { time: f64 },
    #[error("assumption monitor tripped at t = {time}: {reason}")]
    MonitorTripped { time: f64, reason: String },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
