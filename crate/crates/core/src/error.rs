use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph: {0}")]
    Graph(String),
    #[error("coefficients: {0}")]
    Coefficients(String),
    #[error("coefficient bounds: edge {edge} {role} value {value} leaves [{lo}, {hi}] at t > {time}")]
    BoundsViolation {
        edge: usize,
        role: &'static str,
        time: f64,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("linear solve: {0}")]
    LinearSolve(String),
    #[error("eigensolver: {0}")]
    Eigen(String),
    #[error("integrator: {0}")]
    Integrator(String),
    #[error("analysis: {0}")]
    Analysis(String),
    #[error("oracle: {0}")]
    Oracle(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("scenario json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
