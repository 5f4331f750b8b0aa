use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    Geometry(String),
    #[error("invalid obstacle: {0}")]
    Obstacle(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("weights have squared norm {actual}, expected {expected}")]
    Power { expected: f64, actual: f64 },
    #[error("length mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("non-finite argument {0}")]
    Domain(f64),
    #[error("scale factor |s| = {0} m is below the resolvable minimum")]
    DegenerateScale(f64),
    #[error("invalid beam parameters: {0}")]
    Param(String),
    #[error("channel vector is identically zero")]
    ZeroChannel,
    #[error("zero vector in correlation")]
    ZeroVector,
    #[error("point ({x}, {y}) is outside the simulated range: {reason}")]
    Range { x: f64, y: f64, reason: String },
    #[error("user point ({x}, {y}) lies inside an obstacle")]
    UserInsideObstacle { x: f64, y: f64 },
    #[error("quadrature: {0}")]
    Quadrature(String),
    #[error("invalid sampling spec: {0}")]
    Spec(String),
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error("least-squares refit failed: {0}")]
    Rank(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
