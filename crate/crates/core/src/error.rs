use thiserror::Error;

/// Errors raised by the planning engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Input geometry is degenerate (coplanar hull, zero radial distance, ...).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    /// An operation received an empty or undersized input set.
    #[error("insufficient input: {0}")]
    InsufficientInput(String),
    /// Instruction text did not match the supported grammar.
    #[error("cannot parse instruction {input:?}: expected \"grasp|pick the <object> from|on the <context>\"")]
    Instruction { input: String },
    /// A joint value lies outside its configured limits.
    #[error("joint {joint} value {value:.6} rad outside [{min:.6}, {max:.6}]")]
    JointLimit {
        joint: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    /// Scene document failed validation.
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    /// Configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
