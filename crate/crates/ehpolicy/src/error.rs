use thiserror::Error;

/// Errors produced by model construction, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A compression level outside `{0..m}` was requested.
    #[error("compression level {level} out of range 0..={max}")]
    LevelOutOfRange { level: u32, max: u32 },

    /// A continuous level outside `[1, m]` was requested.
    #[error("continuous level {w} out of range [1, {max}]")]
    ContinuousLevelOutOfRange { w: f64, max: u32 },

    /// The configuration violates a hypothesis the solver relies on.
    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    /// A named model invariant does not hold.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Energy causality (action must not exceed the stored charge) was violated.
    #[error("energy causality violated: action {action} exceeds battery level {level}")]
    CausalityViolation { action: u32, level: u32 },

    /// The value iteration did not reach the requested span within the cap.
    #[error("value iteration did not converge: span {span:.3e} after {iterations} iterations")]
    NonConvergence { iterations: u64, span: f64 },

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
