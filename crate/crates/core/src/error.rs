use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("gap {gap:e} m is not positive: contact / pull-in")]
    Contact { gap: f64 },
    #[error("no stable equilibrium: separation {separation:e} m is below the critical separation {critical:e} m")]
    PullIn { separation: f64, critical: f64 },
    #[error("Casimir gradient {stiffness:e} N/m exceeds spring constant {spring_k:e} N/m at gap {gap:e} m")]
    Unstable {
        gap: f64,
        stiffness: f64,
        spring_k: f64,
    },
    #[error("parameter `{name}` has invalid value {value:e}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("natural frequency {given} rad/s disagrees with sqrt(k/m) = {derived} rad/s")]
    InconsistentFrequency { given: f64, derived: f64 },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("{operation}: {reason}")]
    Precondition {
        operation: &'static str,
        reason: String,
    },
    #[error("{operation}: run pulled in at t = {time:.6} s")]
    PulledIn { operation: &'static str, time: f64 },
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
