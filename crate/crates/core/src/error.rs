use thiserror::Error;

/// Failures reported by the numerical routines.
///
/// Payloads are stored as `f64` regardless of the scalar type in use.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown catalog entry `{0}`")]
    UnknownName(String),
    #[error("catalog entry `{entry}` has no parameter `{param}`")]
    UnknownParameter { entry: String, param: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("integrator exceeded {max_steps} steps at t = {t}")]
    StepLimitExceeded { max_steps: usize, t: f64 },
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("no section crossing before t = {t_max}")]
    NoCrossing { t_max: f64 },
    #[error("flow is tangent to the section at t = {t} (|cos| = {cosine})")]
    TangentialCrossing { t: f64, cosine: f64 },
    #[error("point is off the section (|S| = {0})")]
    OffSection(f64),
    #[error("point lies outside the configured section subdomain")]
    OutsideSubdomain,
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("singular Jacobian (det = {0})")]
    SingularJacobian(f64),
    #[error("gradient of the integral vanishes (|grad F| = {0})")]
    SingularGradient(f64),
    #[error("point is off the level set (|F - c| = {0})")]
    OffLevel(f64),
    #[error("vector is not tangent to the level set (|dF(v)| = {0})")]
    NonTangent(f64),
    #[error("no angle chart registered for `{0}`")]
    NoChartAvailable(String),
    #[error("suspension requires a nonzero epsilon")]
    ZeroEpsilon,
    #[error("base map is not symplectic (defect {0})")]
    NonSymplecticBase(f64),
    #[error("roof function must be positive (found {0})")]
    NonPositiveRoof(f64),
    #[error("path is not closed under the gluing (gap {0})")]
    OpenPath(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
