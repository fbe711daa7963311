use thiserror::Error;

/// Errors shared across the solver modules.
///
/// Validation failures (bad parameters, violated preconditions) are kept
/// separate from genuine numerical failures so that callers such as the CLI
/// can map them to distinct exit codes.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The second-order condition `mu1(t) < kappa(t)` fails at some grid point.
    #[error("SecondOrderViolation: mu1(t) >= kappa(t) at t={t} (mu1={mu1}, kappa={kappa})")]
    SecondOrderViolation { t: f64, mu1: f64, kappa: f64 },

    /// The welfare-maximizing equilibrium does not exist for these parameters.
    #[error("WelfareNonexistence: {reason}")]
    WelfareNonexistence { reason: String },

    /// The demand-curve equilibrium needs at least three strategic investors.
    #[error("VayanosTooFewInvestors: M={m} but M >= 3 is required")]
    VayanosTooFewInvestors { m: usize },

    /// A quadrature against a singular function failed to converge.
    #[error("QuadratureDivergence: {reason}")]
    QuadratureDivergence { reason: String },

    /// Backward integration of the value-function coefficients overflowed.
    #[error("IntegrationOverflow: |state| exceeded {threshold:.1e} at t={t}")]
    IntegrationOverflow { t: f64, threshold: f64 },

    /// The analytic welfare decomposition was requested outside its
    /// parameter regime (pi=0, theta_{i,-}=w0/M, phi0=phi1=0).
    #[error("RestrictionViolation: {reason}")]
    RestrictionViolation { reason: String },

    /// The estimated price-impact slope is too shallow for any admissible
    /// equilibrium; reports the largest shortfall of lambda'(t) below
    /// kappa(t)*eta/M.
    #[error(
        "InfeasibleCalibration: second-order condition fails; worst shortfall \
         {shortfall} at t={t} (lambda' must exceed kappa*eta/M)"
    )]
    InfeasibleCalibration { t: f64, shortfall: f64 },

    /// Calibration is only defined for uncorrelated order flow (pi = 0).
    #[error("NonzeroPi: calibration requires pi = 0, got pi={pi}")]
    NonzeroPi { pi: f64 },

    /// The coupled Riccati system blew up in finite time.
    #[error("RiccatiExplosion: blow-up detected at t={t}")]
    RiccatiExplosion { t: f64 },

    /// A simulation was configured on a different grid than the solution.
    #[error("GridMismatch: solution grid has {expected} steps, config has {got}")]
    GridMismatch { expected: usize, got: usize },

    /// Evaluation outside the function's domain (e.g. psi0 at t = 1).
    #[error("DomainError: {reason}")]
    DomainError { reason: String },

    /// Malformed model parameters.
    #[error("InvalidParams: {reason}")]
    InvalidParams { reason: String },
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::SecondOrderViolation { .. } => "SecondOrderViolation",
            Error::WelfareNonexistence { .. } => "WelfareNonexistence",
            Error::VayanosTooFewInvestors { .. } => "VayanosTooFewInvestors",
            Error::QuadratureDivergence { .. } => "QuadratureDivergence",
            Error::IntegrationOverflow { .. } => "IntegrationOverflow",
            Error::RestrictionViolation { .. } => "RestrictionViolation",
            Error::InfeasibleCalibration { .. } => "InfeasibleCalibration",
            Error::NonzeroPi { .. } => "NonzeroPi",
            Error::RiccatiExplosion { .. } => "RiccatiExplosion",
            Error::GridMismatch { .. } => "GridMismatch",
            Error::DomainError { .. } => "DomainError",
            Error::InvalidParams { .. } => "InvalidParams",
        }
    }

    /// True for numerical failures (as opposed to input validation).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureDivergence { .. }
                | Error::IntegrationOverflow { .. }
                | Error::RiccatiExplosion { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
