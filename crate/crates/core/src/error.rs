use thiserror::Error;

pub type Result<T> = std::result::Result<T, EpError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpError {
    /// Two operands live on different algebras or have the wrong length.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not a rotation (orthogonality defect {defect:.3e}, det {det:.15})")]
    NotOrthogonal { defect: f64, det: f64 },

    /// An action, cocycle or family was applied to an incompatible descriptor.
    #[error("incompatible descriptors: {0}")]
    Incompatible(String),

    /// The momentum left the range of the inertia operator.
    #[error("compatibility violation: kernel component {component:.3e} exceeds {tolerance:.1e}")]
    Compatibility { component: f64, tolerance: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("angle {angle} is not a multiple of the grid spacing {spacing}")]
    OffGrid { angle: f64, spacing: f64 },

    #[error("lagrangian `{0}` is not integrable")]
    NotIntegrable(String),

    #[error("system `{0}` declares no reference equation")]
    NoReference(String),

    #[error("integration aborted at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
}

pub(crate) fn ensure_finite(label: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EpError::NonFinite(label.to_string()))
    }
}
