//! Utility function catalog and piecewise-linear representation.

mod catalog;
mod nonlinear;
mod plf;

pub use catalog::{instantiate, CurveVariant, Quantity, UfParams, UfSpec, UfTemplate, PAYOFF_BAND};
pub use nonlinear::{sample_nonlinear, NonlinearCurve, DEFAULT_POINTS};
pub use plf::{Piece, PiecewiseLinearUtility};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UtilityError {
    #[error("invalid piecewise-linear utility: {0}")]
    InvalidPlf(String),
    #[error("output {value} outside the domain [0, {domain_max}]")]
    OutOfDomain { value: f64, domain_max: f64 },
    #[error("aspiration {aspiration} exceeds the upper bound {bound}; aspirations must not exceed the group's treatment limit")]
    AspirationAboveBound { aspiration: f64, bound: f64 },
    #[error("{template} requires parameter {param}")]
    MissingParam { template: UfTemplate, param: String },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("curve is undefined at output {at}")]
    CurveUndefined { at: f64 },
}

/// Convenience for `plf.is_concave()`.
pub fn is_concave(plf: &PiecewiseLinearUtility) -> bool {
    plf.is_concave()
}

/// Convenience for `plf.evaluate(n)`.
pub fn evaluate(plf: &PiecewiseLinearUtility, n: f64) -> Result<f64, UtilityError> {
    plf.evaluate(n)
}
