use thiserror::Error;

/// Errors surfaced by jet arithmetic, expression evaluation, and the
/// geometric operators built on top of them.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("derivative budget exhausted: cannot differentiate an order-0 jet")]
    OrderExhausted,

    #[error("insufficient jet order for {op}: need {need}, have {have}")]
    InsufficientOrder {
        op: &'static str,
        need: usize,
        have: usize,
    },

    #[error("jet order {0} exceeds the supported maximum {max}", max = crate::jet::MAX_ORDER)]
    OrderTooHigh(usize),

    #[error("{func} domain error: argument has constant term {value}")]
    Domain { func: &'static str, value: f64 },

    #[error("singular matrix: constant-term determinant {det:e} within epsilon {eps:e}")]
    SingularMatrix { det: f64, eps: f64 },

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("{op}: dimension must be {constraint}, got {actual}")]
    Dimension {
        op: &'static str,
        constraint: &'static str,
        actual: usize,
    },

    #[error("conformal factor is not positive at the sample point: p = {value}")]
    NonPositiveFactor { value: f64 },

    #[error("invalid operator order {0}: expected 2 or 4")]
    InvalidOperatorOrder(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
