//! Conformally covariant differential operators on coordinate-chart
//! pseudo-Riemannian metrics, evaluated pointwise through truncated Taylor
//! jets.
//!
//! The crate is organised bottom-up:
//!
//! * [`jet`] — exact forward-mode differentiation on truncated multivariate
//!   Taylor series (order ≤ 4).
//! * [`field`] — a tiny closed-form expression language (parser, printer,
//!   jet evaluation, seeded random test fields).
//! * [`geometry`] — curvature of a chart metric at a point: Christoffel
//!   symbols, Riemann/Ricci tensors, scalar curvature, Laplace–Beltrami,
//!   covariant divergence.
//! * [`operators`] — the Yamabe operator, the quartic curvature operator in
//!   general dimension and its n = 4 reduction, the flat biharmonic, and the
//!   Einstein-cylinder closed form.
//! * [`conformal`] — conformal rescaling and the covariance residuals that
//!   verify the second- and fourth-order transformation laws.
//! * [`catalog`] — builtin metrics, the cylinder conformal factor, and
//!   seeded random metric generators.
//!
//! # Sign conventions
//!
//! The Laplace–Beltrami operator is the divergence form
//! `Lφ = |det g|^{-1/2} ∂_i(|det g|^{1/2} g^{ij} ∂_j φ)`, so on flat
//! Euclidean space `L = Σ ∂_i²` and on a (+,−,−,−) chart it is the wave
//! operator. Ricci and scalar curvature are normalised so that the
//! covariance laws and the cylinder closed form hold with this `L`; under
//! this convention flat metrics have `R = 0`, the unit round 3-sphere has
//! `R = −6`, and the Einstein cylinder `dt² − ds²` has `R = +6`. See the
//! geometry module docs for details.

pub mod catalog;
pub mod conformal;
pub mod error;
pub mod field;
pub mod geometry;
pub mod jet;
pub mod operators;

pub use error::{Error, Result};
pub use field::{EvalPoint, FieldExpr};
// pub use geometry::ChartMetric;
pub use jet::{Jet, MultiIndex};
