//! Exact scalar arithmetic: sparse multivariate polynomials over the rationals,
//! rational functions with factored denominators, an optional formal factor
//! `t = exp(omega)` carried by its logarithmic gradient, and reduction modulo
//! the null-quadric ideal.
//!
//! Invariants maintained by every constructor and operation:
//!
//! * polynomials never store zero coefficients;
//! * denominators are products of distinct "atoms", primitive integer
//!   polynomials with positive leading coefficient, kept sorted;
//! * numerators share no atom factor with their denominator;
//! * terms of different `t`-powers are kept separate, so an expression is a
//!   finite sum `sum_k t^k * (num_k / den_k)` and `t` is never hidden inside a
//!   polynomial.
//!
//! An expression is zero exactly when it has no terms, so zero-testing never
//! needs polynomial factorization. Atoms are not factored further; equality of
//! two fractions cross-multiplies when their factored denominators differ.

mod expr;
mod poly;
mod quadric;

pub mod json;

pub use expr::{FactorSpec, RatFunc, ScalarExpr};
pub use poly::{Mono, Poly, VarTable};
pub use quadric::QuadricContext;

use num_bigint::BigInt;

/// Exact rational scalar used for every coefficient in the crate.
pub type Rat = num_rational::BigRational;

/// Shorthand for a rational from an integer.
pub fn rat_int(v: i64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

/// Shorthand for the rational `num/den`. Panics if `den == 0`.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Errors produced by scalar arithmetic.
#[derive(Debug, thiserror::Error)]
pub enum ScalarError {
    /// A denominator atom lies in the null-quadric ideal, so the expression
    /// has no restriction to the cone.
    #[error("denominator `{atom}` vanishes identically on the null quadric")]
    DenominatorOnCone { atom: String },

    /// A substitution value for the formal factor does not satisfy the
    /// factor's declared logarithmic gradient.
    #[error("factor substitution is inconsistent with the declared gradient in `{var}`")]
    InconsistentFactor { var: String },

    /// Division was requested by an expression that is not a unit in the
    /// representation (not a single `t`-power times a rational function).
    #[error("division by an expression that is not invertible: `{expr}`")]
    NonInvertible { expr: String },

    /// Two operands were built over different variable tables.
    #[error("operands use different variable tables")]
    VarTableMismatch,

    /// Two operands carry different formal factors.
    #[error("operands carry different formal factors: `{left}` vs `{right}`")]
    FactorMismatch { left: String, right: String },

    /// A parameter was expected to appear polynomially but occurs in a
    /// denominator or factor gradient.
    #[error("parameter `{param}` occurs outside numerators")]
    ParamNotPolynomial { param: String },

    /// Malformed JSON input for the expression AST.
    #[error("invalid expression AST: {reason}")]
    InvalidAst { reason: String },

    /// The requested dimension is outside the supported range.
    #[error("dimension n = {n} is unsupported: {reason}")]
    DimensionUnsupported { n: i64, reason: String },
}
