//! The ambient coordinate context: `n + 2` coordinates on the metric cone and
//! reduction modulo the null-quadric ideal.
//!
//! Coordinates are ordered `xp, x1, .., xn, xm` with the metric pairing
//! `h(xp, xm) = 1` and `h(xi, xi) = 1`. The defining quadric is
//! `Q = 2 xp xm + sum_i xi^2`. Reduction substitutes
//! `xm = -(sum_i xi^2) / (2 xp)`, the unique solution of `Q = 0` with `2 xp`
//! invertible, which yields a canonical `xm`-free representative of the class
//! modulo the ideal generated by `Q`.

use std::sync::Arc;

use num_traits::Zero;

use super::expr::ScalarExpr;
use super::poly::{Poly, VarTable};
use super::{rat_int, Rat, ScalarError};

/// Dimension data and variable table for the ambient space of a conformally
/// flat base of even dimension `n`.
#[derive(Debug, Clone)]
pub struct QuadricContext {
    n: usize,
    vars: Arc<VarTable>,
}

impl QuadricContext {
    /// Builds the context for even `n >= 4`. Dimensions above 8 are refused,
    /// matching the verified range of the operator constructions.
    pub fn new(n: usize) -> Result<Self, ScalarError> {
        Self::with_params(n, &[])
    }

    /// As [`QuadricContext::new`], with extra inert parameters appended to the
    /// variable table.
    pub fn with_params(n: usize, params: &[&str]) -> Result<Self, ScalarError> {
        if n % 2 != 0 {
            return Err(ScalarError::DimensionUnsupported {
                n: n as i64,
                reason: "the construction requires even dimension".to_owned(),
            });
        }
        if !(4..=8).contains(&n) {
            return Err(ScalarError::DimensionUnsupported {
                n: n as i64,
                reason: "supported dimensions are 4, 6, and 8".to_owned(),
            });
        }
        let mut coords: Vec<String> = Vec::with_capacity(n + 2);
        coords.push("xp".to_owned());
        for i in 1..=n {
            coords.push(format!("x{i}"));
        }
        coords.push("xm".to_owned());
        let params: Vec<String> = params.iter().map(|s| (*s).to_owned()).collect();
        let vars = VarTable::new(&coords, &params);
        Ok(QuadricContext { n, vars })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of ambient coordinates, `n + 2`.
    pub fn dim(&self) -> usize {
        self.n + 2
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    // ---- Index layout ----

    pub fn idx_plus(&self) -> usize {
        0
    }

    /// Spatial index, `i` in `1..=n`.
    pub fn idx_spatial(&self, i: usize) -> usize {
        assert!((1..=self.n).contains(&i), "spatial index out of range");
        i
    }

    pub fn idx_minus(&self) -> usize {
        self.n + 1
    }

    pub fn is_spatial(&self, a: usize) -> bool {
        (1..=self.n).contains(&a)
    }

    // ---- Metric and canonical fields ----

    /// Metric component `h_{ab}`; the inverse metric has the same components.
    pub fn h(&self, a: usize, b: usize) -> Rat {
        let (p, m) = (self.idx_plus(), self.idx_minus());
        if (a, b) == (p, m) || (a, b) == (m, p) || (a == b && self.is_spatial(a)) {
            rat_int(1)
        } else {
            Rat::zero()
        }
    }

    /// The index paired with `a` by the metric: `h_{a, pair(a)} = 1`.
    pub fn h_pair(&self, a: usize) -> usize {
        if a == self.idx_plus() {
            self.idx_minus()
        } else if a == self.idx_minus() {
            self.idx_plus()
        } else {
            a
        }
    }

    /// Defining polynomial of the null quadric, `2 xp xm + sum_i xi^2`.
    pub fn q_poly(&self) -> Poly {
        let xp = Poly::var(&self.vars, self.idx_plus());
        let xm = Poly::var(&self.vars, self.idx_minus());
        let mut q = xp.mul(&xm).mul_rat(&rat_int(2));
        for i in 1..=self.n {
            let xi = Poly::var(&self.vars, self.idx_spatial(i));
            q = q.add(&xi.mul(&xi));
        }
        q
    }

    pub fn q_expr(&self) -> ScalarExpr {
        ScalarExpr::from_poly(self.q_poly())
    }

    /// Component `x^a` of the Euler vector field.
    pub fn euler_component(&self, a: usize) -> ScalarExpr {
        ScalarExpr::var(&self.vars, a)
    }

    /// Component `(X_flat)_a = h_{ab} x^b` of the tautological one-form.
    pub fn x_flat_component(&self, a: usize) -> ScalarExpr {
        ScalarExpr::var(&self.vars, self.h_pair(a))
    }

    /// Sum of squares of the spatial coordinates.
    pub fn spatial_norm_sq(&self) -> Poly {
        let mut s = Poly::zero(&self.vars);
        for i in 1..=self.n {
            let xi = Poly::var(&self.vars, self.idx_spatial(i));
            s = s.add(&xi.mul(&xi));
        }
        s
    }

    // ---- Reduction ----

    /// Canonical representative modulo the ideal `(Q)`: eliminates `xm` via
    /// `xm = -(sum_i xi^2) / (2 xp)`. Fails with `DenominatorOnCone` when a
    /// denominator atom lies in the ideal.
    pub fn reduce_mod_quadric(&self, e: &ScalarExpr) -> Result<ScalarExpr, ScalarError> {
        assert!(
            Arc::ptr_eq(e.vars(), &self.vars) || e.vars() == &self.vars,
            "expression does not use the ambient variable table"
        );
        if !e.depends_on(self.idx_minus()) {
            return Ok(e.clone());
        }
        let mut images: Vec<ScalarExpr> = (0..self.vars.len())
            .map(|idx| ScalarExpr::var(&self.vars, idx))
            .collect();
        let two_xp = Poly::var(&self.vars, self.idx_plus()).mul_rat(&rat_int(2));
        images[self.idx_minus()] =
            ScalarExpr::fraction(self.spatial_norm_sq().neg(), two_xp);
        let factor_image = e.factor().map(|s| ScalarExpr::factor_power_of(s, 1));
        e.substitute(&self.vars, &images, factor_image.as_ref())
    }

    /// True when the expression lies in the ideal `(Q)` (after clearing the
    /// factored denominators, none of which may lie in the ideal themselves).
    pub fn is_zero_mod_quadric(&self, e: &ScalarExpr) -> Result<bool, ScalarError> {
        Ok(self.reduce_mod_quadric(e)?.is_zero())
    }
}
