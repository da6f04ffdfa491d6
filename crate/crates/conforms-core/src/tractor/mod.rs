//! Downstream calculus in a choice of scale.
//!
//! A scale fixes the metric `e^{2 omega} delta` on an n-dimensional
//! coordinate patch. This module layer carries the curvature of that metric
//! (Christoffels, Schouten tensor, its trace, Riemann/Ricci/Weyl/Cotton),
//! weighted differential forms with their own-scale Levi-Civita calculus,
//! the standard tractor bundle with its connection and rescaling transforms,
//! splitting operators, the conformal Laplacian, the degree-raising and
//! -lowering second-order tractor operators, gauge companions of the Maxwell
//! operator, and term-list presentations of linear differential operators
//! with formal adjoints and principal symbols.
//!
//! Every context in scope is a rescaling of the flat metric, so the Weyl and
//! Cotton tensors vanish identically; both are computed and checked rather
//! than assumed.

use std::sync::{Arc, OnceLock};

use serde_json::Value;

use crate::ambient::scale::OmegaScale;
use crate::base::BaseContext;
use crate::scalar::{json, Poly, Rat, ScalarError, ScalarExpr, VarTable};

pub mod bundle;
pub mod curvature;
pub mod diffop;
pub mod gauge;
pub mod sample;
pub mod weighted;

pub use bundle::{Slots, TractorForm};
pub use diffop::{LinearDiffOp, OpShape, SymbolMatrix};
pub use weighted::WeightedForm;

/// Errors raised by the scale-level calculus.
#[derive(Debug, thiserror::Error)]
pub enum TractorError {
    /// An operator was applied at a density weight where it is not defined
    /// or not invariant.
    #[error("operator requires weight {expected}, got {found}")]
    WrongWeight { expected: i64, found: i64 },

    /// A construction divides by `n - 2k`, which vanishes at the middle
    /// degree.
    #[error("construction divides by n - 2k = 0 at n = {n}, k = {k}")]
    DivisorZero { n: usize, k: usize },

    /// The construction is not defined in this dimension.
    #[error("dimension n = {n} is unsupported here: {reason}")]
    DimensionUnsupported { n: usize, reason: String },

    /// Degrees of the operands do not match the operation.
    #[error("form degree {found} where {expected} was required")]
    DegreeMismatch { expected: usize, found: usize },

    /// A principal symbol was requested for an operator whose leading
    /// coefficients are not rational constants.
    #[error("principal symbol requires constant leading coefficients: {reason}")]
    SymbolNotConstant { reason: String },

    /// Underlying exact-arithmetic failure.
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// Curvature tensors derived from the Christoffels; computed once on first
/// use. All index layouts are row-major over `n` letters.
struct CurvatureData {
    /// `Riem_{abcd} = g_{ae} R^e_{bcd}`, antisymmetric in (a,b) and (c,d).
    riemann: Vec<ScalarExpr>,
    /// `Ric_{bd} = R^a_{bad}`.
    ricci: Vec<ScalarExpr>,
    /// `C_{abcd} = Riem_{abcd} - (P # g)_{abcd}` (Kulkarni-Nomizu glue).
    weyl: Vec<ScalarExpr>,
    /// `A_{abe} = nabla_a P_{be} - nabla_b P_{ae}`.
    cotton: Vec<ScalarExpr>,
}

/// An immutable scale `g = e^{2 omega} delta` on the coordinate patch, with
/// the curvature quantities of that metric cached. `exp_omega` is either a
/// rational expression or a formal unit with declared gradient; all
/// derivatives below respect `d(e^omega) = e^omega d omega`.
pub struct ScaleContext {
    scale: OmegaScale,
    /// `Upsilon_a = d_a omega`.
    upsilon: Vec<ScalarExpr>,
    /// `Gamma^c_{ab}` flattened as `(c * n + a) * n + b`; symmetric in (a,b).
    gamma: Vec<ScalarExpr>,
    /// Schouten `P_{ab} = -d_a Upsilon_b + Upsilon_a Upsilon_b
    /// - |Upsilon|^2 delta_{ab} / 2`, flattened `a * n + b`; symmetric.
    schouten: Vec<ScalarExpr>,
    /// `J = g^{ab} P_{ab} = e^{-2 omega} sum_a P_{aa}`.
    jay: ScalarExpr,
    /// `e^{2 omega}`: the metric is this multiple of the identity.
    metric_factor: ScalarExpr,
    /// `e^{-2 omega}`.
    inverse_metric_factor: ScalarExpr,
    curvature: OnceLock<Arc<CurvatureData>>,
}

impl ScaleContext {
    pub fn new(scale: OmegaScale) -> Self {
        let n = scale.base().n();
        let vars = scale.base().vars();
        let upsilon: Vec<ScalarExpr> = scale.grads().to_vec();
        // |Upsilon|^2 with the flat contraction; the metric factors of the
        // raised index and of the trace cancel in P's own formula.
        let mut ups_sq = ScalarExpr::zero(vars);
        for u in &upsilon {
            ups_sq = ups_sq.add(&u.mul(u));
        }
        let half = Rat::new(1.into(), 2.into());
        let mut gamma = Vec::with_capacity(n * n * n);
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    // Gamma^c_{ab} = delta^c_a Ups_b + delta^c_b Ups_a
                    //               - delta_{ab} Ups_c.
                    let mut e = ScalarExpr::zero(vars);
                    if c == a {
                        e = e.add(&upsilon[b]);
                    }
                    if c == b {
                        e = e.add(&upsilon[a]);
                    }
                    if a == b {
                        e = e.sub(&upsilon[c]);
                    }
                    gamma.push(e);
                }
            }
        }
        let mut schouten = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let mut e = upsilon[b].partial_derivative(a).neg();
                e = e.add(&upsilon[a].mul(&upsilon[b]));
                if a == b {
                    e = e.sub(&ups_sq.mul_rat(&half));
                }
                schouten.push(e);
            }
        }
        let metric_factor = scale.exp_omega().mul(scale.exp_omega());
        let inverse_metric_factor = metric_factor
            .inverse()
            .expect("e^{2 omega} is a unit by construction");
        let mut trace = ScalarExpr::zero(vars);
        for a in 0..n {
            trace = trace.add(&schouten[a * n + a]);
        }
        let jay = inverse_metric_factor.mul(&trace);
        ScaleContext {
            scale,
            upsilon,
            gamma,
            schouten,
            jay,
            metric_factor,
            inverse_metric_factor,
            curvature: OnceLock::new(),
        }
    }

    /// The flat scale on n coordinates.
    pub fn flat(n: usize) -> Self {
        Self::new(OmegaScale::flat(&BaseContext::new(n)))
    }

    /// `e^omega = 2 / (1 + |y|^2)`, the round-sphere factor.
    pub fn round_sphere(n: usize) -> Self {
        Self::new(OmegaScale::round_sphere(&BaseContext::new(n)))
    }

    pub fn from_omega_poly(base: &BaseContext, omega: &Poly) -> Self {
        Self::new(OmegaScale::from_omega_poly(base, omega))
    }

    pub fn from_rational(base: &BaseContext, exp_omega: ScalarExpr) -> Self {
        Self::new(OmegaScale::from_rational(base, exp_omega))
    }

    /// Context spec document: `{"n": .., "omega": AST}` for polynomial
    /// `omega` or `{"n": .., "exp_omega": AST}` for a rational factor. The
    /// AST grammar is the expression-AST of the scalar layer.
    pub fn from_json(doc: &str) -> Result<Self, TractorError> {
        let v: Value = serde_json::from_str(doc).map_err(|e| ScalarError::InvalidAst {
            reason: format!("context spec is not JSON: {e}"),
        })?;
        let n = v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| ScalarError::InvalidAst {
                reason: "context spec needs an integer field `n`".into(),
            })? as usize;
        if n == 0 || n % 2 != 0 {
            return Err(TractorError::DimensionUnsupported {
                n,
                reason: "contexts are built for even positive n".into(),
            });
        }
        let base = BaseContext::new(n);
        match (v.get("omega"), v.get("exp_omega")) {
            (Some(ast), None) => {
                let omega = json::ast_to_expr(ast, base.vars(), "$.omega")?;
                let poly = omega
                    .as_poly()
                    .ok_or_else(|| ScalarError::InvalidAst {
                        reason: "`omega` must be polynomial; use `exp_omega` otherwise".into(),
                    })?
                    .clone();
                Ok(Self::from_omega_poly(&base, &poly))
            }
            (None, Some(ast)) => {
                let e = json::ast_to_expr(ast, base.vars(), "$.exp_omega")?;
                if e.is_zero() {
                    return Err(ScalarError::InvalidAst {
                        reason: "`exp_omega` must be invertible".into(),
                    }
                    .into());
                }
                Ok(Self::from_rational(&base, e))
            }
            _ => Err(ScalarError::InvalidAst {
                reason: "context spec needs exactly one of `omega`, `exp_omega`".into(),
            }
            .into()),
        }
    }

    pub fn n(&self) -> usize {
        self.scale.base().n()
    }

    pub fn base(&self) -> &BaseContext {
        self.scale.base()
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        self.scale.base().vars()
    }

    pub fn scale(&self) -> &OmegaScale {
        &self.scale
    }

    pub fn exp_omega(&self) -> &ScalarExpr {
        self.scale.exp_omega()
    }

    pub fn is_flat(&self) -> bool {
        self.scale.is_flat()
    }

    /// `Upsilon_a`.
    pub fn upsilon(&self, a: usize) -> &ScalarExpr {
        &self.upsilon[a]
    }

    pub fn upsilons(&self) -> &[ScalarExpr] {
        &self.upsilon
    }

    /// `Upsilon^a = g^{ab} Upsilon_b`, raised with this scale's metric.
    pub fn upsilon_raised(&self) -> Vec<ScalarExpr> {
        self.upsilon
            .iter()
            .map(|u| u.mul(&self.inverse_metric_factor))
            .collect()
    }

    /// `Gamma^c_{ab}` of `e^{2 omega} delta`.
    pub fn gamma(&self, c: usize, a: usize, b: usize) -> &ScalarExpr {
        let n = self.n();
        &self.gamma[(c * n + a) * n + b]
    }

    /// Schouten `P_{ab}`.
    pub fn schouten(&self, a: usize, b: usize) -> &ScalarExpr {
        &self.schouten[a * self.n() + b]
    }

    /// `J`, the metric trace of the Schouten tensor.
    pub fn jay(&self) -> &ScalarExpr {
        &self.jay
    }

    /// `e^{2 omega}`.
    pub fn metric_factor(&self) -> &ScalarExpr {
        &self.metric_factor
    }

    /// `e^{-2 omega}`.
    pub fn inverse_metric_factor(&self) -> &ScalarExpr {
        &self.inverse_metric_factor
    }

    /// The context whose factor is `e^{omega} * e^{omega'}`. At most one of
    /// the two factors may be formal; the formal one survives as the factor
    /// of the product.
    pub fn rescaled(&self, by: &OmegaScale) -> ScaleContext {
        let exp = self.scale.exp_omega().mul(by.exp_omega());
        let grads: Vec<ScalarExpr> = (0..self.n())
            .map(|a| self.scale.grad(a).add(by.grad(a)))
            .collect();
        Self::new(OmegaScale::from_parts(self.base(), exp, grads))
    }

    fn curvature_data(&self) -> &CurvatureData {
        self.curvature.get_or_init(|| Arc::new(self.compute_curvature()))
    }

    fn compute_curvature(&self) -> CurvatureData {
        let n = self.n();
        let vars = self.vars();
        // R^e_{bcd} = d_c Gamma^e_{db} - d_d Gamma^e_{cb}
        //             + Gamma^e_{cf} Gamma^f_{db} - Gamma^e_{df} Gamma^f_{cb},
        // the curvature of the coordinate-frame Christoffels.
        let idx4 = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
        let mut upper = vec![ScalarExpr::zero(vars); n * n * n * n];
        for e in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..c {
                        let mut r = self.gamma(e, d, b).partial_derivative(c);
                        r = r.sub(&self.gamma(e, c, b).partial_derivative(d));
                        for f in 0..n {
                            r = r.add(&self.gamma(e, c, f).mul(self.gamma(f, d, b)));
                            r = r.sub(&self.gamma(e, d, f).mul(self.gamma(f, c, b)));
                        }
                        upper[idx4(e, b, c, d)] = r.clone();
                        upper[idx4(e, b, d, c)] = r.neg();
                    }
                }
            }
        }
        // Riem_{abcd} = g_{ae} R^e_{bcd} with g = e^{2 omega} delta.
        let mut riemann = vec![ScalarExpr::zero(vars); n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        riemann[idx4(a, b, c, d)] =
                            self.metric_factor.mul(&upper[idx4(a, b, c, d)]);
                    }
                }
            }
        }
        // Ric_{bd} = R^a_{bad}.
        let mut ricci = vec![ScalarExpr::zero(vars); n * n];
        for b in 0..n {
            for d in 0..n {
                let mut r = ScalarExpr::zero(vars);
                for a in 0..n {
                    r = r.add(&upper[idx4(a, b, a, d)]);
                }
                ricci[b * n + d] = r;
            }
        }
        // Weyl = Riem minus the Kulkarni-Nomizu product of P and g:
        // (P # g)_{abcd} = g_{ac} P_{bd} + g_{bd} P_{ac}
        //                 - g_{ad} P_{bc} - g_{bc} P_{ad}.
        let g = |a: usize, c: usize| -> Option<&ScalarExpr> {
            (a == c).then_some(&self.metric_factor)
        };
        let mut weyl = vec![ScalarExpr::zero(vars); n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut e = riemann[idx4(a, b, c, d)].clone();
                        if let Some(gac) = g(a, c) {
                            e = e.sub(&gac.mul(self.schouten(b, d)));
                        }
                        if let Some(gbd) = g(b, d) {
                            e = e.sub(&gbd.mul(self.schouten(a, c)));
                        }
                        if let Some(gad) = g(a, d) {
                            e = e.add(&gad.mul(self.schouten(b, c)));
                        }
                        if let Some(gbc) = g(b, c) {
                            e = e.add(&gbc.mul(self.schouten(a, d)));
                        }
                        weyl[idx4(a, b, c, d)] = e;
                    }
                }
            }
        }
        // Cotton A_{abe} = nabla_a P_{be} - nabla_b P_{ae}, the covariant
        // derivative acting on both symmetric indices.
        let nabla_p = |a: usize, b: usize, e: usize| -> ScalarExpr {
            let mut r = self.schouten(b, e).partial_derivative(a);
            for f in 0..n {
                r = r.sub(&self.gamma(f, a, b).mul(self.schouten(f, e)));
                r = r.sub(&self.gamma(f, a, e).mul(self.schouten(b, f)));
            }
            r
        };
        let mut cotton = vec![ScalarExpr::zero(vars); n * n * n];
        for a in 0..n {
            for b in 0..a {
                for e in 0..n {
                    let v = nabla_p(a, b, e).sub(&nabla_p(b, a, e));
                    cotton[(a * n + b) * n + e] = v.clone();
                    cotton[(b * n + a) * n + e] = v.neg();
                }
            }
        }
        CurvatureData {
            riemann,
            ricci,
            weyl,
            cotton,
        }
    }

    /// `Riem_{abcd}`.
    pub fn riemann(&self, a: usize, b: usize, c: usize, d: usize) -> &ScalarExpr {
        let n = self.n();
        &self.curvature_data().riemann[((a * n + b) * n + c) * n + d]
    }

    /// `Ric_{bd}`.
    pub fn ricci(&self, b: usize, d: usize) -> &ScalarExpr {
        &self.curvature_data().ricci[b * self.n() + d]
    }

    /// Weyl `C_{abcd}`; identically zero on every context in scope.
    pub fn weyl(&self, a: usize, b: usize, c: usize, d: usize) -> &ScalarExpr {
        let n = self.n();
        &self.curvature_data().weyl[((a * n + b) * n + c) * n + d]
    }

    /// Cotton `A_{abe}`; identically zero on every context in scope.
    pub fn cotton(&self, a: usize, b: usize, e: usize) -> &ScalarExpr {
        let n = self.n();
        &self.curvature_data().cotton[(a * n + b) * n + e]
    }

    /// True when `Ric = (n-2) P + J g` holds exactly; ties the Schouten
    /// formula to the Christoffel curvature by an independent route.
    pub fn ricci_schouten_consistent(&self) -> bool {
        let n = self.n();
        for b in 0..n {
            for d in 0..n {
                let mut rhs = self.schouten(b, d).mul_int(n as i64 - 2);
                if b == d {
                    rhs = rhs.add(&self.jay.mul(&self.metric_factor));
                }
                if self.ricci(b, d) != &rhs {
                    return false;
                }
            }
        }
        true
    }

    /// True when the Weyl tensor vanishes identically.
    pub fn weyl_is_zero(&self) -> bool {
        self.curvature_data().weyl.iter().all(ScalarExpr::is_zero)
    }

    /// True when the Cotton tensor vanishes identically.
    pub fn cotton_is_zero(&self) -> bool {
        self.curvature_data().cotton.iter().all(ScalarExpr::is_zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn flat_context_has_no_curvature() {
        let ctx = ScaleContext::flat(4);
        assert!(ctx.is_flat());
        for a in 0..4 {
            for b in 0..4 {
                assert!(ctx.schouten(a, b).is_zero());
                for c in 0..4 {
                    assert!(ctx.gamma(c, a, b).is_zero());
                }
            }
        }
        assert!(ctx.jay().is_zero());
        assert!(ctx.ricci_schouten_consistent());
        assert!(ctx.weyl_is_zero());
        assert!(ctx.cotton_is_zero());
    }

    #[test]
    fn round_sphere_schouten_is_half_metric_and_jay_is_half_n() {
        for n in [4usize, 6] {
            let ctx = ScaleContext::round_sphere(n);
            // P = e^{2 omega} delta / 2 and J = n / 2 for the unit sphere.
            let half_metric = ctx.metric_factor().mul_rat(&rat(1, 2));
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        assert_eq!(ctx.schouten(a, b), &half_metric);
                    } else {
                        assert!(ctx.schouten(a, b).is_zero());
                    }
                }
            }
            let expect = ScalarExpr::constant(ctx.vars(), rat(n as i64, 2));
            assert_eq!(ctx.jay(), &expect);
        }
    }

    #[test]
    fn ricci_matches_schouten_on_curved_scales() {
        let base = BaseContext::new(4);
        // Polynomial omega with mixed terms.
        let omega = Poly::var(base.vars(), 0)
            .mul(&Poly::var(base.vars(), 1))
            .add(&Poly::var(base.vars(), 2));
        let ctx = ScaleContext::from_omega_poly(&base, &omega);
        assert!(ctx.ricci_schouten_consistent());
        assert!(ctx.weyl_is_zero());
        assert!(ctx.cotton_is_zero());
    }

    #[test]
    fn rational_scale_curvature_consistency_n6() {
        let ctx = ScaleContext::round_sphere(6);
        assert!(ctx.ricci_schouten_consistent());
        assert!(ctx.weyl_is_zero());
        assert!(ctx.cotton_is_zero());
    }

    #[test]
    fn json_context_round_trip() {
        let ctx = ScaleContext::from_json(r#"{"n": 4, "omega": {"op": "var", "name": "y1"}}"#)
            .unwrap();
        assert_eq!(ctx.n(), 4);
        assert!(!ctx.is_flat());
        assert!(ctx.upsilon(0).is_one());
        assert!(ctx.upsilon(1).is_zero());

        let ctx2 = ScaleContext::from_json(
            r#"{"n": 4, "exp_omega": {"op": "+", "args": [
                {"op": "rat", "num": "1", "den": "1"},
                {"op": "pow", "base": {"op": "var", "name": "y2"}, "exp": 2}
            ]}}"#,
        )
        .unwrap();
        assert!(!ctx2.is_flat());

        assert!(ScaleContext::from_json(r#"{"n": 5, "omega": {"op": "var", "name": "y1"}}"#)
            .is_err());
        assert!(ScaleContext::from_json(r#"{"n": 4}"#).is_err());
    }

    #[test]
    fn rescaled_composes_factors() {
        let base = BaseContext::new(4);
        let ctx = ScaleContext::round_sphere(4);
        let omega = Poly::var(base.vars(), 0);
        let by = OmegaScale::from_omega_poly(&base, &omega);
        let big = ctx.rescaled(&by);
        let expect = ctx.exp_omega().mul(by.exp_omega());
        assert_eq!(big.exp_omega(), &expect);
        let want = ctx.upsilon(0).add(by.grad(0));
        assert_eq!(big.upsilon(0), &want);
    }
}
