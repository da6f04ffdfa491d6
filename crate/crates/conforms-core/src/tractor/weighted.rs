//! Density-weighted differential forms and the Levi-Civita calculus of a
//! scale.
//!
//! A `WeightedForm` is a section of `E^k[w]` trivialized by the scale of the
//! ambient `ScaleContext`: components are honest scalar expressions, the
//! weight is bookkeeping that governs how the components change under a
//! change of scale (`retrivialized` multiplies by `e^{w omega}` of the
//! relative factor). In its own trivialization the density connection of the
//! scale is the coordinate derivative, so the Levi-Civita derivative of a
//! weighted form only sees the Christoffels on the form indices.
//!
//! The codifferential is `delta v = -g^{ab} nabla_a v_{b..}` and lowers the
//! weight by two; the exterior derivative keeps the weight. Under a change
//! of scale with relative gradient `Upsilon` these obey
//! `hat delta = delta - (n - 2k) iota(Upsilon)` on unweighted `k`-forms and
//! the connection picks up the usual `Upsilon` terms; both laws are checked
//! here against direct recomputation in the rescaled context.

use crate::forms::{letters, FormData};
use crate::scalar::ScalarExpr;

use super::ScaleContext;

/// A `k`-form of density weight `w`, trivialized in a fixed scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedForm {
    data: FormData,
    weight: i64,
}

impl WeightedForm {
    pub fn new(data: FormData, weight: i64) -> Self {
        WeightedForm { data, weight }
    }

    pub fn data(&self) -> &FormData {
        &self.data
    }

    pub fn into_data(self) -> FormData {
        self.data
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn degree(&self) -> usize {
        self.data.degree()
    }

    pub fn is_zero(&self) -> bool {
        self.data.is_zero()
    }

    pub fn add(&self, other: &WeightedForm) -> WeightedForm {
        assert_eq!(self.weight, other.weight, "weights must agree");
        WeightedForm::new(self.data.add(&other.data), self.weight)
    }

    pub fn sub(&self, other: &WeightedForm) -> WeightedForm {
        assert_eq!(self.weight, other.weight, "weights must agree");
        WeightedForm::new(self.data.sub(&other.data), self.weight)
    }

    pub fn neg(&self) -> WeightedForm {
        WeightedForm::new(self.data.neg(), self.weight)
    }

    pub fn scale(&self, c: &ScalarExpr) -> WeightedForm {
        WeightedForm::new(self.data.scale(c), self.weight)
    }

    pub fn scale_int(&self, c: i64) -> WeightedForm {
        WeightedForm::new(self.data.map(|_, e| e.mul_int(c)), self.weight)
    }

    /// The same weighted form trivialized by the scale rescaled with the
    /// given relative factor: components multiply by `(e^omega_rel)^w`.
    pub fn retrivialized(&self, exp_omega_rel: &ScalarExpr) -> WeightedForm {
        let f = exp_omega_rel
            .pow(self.weight)
            .expect("relative scale factor is a unit");
        WeightedForm::new(self.data.scale(&f), self.weight)
    }
}

impl ScaleContext {
    /// Direction-`a` Levi-Civita derivative: coordinate derivative minus
    /// one Christoffel contraction per form index. Weight is untouched in
    /// the own-scale trivialization.
    pub fn nabla(&self, a: usize, v: &WeightedForm) -> WeightedForm {
        WeightedForm::new(self.nabla_data(a, v.data()), v.weight())
    }

    pub(crate) fn nabla_data(&self, a: usize, data: &FormData) -> FormData {
        let mut out = data.map(|_, e| e.partial_derivative(a));
        if self.is_flat() {
            return out;
        }
        for (mask, f) in data.iter() {
            for c in letters(mask) {
                for b in 0..self.n() {
                    // (nabla_a v)_{.. b ..} -= Gamma^c_{ab} v_{.. c ..}: the
                    // upper index is the contracted input letter.
                    let coeff = self.gamma(c, a, b);
                    if coeff.is_zero() {
                        continue;
                    }
                    let Some((rest, s1)) = crate::forms::remove_with_sign(mask, c) else {
                        continue;
                    };
                    let Some((tgt, s2)) = crate::forms::insert_with_sign(rest, b) else {
                        continue;
                    };
                    let term = coeff.mul(f).mul_int((s1 * s2) as i64).neg();
                    out.add_to(tgt, term);
                }
            }
        }
        out
    }

    /// Exterior derivative; equals the antisymmetrized Levi-Civita
    /// derivative, so in the own-scale trivialization it is the coordinate
    /// `d` and keeps the weight.
    pub fn d(&self, v: &WeightedForm) -> WeightedForm {
        if v.degree() == self.n() {
            return WeightedForm::new(
                FormData::zero(self.vars(), self.n(), self.n()),
                v.weight(),
            );
        }
        WeightedForm::new(v.data().d_with(|a, e| e.partial_derivative(a)), v.weight())
    }

    /// Codifferential `delta v = -g^{ab} nabla_a v_{b..}`, lowering the
    /// weight by two.
    pub fn delta(&self, v: &WeightedForm) -> WeightedForm {
        let n = self.n();
        let vars = self.vars();
        if v.degree() == 0 {
            return WeightedForm::new(FormData::zero(vars, n, 0), v.weight() - 2);
        }
        let mut out = FormData::zero(vars, n, v.degree() - 1);
        for a in 0..n {
            let da = self.nabla_data(a, v.data());
            // Contract the first index with g^{ab} = e^{-2 omega} delta^{ab}.
            let mut contra = vec![ScalarExpr::zero(vars); n];
            contra[a] = self.inverse_metric_factor().clone();
            out = out.add(&da.contract1(&contra));
        }
        WeightedForm::new(out.neg(), v.weight() - 2)
    }

    /// Interior product with the vector field obtained by raising the given
    /// covector with this scale's metric. Lowers the weight by two, matching
    /// the inverse-metric factor it carries.
    pub fn interior(&self, cov: &[ScalarExpr], v: &WeightedForm) -> WeightedForm {
        let contra: Vec<ScalarExpr> = cov
            .iter()
            .map(|c| c.mul(self.inverse_metric_factor()))
            .collect();
        WeightedForm::new(v.data().contract1(&contra), v.weight() - 2)
    }

    /// Trace Laplacian `nabla^p nabla_p` on weighted forms (sign: positive
    /// sum of second derivatives in the flat scale). Weight drops by two.
    pub fn trace_laplacian(&self, v: &WeightedForm) -> WeightedForm {
        let n = self.n();
        let mut out = FormData::zero(self.vars(), n, v.degree());
        for a in 0..n {
            // nabla_a nabla_a v, with the second nabla acting on the
            // one-index-heavier object nabla v: the extra derivative index
            // needs its own Christoffel row.
            let first = self.nabla_data(a, v.data());
            let mut second = self.nabla_data(a, &first);
            if !self.is_flat() {
                for b in 0..n {
                    let coeff = self.gamma(b, a, a);
                    if coeff.is_zero() {
                        continue;
                    }
                    second = second.sub(&self.nabla_data(b, v.data()).scale(coeff));
                }
            }
            out = out.add(&second.scale(self.inverse_metric_factor()));
        }
        WeightedForm::new(out, v.weight() - 2)
    }
}

/// `hat nabla_a f = nabla_a f + w Upsilon_a f` for densities: the rescaled
/// context's coordinate derivative of the retrivialized density agrees with
/// the stated transform. Returns true when the law holds exactly.
pub fn density_connection_transform_holds(
    ctx: &ScaleContext,
    rescaled: &ScaleContext,
    f: &WeightedForm,
) -> bool {
    assert_eq!(f.degree(), 0, "densities are weighted scalars");
    let n = ctx.n();
    let rel = rescaled
        .exp_omega()
        .mul(&ctx.exp_omega().inverse().expect("scale factor is a unit"));
    let f_hat = f.retrivialized(&rel);
    for a in 0..n {
        // Relative Upsilon_a is the difference of the two gradients.
        let ups = rescaled.upsilon(a).sub(ctx.upsilon(a));
        let lhs = rescaled.nabla(a, &f_hat);
        let rhs = ctx
            .nabla(a, f)
            .add(&f.scale(&ups.mul_int(f.weight())))
            .retrivialized(&rel);
        if lhs != rhs {
            return false;
        }
    }
    true
}

/// `hat nabla_a u_b = nabla_a u_b - Upsilon_a u_b - Upsilon_b u_a
/// + g_{ab} Upsilon^c u_c` on unweighted one-forms, with the conformal
/// metric pairing `g_{ab} g^{cd} = delta_{ab} delta^{cd}`.
pub fn one_form_connection_transform_holds(
    ctx: &ScaleContext,
    rescaled: &ScaleContext,
    u: &WeightedForm,
) -> bool {
    assert_eq!(u.degree(), 1, "the law is stated for one-forms");
    assert_eq!(u.weight(), 0, "the law is stated for unweighted forms");
    let n = ctx.n();
    let vars = ctx.vars();
    let ups: Vec<ScalarExpr> = (0..n)
        .map(|a| rescaled.upsilon(a).sub(ctx.upsilon(a)))
        .collect();
    let mut ups_dot_u = ScalarExpr::zero(vars);
    for c in 0..n {
        ups_dot_u = ups_dot_u.add(&ups[c].mul(&u.data().component(1 << c)));
    }
    for a in 0..n {
        let lhs = rescaled.nabla(a, u);
        let base = ctx.nabla(a, u);
        for b in 0..n {
            let mut rhs = base.data().component(1 << b);
            rhs = rhs.sub(&ups[a].mul(&u.data().component(1 << b)));
            rhs = rhs.sub(&ups[b].mul(&u.data().component(1 << a)));
            if a == b {
                rhs = rhs.add(&ups_dot_u);
            }
            if lhs.data().component(1 << b) != rhs {
                return false;
            }
        }
    }
    true
}

/// `delta_hat v = e^{-2 omega} (delta v - (n - 2k) iota(Upsilon) v)` on
/// unweighted `k`-forms; the prefactor retrivializes the weight `-2` output
/// into the rescaled context.
pub fn delta_transform_holds(
    ctx: &ScaleContext,
    rescaled: &ScaleContext,
    v: &WeightedForm,
) -> bool {
    assert_eq!(v.weight(), 0, "the law is stated for unweighted forms");
    let n = ctx.n() as i64;
    let k = v.degree() as i64;
    let rel = rescaled
        .exp_omega()
        .mul(&ctx.exp_omega().inverse().expect("scale factor is a unit"));
    let ups: Vec<ScalarExpr> = (0..ctx.n())
        .map(|a| rescaled.upsilon(a).sub(ctx.upsilon(a)))
        .collect();
    let lhs = rescaled.delta(v);
    let rhs = ctx
        .delta(v)
        .sub(&ctx.interior(&ups, v).scale_int(n - 2 * k))
        .retrivialized(&rel);
    lhs == rhs
}
