//! Descent of cone operators to the conformal base.
//!
//! Homogeneous ambient forms represent sections of two families of weighted
//! form bundles on the base: a quotient family `G^k[w]` (ambient `k`-forms of
//! homogeneity `w` modulo the image of `eps(X)`, trivialized by a pair of
//! base forms `(alpha, mu)` of degrees `k-1, k` and weight `w`) and a
//! subbundle family `G_k[w]` (forms of homogeneity `2k - n + w` built from a
//! top slot `u` of degree `k` and an `eps(X)`-trapped slot `v` of degree
//! `k-1`). The [`DescentContext`] carries a scale onto the cone and provides
//! the exact inject/extract dictionary between pairs and ambient
//! representatives, together with the pair-level cone calculus: the exterior
//! derivative `d_pair`, its formal adjoint `delta_pair`, the wedge with the
//! scale's transversal section, and the interior/exterior operators of the
//! canonical vertical direction.
//!
//! Everything is exact arithmetic. Extraction composes the section pullback
//! with contractions against the null frame `(X, T_Y, T_Z)` of the scale;
//! the frame identities `h(T_Y, T_Y) = 0`, `h(T_Y, X) = 1`, `h(T_Y, T_Z) = 0`
//! hold identically over the base and are tested below.

pub mod continuation;
pub mod descent;
pub mod operators;

use crate::ambient::scale::{AmbientScale, OmegaScale};
use crate::ambient::{AmbientError, AmbientForm};
use crate::base::BaseContext;
use crate::forms::FormData;
use crate::scalar::{QuadricContext, ScalarError, ScalarExpr};

pub use descent::{DescendedOperator, KOperator};

/// Errors from the descent machinery.
#[derive(Debug, thiserror::Error)]
pub enum FactoryError {
    #[error("weight mismatch: operator expects weight {expected}, section has {found}")]
    WeightMismatch { expected: i64, found: i64 },
    #[error("degree {k} out of range for dimension {n}")]
    DegreeOutOfRange { k: usize, n: usize },
    #[error("expected a {expected} section")]
    VarianceMismatch { expected: &'static str },
    #[error("slot shape mismatch: {0}")]
    SlotShape(String),
    #[error("operator is not defined at this scale: {0}")]
    ScaleUnsupported(String),
    #[error("input form is not closed")]
    NotClosed,
    #[error(transparent)]
    Ambient(#[from] AmbientError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// Which of the two bundle families a section belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variance {
    /// Quotient family `G^k[w]`: pair `(alpha, mu)` of degrees `(k-1, k)`.
    Up,
    /// Subbundle family `G_k[w]`: pair `(u, v)` of degrees `(k, k-1)`.
    Down,
}

/// A trivialized section of `G^k[w]` or `G_k[w]`: two base forms.
///
/// For `Up` the slots are `(alpha, mu)`; the ambient representative is
/// `dlog(sigma) ^ sigma^w pi^* alpha + sigma^w pi^* mu`. For `Down` the slots
/// are `(u, v)`; the representative is
/// `sigma^s pi^* u + X^flat ^ sigma^{s-2} pi^* v` with `s = 2k - n + w`.
/// When the lower-degree slot would have degree `k - 1 < 0` it is stored as a
/// zero scalar form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GSection {
    variance: Variance,
    degree: usize,
    weight: i64,
    first: FormData,
    second: FormData,
}

/// Degree of the lower slot: `k - 1`, clamped to a zero scalar slot at `k = 0`.
fn lower_degree(k: usize) -> usize {
    k.saturating_sub(1)
}

impl GSection {
    /// Quotient-family section with slots `(alpha, mu)`.
    pub fn up(k: usize, weight: i64, alpha: FormData, mu: FormData) -> Result<Self, FactoryError> {
        check_slot(&alpha, lower_degree(k), "alpha")?;
        check_slot(&mu, k, "mu")?;
        if k == 0 && !alpha.is_zero() {
            return Err(FactoryError::SlotShape(
                "alpha slot must vanish at degree 0".into(),
            ));
        }
        Ok(GSection {
            variance: Variance::Up,
            degree: k,
            weight,
            first: alpha,
            second: mu,
        })
    }

    /// Subbundle-family section with slots `(u, v)`.
    pub fn down(k: usize, weight: i64, u: FormData, v: FormData) -> Result<Self, FactoryError> {
        check_slot(&u, k, "u")?;
        check_slot(&v, lower_degree(k), "v")?;
        if k == 0 && !v.is_zero() {
            return Err(FactoryError::SlotShape(
                "v slot must vanish at degree 0".into(),
            ));
        }
        Ok(GSection {
            variance: Variance::Down,
            degree: k,
            weight,
            first: u,
            second: v,
        })
    }

    /// Quotient-family section with vanishing `alpha` slot (the image of a
    /// plain weighted form under the canonical injection).
    pub fn up_from_mu(base: &BaseContext, weight: i64, mu: FormData) -> Result<Self, FactoryError> {
        let k = mu.degree();
        GSection::up(k, weight, base.zero_form(lower_degree(k)), mu)
    }

    pub fn variance(&self) -> Variance {
        self.variance
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn alpha(&self) -> &FormData {
        assert_eq!(self.variance, Variance::Up, "alpha slot of a down section");
        &self.first
    }

    pub fn mu(&self) -> &FormData {
        assert_eq!(self.variance, Variance::Up, "mu slot of a down section");
        &self.second
    }

    pub fn u_slot(&self) -> &FormData {
        assert_eq!(self.variance, Variance::Down, "u slot of an up section");
        &self.first
    }

    pub fn v_slot(&self) -> &FormData {
        assert_eq!(self.variance, Variance::Down, "v slot of an up section");
        &self.second
    }

    pub fn is_zero(&self) -> bool {
        self.first.is_zero() && self.second.is_zero()
    }

    pub fn add(&self, other: &GSection) -> GSection {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &GSection) -> GSection {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn neg(&self) -> GSection {
        GSection {
            variance: self.variance,
            degree: self.degree,
            weight: self.weight,
            first: self.first.neg(),
            second: self.second.neg(),
        }
    }

    pub fn scale(&self, c: &ScalarExpr) -> GSection {
        GSection {
            variance: self.variance,
            degree: self.degree,
            weight: self.weight,
            first: self.first.scale(c),
            second: self.second.scale(c),
        }
    }

    pub fn scale_int(&self, c: i64) -> GSection {
        let r = crate::scalar::rat_int(c);
        GSection {
            variance: self.variance,
            degree: self.degree,
            weight: self.weight,
            first: self.first.scale_rat(&r),
            second: self.second.scale_rat(&r),
        }
    }

    fn zip(&self, other: &GSection, f: impl Fn(&FormData, &FormData) -> FormData) -> GSection {
        assert_eq!(self.variance, other.variance, "section family mismatch");
        assert_eq!(self.degree, other.degree, "section degree mismatch");
        assert_eq!(self.weight, other.weight, "section weight mismatch");
        GSection {
            variance: self.variance,
            degree: self.degree,
            weight: self.weight,
            first: f(&self.first, &other.first),
            second: f(&self.second, &other.second),
        }
    }
}

fn check_slot(slot: &FormData, degree: usize, name: &str) -> Result<(), FactoryError> {
    if slot.degree() != degree && !slot.is_zero() {
        return Err(FactoryError::SlotShape(format!(
            "{name} slot has degree {}, expected {degree}",
            slot.degree()
        )));
    }
    Ok(())
}

/// A scale carried onto the cone together with the transversal null frame,
/// giving the full inject/extract dictionary for both bundle families.
pub struct DescentContext {
    amb: AmbientScale,
    /// Ambient components of the transversal null vector of the scale
    /// (contravariant, frame order `plus, 1..n, minus`). Only its values
    /// along the section matter; the canonical lift used here is constant
    /// along cone dilations.
    t_y: Vec<ScalarExpr>,
    /// Components of `dlog sigma` over the ambient table.
    dlog: Vec<ScalarExpr>,
}

/// Base-level components of the transversal null vector `T_Y` of a scale, in
/// frame order `plus, 1..n, minus`: writing `a = -e^{-omega} |Upsilon|^2 / 2`,
///
/// ```text
/// T_Y = ( a,  a y_i - e^{-omega} Upsilon_i,
///         e^{-omega} (1 + <Upsilon, y>) - a |y|^2 / 2 ).
/// ```
///
/// These satisfy `h(T_Y, T_Y) = 0`, `h(T_Y, X) = 1`, `h(T_Y, T_Z) = 0`
/// identically over the base, where `X` and `T_Z` are the position vector and
/// the coordinate tangents of the section.
pub fn t_y_base_components(scale: &OmegaScale) -> Vec<ScalarExpr> {
    let base = scale.base();
    let n = base.n();
    let vars = base.vars();
    let inv_e = scale.exp_omega().inverse().expect("e^omega is a unit");
    let mut ups_sq = ScalarExpr::zero(vars);
    for g in scale.grads() {
        ups_sq = ups_sq.add(&g.mul(g));
    }
    // a = -e^{-omega} |Upsilon|^2 / 2.
    let a = inv_e
        .mul(&ups_sq)
        .mul_rat(&crate::scalar::Rat::new((-1).into(), 2.into()));
    let mut comps = Vec::with_capacity(n + 2);
    comps.push(a.clone());
    let mut ups_dot_y = ScalarExpr::zero(vars);
    for i in 1..=n {
        let ups_i = &scale.grads()[i - 1];
        comps.push(a.mul(&base.coord(i)).sub(&inv_e.mul(ups_i)));
        ups_dot_y = ups_dot_y.add(&ups_i.mul(&base.coord(i)));
    }
    let norm_half = ScalarExpr::from_poly(base.norm_sq())
        .mul_rat(&crate::scalar::Rat::new(1.into(), 2.into()));
    let minus = inv_e
        .mul(&ScalarExpr::one(vars).add(&ups_dot_y))
        .sub(&a.mul(&norm_half));
    comps.push(minus);
    comps
}

impl DescentContext {
    pub fn new(ctx: &QuadricContext, scale: &OmegaScale) -> Self {
        let amb = AmbientScale::new(ctx, scale);
        let base_comps = t_y_base_components(scale);
        let t_y = base_comps
            .iter()
            .map(|c| lift_to_ambient(&amb, c).expect("frame component lift"))
            .collect();
        let dlog = amb.dlog_sigma();
        DescentContext { amb, t_y, dlog }
    }

    pub fn ambient(&self) -> &AmbientScale {
        &self.amb
    }

    pub fn ctx(&self) -> &QuadricContext {
        self.amb.ctx()
    }

    pub fn base(&self) -> &BaseContext {
        self.amb.base()
    }

    pub fn scale(&self) -> &OmegaScale {
        self.amb.scale()
    }

    pub fn n(&self) -> usize {
        self.amb.ctx().n()
    }

    /// Ambient components of the transversal null vector.
    pub fn t_y(&self) -> &[ScalarExpr] {
        &self.t_y
    }

    /// `e^{c omega}` over the base table.
    fn omega_power(&self, c: i64) -> ScalarExpr {
        self.amb
            .scale()
            .exp_omega()
            .pow(c)
            .expect("e^omega power")
    }

    /// Gradient covector of the scale over the base table.
    pub fn upsilon(&self) -> Vec<ScalarExpr> {
        self.amb.scale().grads().to_vec()
    }

    /// Homogeneity of the ambient representative of `G_k[w]`.
    pub fn down_rep_weight(&self, k: usize, weight: i64) -> i64 {
        2 * (k as i64) - (self.n() as i64) + weight
    }

    /// Ambient representative of an `Up` section:
    /// `dlog(sigma) ^ sigma^w pi^* alpha + sigma^w pi^* mu`.
    pub fn inject_up(&self, s: &GSection) -> Result<AmbientForm, FactoryError> {
        if s.variance() != Variance::Up {
            return Err(FactoryError::VarianceMismatch { expected: "up" });
        }
        let w = s.weight();
        let mu_part = self.amb.extend(s.mu(), w)?;
        if s.degree() == 0 || s.alpha().is_zero() {
            return Ok(mu_part);
        }
        let alpha_ext = self.amb.extend(s.alpha(), w)?;
        let raised = alpha_ext.data().wedge1(&self.dlog);
        let alpha_part = AmbientForm::homogeneous(self.ctx(), raised, w)?;
        Ok(alpha_part.add(&mu_part))
    }

    /// Ambient representative of a `Down` section:
    /// `sigma^s pi^* u + X^flat ^ sigma^{s-2} pi^* v`, `s = 2k - n + w`.
    pub fn inject_down(&self, s: &GSection) -> Result<AmbientForm, FactoryError> {
        if s.variance() != Variance::Down {
            return Err(FactoryError::VarianceMismatch { expected: "down" });
        }
        let rep_w = self.down_rep_weight(s.degree(), s.weight());
        let u_part = self.amb.extend(s.u_slot(), rep_w)?;
        if s.degree() == 0 || s.v_slot().is_zero() {
            return Ok(u_part);
        }
        let v_part = self.amb.extend(s.v_slot(), rep_w - 2)?.eps_x();
        Ok(u_part.add(&v_part))
    }

    /// Read an `Up` pair off an ambient representative of homogeneity `w`:
    /// `mu` is the section pullback, `alpha` the pullback of `iota(X)`.
    pub fn extract_up(&self, phi: &AmbientForm, weight: i64) -> Result<GSection, FactoryError> {
        let k = phi.degree();
        let mu = self.amb.restrict(phi)?;
        let alpha = if k == 0 {
            self.base().zero_form(0)
        } else {
            self.amb.restrict(&phi.iota_x())?
        };
        GSection::up(k, weight, alpha, mu)
    }

    /// Read a `Down` pair off an ambient representative: `u` is the section
    /// pullback, `v` the pullback of the contraction with the transversal
    /// null vector.
    pub fn extract_down(&self, phi: &AmbientForm, weight: i64) -> Result<GSection, FactoryError> {
        let k = phi.degree();
        let u = self.amb.restrict(phi)?;
        let v = if k == 0 {
            self.base().zero_form(0)
        } else {
            let contracted = phi.data().contract1(&self.t_y);
            let down = AmbientForm::general(self.ctx(), contracted);
            self.amb.restrict(&down)?
        };
        GSection::down(k, weight, u, v)
    }

    /// Canonical injection of a plain weighted form into the quotient family.
    pub fn q_inject(&self, mu: &FormData, weight: i64) -> Result<GSection, FactoryError> {
        GSection::up_from_mu(self.base(), weight, mu.clone())
    }

    /// Canonical projection of a subbundle-family section onto its top slot.
    pub fn q_project(&self, s: &GSection) -> Result<FormData, FactoryError> {
        if s.variance() != Variance::Down {
            return Err(FactoryError::VarianceMismatch { expected: "down" });
        }
        Ok(s.u_slot().clone())
    }

    /// Pair-level exterior derivative on the quotient family:
    /// `(alpha, mu) -> (w mu - d alpha, d mu)`, degree `k -> k + 1`, same
    /// weight. Matches the ambient `d` through `inject_up` exactly, at every
    /// scale.
    pub fn d_pair(&self, s: &GSection) -> Result<GSection, FactoryError> {
        if s.variance() != Variance::Up {
            return Err(FactoryError::VarianceMismatch { expected: "up" });
        }
        let base = self.base();
        let w = s.weight();
        let scaled = s.mu().scale_rat(&crate::scalar::rat_int(w));
        let alpha_out = if s.degree() == 0 {
            scaled
        } else {
            scaled.sub(&base.d(s.alpha()))
        };
        let mu_out = base.d(s.mu());
        GSection::up(s.degree() + 1, w, alpha_out, mu_out)
    }

    /// Pair-level codifferential on the subbundle family, the formal adjoint
    /// of [`Self::d_pair`] for the conformal pairing: on `G_k[w]`,
    ///
    /// ```text
    /// u' = e^{-(n-2k+2) omega} delta_0 ( e^{(n-2k) omega} u ) - w v,
    /// v' = -e^{-(n-2k+4) omega} delta_0 ( e^{(n-2k+2) omega} v ),
    /// ```
    ///
    /// with `delta_0` the coordinate codifferential; degree `k -> k - 1`,
    /// same weight.
    pub fn delta_pair(&self, s: &GSection) -> Result<GSection, FactoryError> {
        if s.variance() != Variance::Down {
            return Err(FactoryError::VarianceMismatch { expected: "down" });
        }
        let k = s.degree();
        if k == 0 {
            return Err(FactoryError::DegreeOutOfRange { k: 0, n: self.n() });
        }
        let u_out = self
            .delta_conjugated(s.u_slot(), k)
            .sub(&s.v_slot().scale_rat(&crate::scalar::rat_int(s.weight())));
        let v_out = if k == 1 {
            self.base().zero_form(0)
        } else {
            self.delta_conjugated(s.v_slot(), k - 1).neg()
        };
        GSection::down(k - 1, s.weight(), u_out, v_out)
    }

    /// The conjugated codifferential `e^{-(n-2k+2) omega} delta_0 e^{(n-2k) omega}`
    /// on `k`-forms: the scale-invariant codifferential of the weight-`2k - n`
    /// slot, trivialized in this scale. Reduces to the coordinate
    /// codifferential at the flat scale.
    pub fn delta_conjugated(&self, u: &FormData, k: usize) -> FormData {
        let p = (self.n() as i64) - 2 * (k as i64);
        if self.amb.scale().is_flat() {
            return self.base().delta_euclid(u);
        }
        let inner = u.scale(&self.omega_power(p));
        self.base()
            .delta_euclid(&inner)
            .scale(&self.omega_power(-(p + 2)))
    }

    /// Wedge of a degree-one `Up` section against an `Up` section:
    /// `(a, m) ^ (alpha, mu) = (a ^ mu - m ^ alpha, m ^ mu)` where `a` is a
    /// scalar. Weights add.
    pub fn wedge_one(&self, one: &GSection, s: &GSection) -> Result<GSection, FactoryError> {
        if one.variance() != Variance::Up || s.variance() != Variance::Up {
            return Err(FactoryError::VarianceMismatch { expected: "up" });
        }
        if one.degree() != 1 {
            return Err(FactoryError::SlotShape(
                "wedge_one expects a degree-one section".into(),
            ));
        }
        let a = one.alpha().component(0);
        let m_cov: Vec<ScalarExpr> = (0..self.n())
            .map(|i| one.mu().component(1 << i))
            .collect();
        let alpha_out = if s.degree() == 0 {
            s.mu().scale(&a)
        } else {
            s.mu().scale(&a).sub(&s.alpha().wedge1(&m_cov))
        };
        let mu_out = s.mu().wedge1(&m_cov);
        GSection::up(s.degree() + 1, one.weight() + s.weight(), alpha_out, mu_out)
    }

    /// The transversal section of the scale as a degree-one pair `(1, 0)`:
    /// in its own trivialization every scale sees the pair `(1, 0)`.
    pub fn y_pair(&self) -> GSection {
        let one = self.base().scalar_form(ScalarExpr::one(self.base().vars()));
        GSection::up(1, 0, one, self.base().zero_form(1)).expect("y pair")
    }

    /// Exterior multiplication by the transversal section:
    /// `(alpha, mu) -> (mu, 0)`, degree `k -> k + 1`, same weight.
    pub fn eps_y(&self, s: &GSection) -> Result<GSection, FactoryError> {
        self.wedge_one(&self.y_pair(), s)
    }

    /// Pair-level contraction with the Euler direction on the quotient
    /// family: `(alpha, mu) -> (0, alpha)`, degree `k -> k - 1`, same weight.
    pub fn iota_x_pair(&self, s: &GSection) -> Result<GSection, FactoryError> {
        if s.variance() != Variance::Up {
            return Err(FactoryError::VarianceMismatch { expected: "up" });
        }
        let k = s.degree();
        if k == 0 {
            return Err(FactoryError::DegreeOutOfRange { k: 0, n: self.n() });
        }
        GSection::up(
            k - 1,
            s.weight(),
            self.base().zero_form(lower_degree(k - 1)),
            s.alpha().clone(),
        )
    }

    /// Pair-level exterior multiplication by `X^flat` on the subbundle
    /// family: `(u, v) -> (0, u)`, degree `k -> k + 1`, same weight.
    pub fn eps_x_pair(&self, s: &GSection) -> Result<GSection, FactoryError> {
        if s.variance() != Variance::Down {
            return Err(FactoryError::VarianceMismatch { expected: "down" });
        }
        GSection::down(
            s.degree() + 1,
            s.weight(),
            self.base().zero_form(s.degree() + 1),
            s.u_slot().clone(),
        )
    }

    /// Pair-level contraction with the transversal direction on the
    /// subbundle family: `(u, v) -> (v, 0)`, degree `k -> k - 1`, same weight.
    pub fn iota_y_pair(&self, s: &GSection) -> Result<GSection, FactoryError> {
        if s.variance() != Variance::Down {
            return Err(FactoryError::VarianceMismatch { expected: "down" });
        }
        let k = s.degree();
        if k == 0 {
            return Err(FactoryError::DegreeOutOfRange { k: 0, n: self.n() });
        }
        GSection::down(
            k - 1,
            s.weight(),
            s.v_slot().clone(),
            self.base().zero_form(lower_degree(k - 1)),
        )
    }
}

/// Lift a base-table scalar to the ambient table by substituting the cone
/// projection images; a formal scale factor maps to its ambient counterpart.
pub fn lift_to_ambient(
    amb: &AmbientScale,
    expr: &ScalarExpr,
) -> Result<ScalarExpr, ScalarError> {
    let ctx = amb.ctx();
    let av = ctx.vars();
    let base_vars = amb.base().vars();
    let xp = crate::scalar::Poly::var(av, ctx.idx_plus());
    let mut images: Vec<ScalarExpr> = (1..=ctx.n())
        .map(|i| {
            ScalarExpr::fraction(
                crate::scalar::Poly::var(av, ctx.idx_spatial(i)),
                xp.clone(),
            )
        })
        .collect();
    for pname in base_vars.param_names() {
        let idx = av
            .index_of(pname)
            .unwrap_or_else(|| panic!("ambient table lacks parameter `{pname}`"));
        images.push(ScalarExpr::var(av, idx));
    }
    expr.substitute(av, &images, Some(amb.exp_omega_amb()))
}

/// Pullback of an ambient form along the section of the scale composed with
/// contraction against a vector given over the ambient table. Used for the
/// frame oracles; extraction proper lives in [`DescentContext`].
pub fn restrict_contraction(
    amb: &AmbientScale,
    phi: &AmbientForm,
    vector: &[ScalarExpr],
) -> Result<FormData, AmbientError> {
    let contracted = phi.data().contract1(vector);
    let down = AmbientForm::general(amb.ctx(), contracted);
    amb.restrict(&down)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;
    use crate::ambient::sample::rng_for;
    use crate::scalar::{Poly, Rat};
    use crate::tractor::sample::{random_base_poly, random_poly_scale, random_rational_scale};

    fn random_slot(
        base: &BaseContext,
        degree: usize,
        rng: &mut ChaCha20Rng,
    ) -> FormData {
        let mut out = base.zero_form(degree);
        for mask in crate::forms::masks_of_degree(base.n(), degree) {
            let p = random_base_poly(base, 2, rng);
            out.add_to(mask, ScalarExpr::from_poly(p));
        }
        out
    }

    fn scales(n: usize, seed: u64) -> Vec<(&'static str, OmegaScale)> {
        let base = BaseContext::new(n);
        let mut rng = rng_for(seed);
        vec![
            ("flat", OmegaScale::flat(&base)),
            ("poly", random_poly_scale(&base, &mut rng)),
            ("rational", random_rational_scale(&base, &mut rng)),
        ]
    }

    /// Frame identities for the transversal lift, identically over the base:
    /// `h(T_Y, T_Y) = 0`, `h(T_Y, X) = 1`, `h(T_Y, T_Z_i) = 0`.
    #[test]
    fn transversal_frame_identities() {
        for n in [4usize, 6] {
            for (name, scale) in scales(n, 11 + n as u64) {
                let base = scale.base().clone();
                let t = t_y_base_components(&scale);
                let e = scale.exp_omega().clone();
                // Section images as a contravariant vector over the base.
                let mut x_sec: Vec<ScalarExpr> = Vec::new();
                x_sec.push(e.clone());
                for i in 1..=n {
                    x_sec.push(e.mul(&base.coord(i)));
                }
                x_sec.push(
                    e.mul(&ScalarExpr::from_poly(base.norm_sq()))
                        .mul_rat(&Rat::new((-1).into(), 2.into())),
                );
                let h_pair = |v: &[ScalarExpr], w: &[ScalarExpr]| {
                    // h(v, w) = v^+ w^- + v^- w^+ + sum_i v^i w^i.
                    let mut acc = v[0].mul(&w[n + 1]).add(&v[n + 1].mul(&w[0]));
                    for i in 1..=n {
                        acc = acc.add(&v[i].mul(&w[i]));
                    }
                    acc
                };
                assert!(h_pair(&t, &t).is_zero(), "h(T_Y,T_Y) at {name}, n={n}");
                assert!(
                    h_pair(&t, &x_sec)
                        .sub(&ScalarExpr::one(base.vars()))
                        .is_zero(),
                    "h(T_Y,X) at {name}, n={n}"
                );
                for i in 0..n {
                    let tz: Vec<ScalarExpr> =
                        x_sec.iter().map(|c| c.partial_derivative(i)).collect();
                    assert!(h_pair(&t, &tz).is_zero(), "h(T_Y,T_Z_{i}) at {name}, n={n}");
                }
            }
        }
    }

    /// At the flat scale the transversal lift is the constant null direction.
    #[test]
    fn transversal_flat_is_constant_direction() {
        let base = BaseContext::new(4);
        let scale = OmegaScale::flat(&base);
        let t = t_y_base_components(&scale);
        for (i, c) in t.iter().enumerate() {
            if i == 5 {
                assert!(c.sub(&ScalarExpr::one(base.vars())).is_zero());
            } else {
                assert!(c.is_zero(), "component {i}");
            }
        }
    }

    /// Inject then extract recovers an `Up` pair exactly, at every scale.
    #[test]
    fn up_roundtrip_every_scale() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let mut rng = rng_for(23);
        for (name, scale) in scales(n, 17) {
            let dctx = DescentContext::new(&ctx, &scale);
            for (k, w) in [(0usize, 0i64), (1, 0), (1, -3), (2, 2), (3, -1)] {
                let alpha = if k == 0 {
                    dctx.base().zero_form(0)
                } else {
                    random_slot(dctx.base(), k - 1, &mut rng)
                };
                let mu = random_slot(dctx.base(), k, &mut rng);
                let s = GSection::up(k, w, alpha, mu).unwrap();
                let phi = dctx.inject_up(&s).unwrap();
                let back = dctx.extract_up(&phi, w).unwrap();
                assert!(back.sub(&s).is_zero(), "up roundtrip k={k} w={w} at {name}");
            }
        }
    }

    /// Inject then extract recovers a `Down` pair exactly at the flat scale.
    #[test]
    fn down_roundtrip_flat() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let scale = OmegaScale::flat(&base);
        let dctx = DescentContext::new(&ctx, &scale);
        let mut rng = rng_for(29);
        for (k, w) in [(0usize, 0i64), (1, 0), (2, 0), (2, 3), (3, -2)] {
            let u = random_slot(dctx.base(), k, &mut rng);
            let v = if k == 0 {
                dctx.base().zero_form(0)
            } else {
                random_slot(dctx.base(), k - 1, &mut rng)
            };
            let s = GSection::down(k, w, u, v).unwrap();
            let phi = dctx.inject_down(&s).unwrap();
            let back = dctx.extract_down(&phi, w).unwrap();
            assert!(back.sub(&s).is_zero(), "down roundtrip k={k} w={w}");
        }
    }

    /// Cross-scale extraction of an `Up` representative obeys the cocycle
    /// `(alpha, mu) -> (e^{w omega} alpha, e^{w omega} (mu + Upsilon ^ alpha))`.
    #[test]
    fn up_cross_scale_cocycle() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let flat = DescentContext::new(&ctx, &OmegaScale::flat(&base));
        let mut rng = rng_for(31);
        let curved_scale = random_rational_scale(&base, &mut rng);
        let curved = DescentContext::new(&ctx, &curved_scale);
        for (k, w) in [(1usize, 0i64), (2, -2), (2, 1)] {
            let alpha = random_slot(&base, k - 1, &mut rng);
            let mu = random_slot(&base, k, &mut rng);
            let s = GSection::up(k, w, alpha.clone(), mu.clone()).unwrap();
            let phi = flat.inject_up(&s).unwrap();
            let got = curved.extract_up(&phi, w).unwrap();
            let factor = curved.omega_power(w);
            let ups = curved.upsilon();
            let want_alpha = alpha.scale(&factor);
            let want_mu = mu.add(&alpha.wedge1(&ups)).scale(&factor);
            assert!(got.alpha().sub(&want_alpha).is_zero(), "alpha law k={k} w={w}");
            assert!(got.mu().sub(&want_mu).is_zero(), "mu law k={k} w={w}");
        }
    }

    /// Cross-scale extraction of a `Down` representative obeys
    /// `(u, v) -> (e^{s omega} u, e^{(s-2) omega} (v - iota(Upsilon) u))`
    /// with `s` the representative homogeneity.
    #[test]
    fn down_cross_scale_cocycle() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let flat = DescentContext::new(&ctx, &OmegaScale::flat(&base));
        let mut rng = rng_for(37);
        let curved_scale = random_rational_scale(&base, &mut rng);
        let curved = DescentContext::new(&ctx, &curved_scale);
        for (k, w) in [(1usize, 0i64), (2, 0), (2, 2)] {
            let u = random_slot(&base, k, &mut rng);
            let v = random_slot(&base, k - 1, &mut rng);
            let s_pair = GSection::down(k, w, u.clone(), v.clone()).unwrap();
            let phi = flat.inject_down(&s_pair).unwrap();
            let got = curved.extract_down(&phi, w).unwrap();
            let s = curved.down_rep_weight(k, w);
            let ups = curved.upsilon();
            let want_u = u.scale(&curved.omega_power(s));
            let want_v = v
                .sub(&u.contract1(&ups))
                .scale(&curved.omega_power(s - 2));
            assert!(got.u_slot().sub(&want_u).is_zero(), "u law k={k} w={w}");
            assert!(got.v_slot().sub(&want_v).is_zero(), "v law k={k} w={w}");
        }
    }

    /// The ambient exterior derivative intertwines the pair derivative
    /// through injection exactly, at every scale.
    #[test]
    fn d_pair_intertwines_ambient_d() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let mut rng = rng_for(41);
        for (name, scale) in scales(n, 43) {
            let dctx = DescentContext::new(&ctx, &scale);
            for (k, w) in [(0usize, 2i64), (1, 0), (1, -2), (2, 1)] {
                let alpha = if k == 0 {
                    dctx.base().zero_form(0)
                } else {
                    random_slot(dctx.base(), k - 1, &mut rng)
                };
                let mu = random_slot(dctx.base(), k, &mut rng);
                let s = GSection::up(k, w, alpha, mu).unwrap();
                let lhs = dctx.inject_up(&s).unwrap().d();
                let rhs = dctx.inject_up(&dctx.d_pair(&s).unwrap()).unwrap();
                assert!(
                    lhs.sub(&rhs).is_zero(),
                    "d intertwining k={k} w={w} at {name}"
                );
            }
        }
    }

    /// Pair derivative squares to zero and commutes with the canonical
    /// injection: `d_pair . q_inject = q_inject . d`.
    #[test]
    fn d_pair_algebra() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(47);
        let scale = random_poly_scale(&base, &mut rng);
        let dctx = DescentContext::new(&ctx, &scale);
        for (k, w) in [(1usize, 0i64), (2, -1)] {
            let alpha = random_slot(&base, k - 1, &mut rng);
            let mu = random_slot(&base, k, &mut rng);
            let s = GSection::up(k, w, alpha, mu).unwrap();
            let dd = dctx.d_pair(&dctx.d_pair(&s).unwrap()).unwrap();
            assert!(dd.is_zero(), "d_pair^2 k={k} w={w}");
        }
        let mu = random_slot(&base, 1, &mut rng);
        let lhs = dctx.d_pair(&dctx.q_inject(&mu, 0).unwrap()).unwrap();
        let rhs = dctx.q_inject(&base.d(&mu), 0).unwrap();
        assert!(lhs.sub(&rhs).is_zero(), "d_pair through q_inject");
    }

    /// `iota(X)` through injection is the pair map `(alpha, mu) -> (0, alpha)`.
    #[test]
    fn iota_x_through_injection() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let mut rng = rng_for(53);
        for (name, scale) in scales(n, 59) {
            let dctx = DescentContext::new(&ctx, &scale);
            for (k, w) in [(1usize, 0i64), (2, -2)] {
                let alpha = random_slot(dctx.base(), k - 1, &mut rng);
                let mu = random_slot(dctx.base(), k, &mut rng);
                let s = GSection::up(k, w, alpha, mu).unwrap();
                let lhs = dctx.inject_up(&s).unwrap().iota_x();
                let rhs = dctx.inject_up(&dctx.iota_x_pair(&s).unwrap()).unwrap();
                assert!(lhs.sub(&rhs).is_zero(), "iota(X) pair k={k} w={w} at {name}");
            }
        }
    }

    /// `eps(X)` on a `Down` representative extracts to `(0, u)` at the flat
    /// scale, matching the pair-level map.
    #[test]
    fn eps_x_through_injection() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let dctx = DescentContext::new(&ctx, &OmegaScale::flat(&base));
        let mut rng = rng_for(61);
        for (k, w) in [(1usize, 0i64), (2, 1)] {
            let u = random_slot(&base, k, &mut rng);
            let v = random_slot(&base, k - 1, &mut rng);
            let s = GSection::down(k, w, u, v).unwrap();
            let phi = dctx.inject_down(&s).unwrap().eps_x();
            // eps(X) raises the representative homogeneity by two, which the
            // pair bookkeeping absorbs as the same weight label one degree up.
            let got = dctx.extract_down(&phi, w).unwrap();
            let want = dctx.eps_x_pair(&s).unwrap();
            assert!(got.sub(&want).is_zero(), "eps(X) pair k={k} w={w}");
        }
    }

    /// `{iota(X), eps(Y)} = 1` on the quotient family, pair level.
    #[test]
    fn iota_x_eps_y_anticommutator() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(67);
        let scale = random_rational_scale(&base, &mut rng);
        let dctx = DescentContext::new(&ctx, &scale);
        for (k, w) in [(1usize, 0i64), (2, -1)] {
            let alpha = random_slot(&base, k - 1, &mut rng);
            let mu = random_slot(&base, k, &mut rng);
            let s = GSection::up(k, w, alpha, mu).unwrap();
            let a = dctx.iota_x_pair(&dctx.eps_y(&s).unwrap()).unwrap();
            let b = dctx.eps_y(&dctx.iota_x_pair(&s).unwrap()).unwrap();
            assert!(a.add(&b).sub(&s).is_zero(), "anticommutator k={k} w={w}");
        }
    }

    /// The conjugated codifferential agrees with the Levi-Civita
    /// codifferential of the scale at the invariant weight `2k - n`.
    #[test]
    fn delta_conjugated_matches_levi_civita() {
        use crate::tractor::{ScaleContext, WeightedForm};
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(71);
        let scale = random_rational_scale(&base, &mut rng);
        let dctx = DescentContext::new(&ctx, &scale);
        let sctx = ScaleContext::new(scale.clone());
        for k in [1usize, 2, 3] {
            let u = random_slot(&base, k, &mut rng);
            let w = 2 * (k as i64) - (n as i64);
            let mine = dctx.delta_conjugated(&u, k);
            let theirs = sctx
                .delta(&WeightedForm::new(u.clone(), w))
                .into_data();
            assert!(mine.sub(&theirs).is_zero(), "invariant codifferential k={k}");
        }
    }

    /// Pair codifferential against the canonical maps at weight zero:
    /// `q_project . delta_pair = delta_conjugated . q_project`, and the
    /// flat-scale formula has no curvature terms.
    #[test]
    fn delta_pair_q_compatibility() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(73);
        for (name, scale) in scales(n, 79) {
            let dctx = DescentContext::new(&ctx, &scale);
            for k in [1usize, 2] {
                let u = random_slot(&base, k, &mut rng);
                let v = random_slot(&base, k - 1, &mut rng);
                let s = GSection::down(k, 0, u.clone(), v).unwrap();
                let lhs = dctx.q_project(&dctx.delta_pair(&s).unwrap()).unwrap();
                let rhs = dctx.delta_conjugated(&u, k);
                assert!(lhs.sub(&rhs).is_zero(), "q compat k={k} at {name}");
            }
        }
    }

    /// Wedge against the transversal pair: `eps(Y)(alpha, mu) = (mu, 0)` and
    /// `eps(Y)^2 = 0`.
    #[test]
    fn eps_y_pair_laws() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(83);
        let scale = random_poly_scale(&base, &mut rng);
        let dctx = DescentContext::new(&ctx, &scale);
        let alpha = random_slot(&base, 1, &mut rng);
        let mu = random_slot(&base, 2, &mut rng);
        let s = GSection::up(2, -1, alpha, mu.clone()).unwrap();
        let e = dctx.eps_y(&s).unwrap();
        assert!(e.alpha().sub(&mu).is_zero());
        assert!(e.mu().is_zero());
        assert!(dctx.eps_y(&e).unwrap().is_zero(), "eps(Y)^2");
    }

    /// A curved-scale transversal pair written in another trivialization:
    /// wedging with `(1, -Upsilon)` injects to the ambient
    /// `dlog(hat sigma) ^ rep` where `hat sigma = sigma e^{-omega}`.
    #[test]
    fn shifted_transversal_pair_matches_ambient() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(89);
        // Flat ambient carrier; the shifted transversal encodes the scale
        // e^{2 omega} delta written in the flat trivialization.
        let flat = DescentContext::new(&ctx, &OmegaScale::flat(&base));
        let omega_scale = random_rational_scale(&base, &mut rng);
        let curved = DescentContext::new(&ctx, &omega_scale);
        let mu = random_slot(&base, 1, &mut rng);
        // hat Y pair in the flat trivialization: (1, -Upsilon).
        let ups_form = {
            let mut f = base.zero_form(1);
            for i in 0..n {
                f.add_to(1 << i, omega_scale.grads()[i].clone());
            }
            f
        };
        let one = base.scalar_form(ScalarExpr::one(base.vars()));
        let hat_y = GSection::up(1, 0, one, ups_form.neg()).unwrap();
        let s = flat.q_inject(&mu, 0).unwrap();
        let paired = flat.wedge_one(&hat_y, &s).unwrap();
        let lhs = flat.inject_up(&paired).unwrap();
        // Ambient comparison: dlog(hat sigma) ^ pi^* mu where the hatted
        // scale's dlog differs from the flat one by -d(omega . pi).
        let rhs = {
            let mu_amb = flat.ambient().extend(&mu, 0).unwrap();
            let dlog_hat = curved.ambient().dlog_sigma();
            AmbientForm::homogeneous(&ctx, mu_amb.data().wedge1(&dlog_hat), 0).unwrap()
        };
        assert!(lhs.sub(&rhs).is_zero(), "shifted transversal injection");
    }
}
