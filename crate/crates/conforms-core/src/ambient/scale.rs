//! Conformal scales and the extension/restriction maps between weighted base
//! forms and homogeneous cone forms.
//!
//! A scale is the choice `e^omega` of conformal factor on the base; the
//! rescaled metric is `e^{2 omega}` times the flat one. On the cone the scale
//! determines the degree-one function `sigma = xp e^{-omega . pi}` (projection
//! `pi(x)^i = x^i / xp`) and the section `y -> (e^omega, e^omega y,
//! -e^omega |y|^2 / 2)` on which `sigma = 1`.
//!
//! Extension sends a base `k`-form `mu` to `sigma^w pi^* mu`, the homogeneous
//! representative of weight `w`; restriction pulls an ambient form back along
//! the section. Restriction after extension is the identity, and restriction
//! kills every multiple of the quadric and of `sigma`'s defining relation.

use std::sync::Arc;

use crate::base::BaseContext;
use crate::forms::FormData;
use crate::scalar::{FactorSpec, Poly, QuadricContext, Rat, ScalarExpr, VarTable};

use super::{AmbientError, AmbientForm};

/// A conformal scale on the base: the value of `e^omega` together with the
/// gradient of `omega`. The value is either a rational expression or a single
/// power of a declared formal factor; in both cases
/// `d(e^omega) = e^omega d omega` holds exactly.
#[derive(Clone)]
pub struct OmegaScale {
    base: BaseContext,
    exp_omega: ScalarExpr,
    grad: Vec<ScalarExpr>,
}

impl OmegaScale {
    /// The flat scale `omega = 0`.
    pub fn flat(base: &BaseContext) -> Self {
        let grad = vec![ScalarExpr::zero(base.vars()); base.n()];
        OmegaScale {
            base: base.clone(),
            exp_omega: ScalarExpr::one(base.vars()),
            grad,
        }
    }

    /// A polynomial `omega`; `e^omega` becomes a formal factor with gradient
    /// `d omega`.
    pub fn from_omega_poly(base: &BaseContext, omega: &Poly) -> Self {
        assert!(
            Arc::ptr_eq(omega.vars(), base.vars()) || omega.vars() == base.vars(),
            "omega must live over the base table"
        );
        let grad: Vec<ScalarExpr> = (0..base.n())
            .map(|a| ScalarExpr::from_poly(omega.derivative(a)))
            .collect();
        let spec = FactorSpec::new("exp_omega", base.vars(), grad.clone());
        OmegaScale {
            base: base.clone(),
            exp_omega: ScalarExpr::factor_power_of(&spec, 1),
            grad,
        }
    }

    /// A rational, everywhere-positive-on-paper value of `e^omega`; the
    /// gradient is computed as `d(e^omega) / e^omega`.
    pub fn from_rational(base: &BaseContext, exp_omega: ScalarExpr) -> Self {
        assert!(!exp_omega.is_zero(), "e^omega must be invertible");
        let inv = exp_omega.inverse().expect("e^omega must be invertible");
        let grad: Vec<ScalarExpr> = (0..base.n())
            .map(|a| exp_omega.partial_derivative(a).mul(&inv))
            .collect();
        OmegaScale {
            base: base.clone(),
            exp_omega,
            grad,
        }
    }

    /// Assemble a scale from an explicit value and gradient. The caller
    /// asserts `d(e^omega) = e^omega d omega`; used for products of scales
    /// where at most one factor is formal.
    pub fn from_parts(base: &BaseContext, exp_omega: ScalarExpr, grad: Vec<ScalarExpr>) -> Self {
        assert!(!exp_omega.is_zero(), "e^omega must be invertible");
        assert_eq!(grad.len(), base.n(), "one gradient component per coordinate");
        OmegaScale {
            base: base.clone(),
            exp_omega,
            grad,
        }
    }

    /// The round-sphere scale `e^omega = 2 / (1 + |y|^2)` (stereographic
    /// pullback of the unit-sphere metric).
    pub fn round_sphere(base: &BaseContext) -> Self {
        let one_plus = Poly::one(base.vars()).add(&base.norm_sq());
        let exp_omega = ScalarExpr::fraction(Poly::int(base.vars(), 2), one_plus);
        Self::from_rational(base, exp_omega)
    }

    pub fn base(&self) -> &BaseContext {
        &self.base
    }

    pub fn exp_omega(&self) -> &ScalarExpr {
        &self.exp_omega
    }

    /// `Upsilon_a = d_a omega`.
    pub fn grad(&self, a: usize) -> &ScalarExpr {
        &self.grad[a]
    }

    pub fn grads(&self) -> &[ScalarExpr] {
        &self.grad
    }

    pub fn is_flat(&self) -> bool {
        self.exp_omega.is_one()
    }
}

/// Pullback of a form along a smooth map given by coordinate images:
/// `(F^* phi) = sum_I (phi_I . F) dF^{i_1} ^ .. ^ dF^{i_k}`.
pub fn pullback(
    form: &FormData,
    target: &Arc<VarTable>,
    target_dim: usize,
    images: &[ScalarExpr],
    factor_image: Option<&ScalarExpr>,
) -> Result<FormData, crate::scalar::ScalarError> {
    assert_eq!(
        images.len(),
        form.vars().len(),
        "one image per source variable"
    );
    let d_images: Vec<Vec<ScalarExpr>> = images[..form.dim()]
        .iter()
        .map(|img| {
            (0..target_dim)
                .map(|a| img.partial_derivative(a))
                .collect()
        })
        .collect();
    let mut out = FormData::zero(target, target_dim, form.degree());
    for (mask, f) in form.iter() {
        let val = f.substitute(target, images, factor_image)?;
        if val.is_zero() {
            continue;
        }
        let mut acc = FormData::zero(target, target_dim, 0);
        acc.set(0, val);
        // Wedge dF^{i_k} first so the factors end up in ascending order.
        for letter in crate::forms::letters(mask).collect::<Vec<_>>().into_iter().rev() {
            acc = acc.wedge1(&d_images[letter]);
        }
        out = out.add(&acc);
    }
    Ok(out)
}

/// The scale carried to the cone: `pi`-pullback data and the section map.
pub struct AmbientScale {
    ctx: QuadricContext,
    scale: OmegaScale,
    /// `e^{omega . pi}` over the ambient table.
    exp_omega_amb: ScalarExpr,
    /// `d_a(omega . pi)` over the ambient table.
    grad_amb: Vec<ScalarExpr>,
    /// `pi` coordinate images `x^i / xp`.
    pi_images: Vec<ScalarExpr>,
}

impl AmbientScale {
    pub fn new(ctx: &QuadricContext, scale: &OmegaScale) -> Self {
        assert_eq!(ctx.n(), scale.base().n(), "dimension mismatch");
        let av = ctx.vars();
        let xp = Poly::var(av, ctx.idx_plus());
        let pi_images: Vec<ScalarExpr> = (1..=ctx.n())
            .map(|i| {
                ScalarExpr::fraction(Poly::var(av, ctx.idx_spatial(i)), xp.clone())
            })
            .collect();
        // Chain rule: d_a(omega . pi) = sum_i (d_i omega)(pi) d_a pi^i.
        let full_pi = padded_images(scale.base().vars(), av, &pi_images);
        let base_grad_amb: Vec<ScalarExpr> = scale
            .grads()
            .iter()
            .map(|g| {
                g.substitute(av, &full_pi, None)
                    .expect("pi-substitution of the gradient")
            })
            .collect();
        let mut grad_amb: Vec<ScalarExpr> = Vec::with_capacity(ctx.dim());
        for a in 0..ctx.dim() {
            let mut acc = ScalarExpr::zero(av);
            for (i, g) in base_grad_amb.iter().enumerate() {
                let dpi = pi_images[i].partial_derivative(a);
                acc = acc.add(&g.mul(&dpi));
            }
            grad_amb.push(acc);
        }
        let exp_omega_amb = if scale.exp_omega().factor().is_some() {
            let spec = FactorSpec::new("exp_omega_pi", av, grad_amb.clone());
            ScalarExpr::factor_power_of(&spec, 1)
        } else {
            scale
                .exp_omega()
                .substitute(av, &full_pi, None)
                .expect("pi-substitution of e^omega")
        };
        AmbientScale {
            ctx: ctx.clone(),
            scale: scale.clone(),
            exp_omega_amb,
            grad_amb,
            pi_images,
        }
    }

    pub fn ctx(&self) -> &QuadricContext {
        &self.ctx
    }

    pub fn scale(&self) -> &OmegaScale {
        &self.scale
    }

    pub fn base(&self) -> &BaseContext {
        self.scale.base()
    }

    pub fn exp_omega_amb(&self) -> &ScalarExpr {
        &self.exp_omega_amb
    }

    /// `sigma = xp e^{-omega . pi}`, the degree-one scale function.
    pub fn sigma(&self) -> ScalarExpr {
        let xp = ScalarExpr::var(self.ctx.vars(), self.ctx.idx_plus());
        xp.mul(&self.exp_omega_amb.inverse().expect("e^omega is a unit"))
    }

    /// Components of `d sigma / sigma = dxp / xp - d(omega . pi)`.
    pub fn dlog_sigma(&self) -> Vec<ScalarExpr> {
        let av = self.ctx.vars();
        let mut out = Vec::with_capacity(self.ctx.dim());
        for a in 0..self.ctx.dim() {
            let mut v = self.grad_amb[a].neg();
            if a == self.ctx.idx_plus() {
                let inv_xp = ScalarExpr::fraction(
                    Poly::one(av),
                    Poly::var(av, self.ctx.idx_plus()),
                );
                v = v.add(&inv_xp);
            }
            out.push(v);
        }
        out
    }

    /// Section images over the base table: `xp = e^omega,
    /// x^i = e^omega y^i, xm = -e^omega |y|^2 / 2`, padded with the images of
    /// any ambient parameters (same-named base parameters).
    pub fn section_images(&self) -> Vec<ScalarExpr> {
        let e = self.scale.exp_omega().clone();
        let mut images = Vec::with_capacity(self.ctx.dim());
        images.push(e.clone());
        for i in 1..=self.ctx.n() {
            images.push(e.mul(&self.base().coord(i)));
        }
        let half_norm = ScalarExpr::from_poly(self.base().norm_sq())
            .mul_rat(&Rat::new((-1).into(), 2.into()));
        images.push(e.mul(&half_norm));
        padded_images(self.ctx.vars(), self.base().vars(), &images)
    }

    /// Extension: `sigma^w pi^* mu`, the canonical homogeneous representative
    /// of a weighted base form. The result is verified homogeneous of weight
    /// `w`.
    pub fn extend(&self, mu: &FormData, w: i64) -> Result<AmbientForm, AmbientError> {
        assert_eq!(mu.dim(), self.ctx.n(), "base form letter count");
        let av = self.ctx.vars();
        let full_pi = padded_images(self.base().vars(), av, &self.pi_images);
        let pulled = pullback(mu, av, self.ctx.dim(), &full_pi, None)?;
        let sigma_w = self.sigma().pow(w)?;
        let data = pulled.scale(&sigma_w);
        AmbientForm::homogeneous(&self.ctx, data, w)
    }

    /// Restriction: pullback along the section. The ambient factor (when one
    /// occurs) is `e^{omega . pi}`, whose section value is `e^omega`.
    pub fn restrict(&self, phi: &AmbientForm) -> Result<FormData, AmbientError> {
        self.restrict_with(phi, Some(self.scale.exp_omega().clone()))
    }

    /// Restriction with an explicit section value for the ambient factor
    /// (`None` requires a factor-free form). Used by the continuation route,
    /// whose factor `sigma^w` restricts to 1.
    pub fn restrict_with(
        &self,
        phi: &AmbientForm,
        factor_image: Option<ScalarExpr>,
    ) -> Result<FormData, AmbientError> {
        let images = self.section_images();
        let out = pullback(
            phi.data(),
            self.base().vars(),
            self.ctx.n(),
            &images,
            factor_image.as_ref(),
        )?;
        Ok(out)
    }
}

/// Images for every variable of `source` inside `target`: the given
/// coordinate images followed by one entry per source parameter, mapped to
/// the target parameter of the same name.
fn padded_images(
    source: &Arc<VarTable>,
    target: &Arc<VarTable>,
    coord_images: &[ScalarExpr],
) -> Vec<ScalarExpr> {
    assert_eq!(coord_images.len(), source.n_coords());
    let mut images = coord_images.to_vec();
    for pname in source.param_names() {
        let idx = target
            .index_of(pname)
            .unwrap_or_else(|| panic!("target table lacks parameter `{pname}`"));
        images.push(ScalarExpr::var(target, idx));
    }
    images
}
