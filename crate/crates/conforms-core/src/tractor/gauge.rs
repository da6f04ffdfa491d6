//! The Maxwell operator at middle-adjacent degree, its gauge companion, and
//! the critical fourth-order operator on functions they assemble into.
//!
//! On unweighted forms of degree `n/2 - 1` the composite `delta d` is
//! conformally invariant. The companion
//!
//! ```text
//! G u = delta(d delta u) / 2 + delta(J u) - 2 delta(P# u)
//! ```
//!
//! transforms by `G_hat u = G u - iota(Ups) delta d u` and so is invariant on
//! closed forms; it is exactly the bottom slot of the conformal Laplacian
//! applied to the splitting of `u`. At `n = 4` the composite `2 G d` is the
//! fourth-order operator on functions whose flat form is the squared
//! Laplacian.

use crate::forms::{insert_with_sign, letters, remove_with_sign, FormData};
use crate::scalar::rat;

use super::weighted::WeightedForm;
use super::{ScaleContext, TractorError};

/// Schouten endomorphism `(P# v)_{.. a ..} = P_a{}^b v_{.. b ..}` on each
/// letter, indices raised with this scale's metric; weight drops by two.
pub fn p_sharp(ctx: &ScaleContext, v: &WeightedForm) -> WeightedForm {
    let n = ctx.n();
    let mut out = FormData::zero(ctx.vars(), n, v.degree());
    for (mask, comp) in v.data().iter() {
        for c in letters(mask) {
            let Some((rest, s1)) = remove_with_sign(mask, c) else {
                continue;
            };
            for b in 0..n {
                let coeff = ctx.inverse_metric_factor().mul(ctx.schouten(c, b));
                if coeff.is_zero() {
                    continue;
                }
                let Some((tgt, s2)) = insert_with_sign(rest, b) else {
                    continue;
                };
                out.add_to(tgt, coeff.mul(comp).mul_int((s1 * s2) as i64));
            }
        }
    }
    WeightedForm::new(out, v.weight() - 2)
}

fn expect_gauge_input(ctx: &ScaleContext, v: &WeightedForm) -> Result<usize, TractorError> {
    let n = ctx.n();
    if n % 2 != 0 {
        return Err(TractorError::DimensionUnsupported {
            n,
            reason: "gauge operators live at degree n/2 - 1".into(),
        });
    }
    let k = n / 2 - 1;
    if v.degree() != k {
        return Err(TractorError::DegreeMismatch {
            expected: k,
            found: v.degree(),
        });
    }
    if v.weight() != 0 {
        return Err(TractorError::WrongWeight {
            expected: 0,
            found: v.weight(),
        });
    }
    Ok(k)
}

/// The Maxwell operator `delta d` on unweighted forms of degree `n/2 - 1`;
/// conformally invariant into weight `-2`.
pub fn maxwell(ctx: &ScaleContext, v: &WeightedForm) -> Result<WeightedForm, TractorError> {
    expect_gauge_input(ctx, v)?;
    Ok(ctx.delta(&ctx.d(v)))
}

/// The gauge companion `G u = delta(d delta u) / 2 + delta(J u)
/// - 2 delta(P# u)` on unweighted forms of degree `n/2 - 1`, landing in
/// degree `n/2 - 2` and weight `-4`.
pub fn gauge_companion(
    ctx: &ScaleContext,
    v: &WeightedForm,
) -> Result<WeightedForm, TractorError> {
    expect_gauge_input(ctx, v)?;
    let head = ctx
        .delta(&ctx.d(&ctx.delta(v)))
        .scale(&crate::scalar::ScalarExpr::constant(ctx.vars(), rat(1, 2)));
    let jterm = ctx.delta(&WeightedForm::new(v.data().scale(ctx.jay()), v.weight() - 2));
    let pterm = ctx.delta(&p_sharp(ctx, v)).scale_int(-2);
    Ok(head.add(&jterm).add(&pterm))
}

/// The third-order gauge operator `delta(d delta + 2J - 4 P#)` on one-forms
/// at `n = 4`, twice the gauge companion; its kernel is the conformally
/// invariant gauge slice for Maxwell potentials.
pub fn eastwood_singer(
    ctx: &ScaleContext,
    v: &WeightedForm,
) -> Result<WeightedForm, TractorError> {
    let n = ctx.n();
    if n != 4 {
        return Err(TractorError::DimensionUnsupported {
            n,
            reason: "the gauge operator on potentials is specific to n = 4".into(),
        });
    }
    Ok(gauge_companion(ctx, v)?.scale_int(2))
}

/// The critical fourth-order operator on unweighted functions at `n = 4`:
/// `delta(d delta + 2J - 4 P#) d`, twice the gauge companion of the
/// differential. Flat case: the squared coordinate Laplacian.
pub fn paneitz(ctx: &ScaleContext, f: &WeightedForm) -> Result<WeightedForm, TractorError> {
    let n = ctx.n();
    if n != 4 {
        return Err(TractorError::DimensionUnsupported {
            n,
            reason: "the critical fourth-order operator on functions is taken at n = 4".into(),
        });
    }
    if f.degree() != 0 {
        return Err(TractorError::DegreeMismatch {
            expected: 0,
            found: f.degree(),
        });
    }
    if f.weight() != 0 {
        return Err(TractorError::WrongWeight {
            expected: 0,
            found: f.weight(),
        });
    }
    Ok(gauge_companion(ctx, &ctx.d(f))?.scale_int(2))
}

/// Transformation law of the gauge companion between two scales:
/// `G_hat u = r^{-4} (G u - iota(Ups) delta d u)` with the interior product
/// raised in the source scale. Implies invariance on closed forms.
pub fn gauge_companion_transform_holds(
    from: &ScaleContext,
    to: &ScaleContext,
    v: &WeightedForm,
) -> Result<bool, TractorError> {
    let ups: Vec<_> = (0..from.n())
        .map(|a| to.upsilon(a).sub(from.upsilon(a)))
        .collect();
    let rel = to
        .exp_omega()
        .mul(&from.exp_omega().inverse().expect("scale factor is a unit"));
    let lhs = gauge_companion(to, v)?;
    let correction = from.interior(&ups, &maxwell(from, v)?);
    let rhs = gauge_companion(from, v)?.sub(&correction).retrivialized(&rel);
    Ok(lhs == rhs)
}

/// The translation identity pinning the gauge companion: the conformal
/// Laplacian of the splitting of `u` has slots
/// `(0, delta d u | 0, G u)` exactly, in every scale in scope.
pub fn box_of_splitting_translates(
    ctx: &ScaleContext,
    v: &WeightedForm,
) -> Result<bool, TractorError> {
    let k = expect_gauge_input(ctx, v)?;
    let split = ctx.splitting(v)?;
    let boxed = ctx.yamabe_tractor(&split)?;
    let slots = boxed.slots();
    if !slots.alpha.is_zero() {
        return Ok(false);
    }
    if k >= 2 && !slots.phi.is_zero() {
        return Ok(false);
    }
    let dd = maxwell(ctx, v)?;
    if &slots.mu != dd.data() {
        return Ok(false);
    }
    let g = gauge_companion(ctx, v)?;
    Ok(&slots.rho == g.data())
}
