//! Descended operators: ambient pipelines between extension and restriction.
//!
//! A [`DescendedOperator`] wraps an ambient operator together with the source
//! and target weight bookkeeping; applying it extends a base form
//! canonically, runs the pipeline, and restricts. Tangentiality of the
//! pipeline at the source weight makes the result independent of the chosen
//! extension, which is a tested property, never an assumption.
//!
//! The module also provides the two tangential first-order operators built
//! from the Euler calculus (`eps_d_op`, `iota_d_op`, degree-raising and
//! -lowering, both homogeneity `-1`), the descended power Laplacian, the
//! middle operator family `K` between the quotient and subbundle families,
//! and exact residual checks for the identities that drive the operator
//! constructions downstream.

use crate::ambient::sample::rng_for;
use crate::ambient::{AmbientForm, AmbientOp, AmbientOps, Parity};
use crate::base::BaseContext;
use crate::forms::{masks_of_degree, FormData};
use crate::scalar::{rat_int, Poly, QuadricContext, Rat, ScalarExpr};
use crate::tractor::{LinearDiffOp, OpShape};

use super::{DescentContext, FactoryError, GSection, Variance};

/// Degree-raising tangential first-order operator:
/// `d (K(X) - 4) + eps(X) lap`, homogeneity `-1`.
pub fn eps_d_op(ctx: &QuadricContext) -> AmbientOp {
    let ops = AmbientOps::new(ctx);
    let shifted = k_shift_op(ctx, -4);
    ops.d
        .compose(&shifted)
        .add_op("eps(D)", &ops.eps_x.compose(&ops.lap))
}

/// Degree-lowering tangential first-order operator:
/// `-delta (K(X) - 4) + iota(X) lap`, homogeneity `-1`.
pub fn iota_d_op(ctx: &QuadricContext) -> AmbientOp {
    let ops = AmbientOps::new(ctx);
    let shifted = k_shift_op(ctx, -4);
    ops.delta
        .compose(&shifted)
        .scaled(-1)
        .add_op("iota(D)", &ops.iota_x.compose(&ops.lap))
}

/// The shifted Euler multiplier `K(X) + c = n + 2 grad(X) + 2 + c` as a
/// weight-free composition.
fn k_shift_op(ctx: &QuadricContext, c: i64) -> AmbientOp {
    let shift = ctx.n() as i64 + 2 + c;
    AmbientOp::new("K(X) shift", Parity::Even, move |phi| {
        phi.grad_x().scale_int(2).add(&phi.scale_int(shift))
    })
}

/// Pointwise sum of two ambient operators of equal parity.
trait OpSum {
    fn add_op(&self, name: &str, other: &AmbientOp) -> AmbientOp;
}

impl OpSum for AmbientOp {
    fn add_op(&self, name: &str, other: &AmbientOp) -> AmbientOp {
        assert_eq!(self.parity(), other.parity(), "parity mismatch in sum");
        let (a, b) = (self.clone(), other.clone());
        AmbientOp::new(name, self.parity(), move |phi| {
            a.apply(phi).add(&b.apply(phi))
        })
    }
}

/// An ambient pipeline descended to the base: extend, apply, restrict.
pub struct DescendedOperator {
    name: String,
    src: OpShape,
    tgt: OpShape,
    pipeline: AmbientOp,
}

impl DescendedOperator {
    pub fn new(name: &str, src: OpShape, tgt: OpShape, pipeline: AmbientOp) -> Self {
        DescendedOperator {
            name: name.to_owned(),
            src,
            tgt,
            pipeline,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn src(&self) -> OpShape {
        self.src
    }

    pub fn tgt(&self) -> OpShape {
        self.tgt
    }

    pub fn pipeline(&self) -> &AmbientOp {
        &self.pipeline
    }

    /// Extend at the source weight, run the pipeline, restrict.
    pub fn apply(&self, dctx: &DescentContext, mu: &FormData) -> Result<FormData, FactoryError> {
        let ext = dctx.ambient().extend(mu, self.src.weight)?;
        let out = self.pipeline.apply(&ext);
        Ok(dctx.ambient().restrict(&out)?)
    }

    /// The result must not change when the extension is perturbed inside the
    /// cone ideal: compares the descent of `ext` and `ext + Q psi` exactly.
    pub fn extension_independent(
        &self,
        dctx: &DescentContext,
        mu: &FormData,
        psi: &AmbientForm,
    ) -> Result<bool, FactoryError> {
        let ext = dctx.ambient().extend(mu, self.src.weight)?;
        let noisy = ext.add(&psi.q_mul());
        let clean = dctx.ambient().restrict(&self.pipeline.apply(&ext))?;
        let dirty = dctx.ambient().restrict(&self.pipeline.apply(&noisy))?;
        Ok(clean.sub(&dirty).is_zero())
    }

    /// Reconstruct the flat-scale term list by monomial probing. Only defined
    /// at the flat scale, where the descended operator has constant
    /// coefficients.
    pub fn to_diffop(
        &self,
        dctx: &DescentContext,
        max_order: usize,
    ) -> Result<LinearDiffOp, FactoryError> {
        if !dctx.scale().is_flat() {
            return Err(FactoryError::ScaleUnsupported(
                "term-list reconstruction is defined at the flat scale".into(),
            ));
        }
        flat_term_list(dctx.base(), self.src, self.tgt, max_order, &|mu| {
            self.apply(dctx, mu)
        })
    }
}

/// The descended `m`-th Laplacian power on degree-`k` forms, at the unique
/// source weight `m - n/2 + k` where the ambient power is tangential.
pub fn lap_power_descended(ctx: &QuadricContext, m: u32, k: usize) -> DescendedOperator {
    let n = ctx.n() as i64;
    let ops = AmbientOps::new(ctx);
    let w = (m as i64) - n / 2 + (k as i64);
    DescendedOperator::new(
        &format!("lap^{m} deg {k}"),
        OpShape::new(k, w),
        OpShape::new(k, w - 2 * (m as i64)),
        ops.lap.power(m),
    )
}

/// Middle operator of the two-family calculus:
/// `iota(X) lap^{l+1} eps(X)` descended from `G^k[w]` to `G_k[-w]` at the
/// tangential weight `w = l + k - n/2`. The index `l` may be `-1`, for which
/// the Laplacian power is empty.
pub struct KOperator {
    n: usize,
    l: i64,
    k: usize,
    weight: i64,
    pipeline: AmbientOp,
}

/// Build the middle operator, validating the weight relation
/// `w = l + k - n/2`.
pub fn build_k(
    ctx: &QuadricContext,
    l: i64,
    k: usize,
    w: i64,
) -> Result<KOperator, FactoryError> {
    let n = ctx.n();
    if n % 2 != 0 {
        return Err(FactoryError::ScaleUnsupported(format!(
            "the middle operator family needs even dimension, got {n}"
        )));
    }
    if k > n {
        return Err(FactoryError::DegreeOutOfRange { k, n });
    }
    if l < -1 {
        return Err(FactoryError::ScaleUnsupported(format!(
            "Laplacian power {} is negative",
            l + 1
        )));
    }
    let expected = l + k as i64 - n as i64 / 2;
    if w != expected {
        return Err(FactoryError::WeightMismatch {
            expected,
            found: w,
        });
    }
    let ops = AmbientOps::new(ctx);
    let pipeline = ops
        .iota_x
        .compose(&ops.lap.power((l + 1) as u32))
        .compose(&ops.eps_x);
    Ok(KOperator {
        n,
        l,
        k,
        weight: w,
        pipeline,
    })
}

impl KOperator {
    pub fn ell(&self) -> i64 {
        self.l
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    /// Source weight `l + k - n/2`; the target weight is its negative.
    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn pipeline(&self) -> &AmbientOp {
        &self.pipeline
    }

    /// Raw pipeline on an ambient representative.
    pub fn apply_ambient(&self, phi: &AmbientForm) -> AmbientForm {
        self.pipeline.apply(phi)
    }

    /// Pair-level action `G^k[w] -> G_k[-w]`.
    pub fn apply(
        &self,
        dctx: &DescentContext,
        s: &GSection,
    ) -> Result<GSection, FactoryError> {
        if s.variance() != Variance::Up {
            return Err(FactoryError::VarianceMismatch { expected: "up" });
        }
        if s.degree() != self.k {
            return Err(FactoryError::DegreeOutOfRange {
                k: s.degree(),
                n: self.n,
            });
        }
        if s.weight() != self.weight {
            return Err(FactoryError::WeightMismatch {
                expected: self.weight,
                found: s.weight(),
            });
        }
        let rep = dctx.inject_up(s)?;
        let out = self.apply_ambient(&rep);
        dctx.extract_down(&out, -self.weight)
    }
}

/// Residual of the raising identity
/// `eps(X) K_l = 2 (l + 1) K_{l-1} d` on `G^k[w]`, `w = l + k - n/2`,
/// extracted to a subbundle pair of degree `k + 1`. Zero iff the identity
/// holds for this section.
pub fn key_raising_residual(
    dctx: &DescentContext,
    l: i64,
    k: usize,
    s: &GSection,
) -> Result<GSection, FactoryError> {
    let ctx = dctx.ctx();
    let k_l = build_k(ctx, l, k, s.weight())?;
    let k_lower = build_k(ctx, l - 1, k + 1, s.weight())?;
    let rep = dctx.inject_up(s)?;
    let lhs_amb = k_l.apply_ambient(&rep).eps_x();
    let rhs_amb = k_lower.apply_ambient(&rep.d());
    let lhs = dctx.extract_down(&lhs_amb, -s.weight())?;
    let rhs = dctx.extract_down(&rhs_amb, -s.weight())?;
    Ok(lhs.sub(&rhs.scale_int(2 * (l + 1))))
}

/// Residual of the lowering identity
/// `K_{l+1} iota(X) = 2 (l + 2) delta_pair K_l` on `G^k[w]`,
/// `w = l + k - n/2`, extracted to a subbundle pair of degree `k - 1`.
/// This is the check that pins the pair-level codifferential.
pub fn key_lowering_residual(
    dctx: &DescentContext,
    l: i64,
    k: usize,
    s: &GSection,
) -> Result<GSection, FactoryError> {
    let ctx = dctx.ctx();
    let k_upper = build_k(ctx, l + 1, k - 1, s.weight())?;
    let k_l = build_k(ctx, l, k, s.weight())?;
    let rep = dctx.inject_up(s)?;
    let lhs_amb = k_upper.apply_ambient(&rep.iota_x());
    let lhs = dctx.extract_down(&lhs_amb, -s.weight())?;
    let rhs = dctx.delta_pair(&k_l.apply(dctx, s)?)?;
    Ok(lhs.sub(&rhs.scale_int(2 * (l + 2))))
}

/// Residual of the degree-raising intertwining at homogeneity
/// `l - n/2 + 1` componentwise: `lap^l eps_d - eps(X) lap^{l+1}` applied to
/// a form of matching homogeneity. An exact ambient identity.
pub fn domino_raising_residual(
    ctx: &QuadricContext,
    l: u32,
    phi: &AmbientForm,
) -> AmbientForm {
    let ops = AmbientOps::new(ctx);
    let lhs = ops.lap.power(l).apply(&eps_d_op(ctx).apply(phi));
    let rhs = ops.lap.power(l + 1).apply(phi).eps_x();
    lhs.sub(&rhs)
}

/// Residual of the degree-lowering intertwining at homogeneity `l - n/2`
/// componentwise: `iota_d lap^l - lap^{l+1} iota(X)`.
pub fn domino_lowering_residual(
    ctx: &QuadricContext,
    l: u32,
    phi: &AmbientForm,
) -> AmbientForm {
    let ops = AmbientOps::new(ctx);
    let lhs = iota_d_op(ctx).apply(&ops.lap.power(l).apply(phi));
    let rhs = ops.lap.power(l + 1).apply(&phi.iota_x());
    lhs.sub(&rhs)
}

/// The descended second-order operator on functions at the critical weight
/// agrees with the curvature-corrected term list of the scale.
pub fn yamabe_matches_descent(dctx: &DescentContext, seed: u64) -> Result<bool, FactoryError> {
    use crate::tractor::ScaleContext;
    let n = dctx.n();
    let ctx = dctx.ctx();
    let op = lap_power_descended(ctx, 1, 0);
    let sctx = ScaleContext::new(dctx.scale().clone());
    let oracle = crate::tractor::diffop::yamabe_op(&sctx);
    let mut rng = rng_for(seed);
    let f = crate::tractor::sample::random_base_poly(dctx.base(), 3, &mut rng);
    let f_form = dctx.base().scalar_form(ScalarExpr::from_poly(f));
    let mine = op.apply(dctx, &f_form)?;
    let theirs = oracle.apply_data(&f_form);
    let _ = n;
    Ok(mine.sub(&theirs).is_zero())
}

/// All multi-indices over `n` coordinates of total degree at most `max`.
fn multi_indices(n: usize, max: usize) -> Vec<Vec<u16>> {
    let mut out = vec![vec![0u16; n]];
    for i in 0..n {
        let mut next = Vec::new();
        for alpha in &out {
            let used: usize = alpha.iter().map(|&a| a as usize).sum();
            for v in 0..=(max - used) {
                let mut b = alpha.clone();
                b[i] = v as u16;
                next.push(b);
            }
        }
        out = next;
    }
    out
}

fn factorial(alpha: &[u16]) -> Rat {
    let mut acc = rat_int(1);
    for &a in alpha {
        for j in 2..=(a as i64) {
            acc = &acc * &rat_int(j);
        }
    }
    acc
}

/// Value of a base expression at the origin (parameters kept).
fn eval_at_origin(base: &BaseContext, e: &ScalarExpr) -> Result<Rat, FactoryError> {
    let vars = base.vars();
    let mut images: Vec<ScalarExpr> = (0..base.n()).map(|_| ScalarExpr::int(vars, 0)).collect();
    for pname in vars.param_names() {
        let idx = vars.index_of(pname).expect("own parameter");
        images.push(ScalarExpr::var(vars, idx));
    }
    let at0 = e.substitute(vars, &images, None)?;
    at0.as_rat_const().ok_or_else(|| {
        FactoryError::ScaleUnsupported("probe value is not a rational constant".into())
    })
}

/// Reconstruct the term list of a constant-coefficient operator on base
/// forms by monomial probing: the coefficient of `partial^alpha` routing
/// component `I` to `J` is the origin value of `op(y^alpha e_I)_J / alpha!`.
/// The reconstruction is verified against a random polynomial input.
pub fn flat_term_list(
    base: &BaseContext,
    src: OpShape,
    tgt: OpShape,
    max_order: usize,
    op: &dyn Fn(&FormData) -> Result<FormData, FactoryError>,
) -> Result<LinearDiffOp, FactoryError> {
    let n = base.n();
    let vars = base.vars();
    let mut raw = Vec::new();
    for src_mask in masks_of_degree(n, src.degree) {
        for alpha in multi_indices(n, max_order) {
            let mono = Poly::monomial(vars, rat_int(1), &alpha);
            let mut input = base.zero_form(src.degree);
            input.add_to(src_mask, ScalarExpr::from_poly(mono));
            let out = op(&input)?;
            let fact = factorial(&alpha);
            for (tgt_mask, comp) in out.iter() {
                let val = eval_at_origin(base, comp)?;
                if num_traits::Zero::is_zero(&val) {
                    continue;
                }
                let coeff = &val / &fact;
                raw.push((
                    src_mask,
                    tgt_mask,
                    alpha.clone(),
                    ScalarExpr::constant(vars, coeff),
                ));
            }
        }
    }
    let diffop = LinearDiffOp::from_terms(vars, n, src, tgt, raw);
    // Residual check: the reconstruction reproduces the operator on a random
    // polynomial input, which fails if the operator is not constant
    // coefficient or exceeds the probed order.
    let mut rng = rng_for(0x7e57);
    let mut probe = base.zero_form(src.degree);
    for mask in masks_of_degree(n, src.degree) {
        let p = crate::tractor::sample::random_base_poly(base, 3, &mut rng);
        probe.add_to(mask, ScalarExpr::from_poly(p));
    }
    let direct = op(&probe)?;
    let via_terms = diffop.apply_data(&probe);
    if !direct.sub(&via_terms).is_zero() {
        return Err(FactoryError::ScaleUnsupported(
            "term-list reconstruction does not reproduce the operator".into(),
        ));
    }
    Ok(diffop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;
    use crate::ambient::sample::{random_homogeneous_form, random_polynomial_form};
    use crate::ambient::scale::OmegaScale;
    use crate::tractor::sample::{random_poly_scale, random_rational_scale};

    fn random_slot(base: &BaseContext, degree: usize, rng: &mut ChaCha20Rng) -> FormData {
        let mut out = base.zero_form(degree);
        for mask in masks_of_degree(base.n(), degree) {
            let p = crate::tractor::sample::random_base_poly(base, 2, rng);
            out.add_to(mask, ScalarExpr::from_poly(p));
        }
        out
    }

    fn random_up(
        base: &BaseContext,
        k: usize,
        w: i64,
        rng: &mut ChaCha20Rng,
    ) -> GSection {
        let alpha = if k == 0 {
            base.zero_form(0)
        } else {
            random_slot(base, k - 1, rng)
        };
        let mu = random_slot(base, k, rng);
        GSection::up(k, w, alpha, mu).unwrap()
    }

    /// The two presentations of the degree-raising first-order operator
    /// agree on arbitrary forms: `d (K(X) - 4) + eps(X) lap` equals
    /// `K(X) d + lap eps(X)`.
    #[test]
    fn raising_operator_alternative_form() {
        for n in [4usize, 6] {
            let ctx = QuadricContext::new(n).unwrap();
            let mut rng = rng_for(101 + n as u64);
            for k in [0usize, 1, 2] {
                let phi = random_polynomial_form(&ctx, k, 2, &mut rng);
                let lhs = eps_d_op(&ctx).apply(&phi);
                let rhs = phi.d().k_x().add(&phi.eps_x().lap());
                assert!(lhs.sub(&rhs).is_zero(), "alt form n={n} k={k}");
            }
        }
    }

    /// Nilpotency and anticommutation of the first-order pair, as identities
    /// on arbitrary forms: `iota_d^2 = 0`, `eps_d^2 = 0`,
    /// `{iota_d, eps_d} = 0`.
    #[test]
    fn first_order_pair_nilpotent() {
        let ctx = QuadricContext::new(4).unwrap();
        let mut rng = rng_for(103);
        let e = eps_d_op(&ctx);
        let i = iota_d_op(&ctx);
        for k in [1usize, 2] {
            let phi = random_polynomial_form(&ctx, k, 2, &mut rng);
            assert!(e.apply(&e.apply(&phi)).is_zero(), "eps_d^2 k={k}");
            assert!(i.apply(&i.apply(&phi)).is_zero(), "iota_d^2 k={k}");
            let anti = e.apply(&i.apply(&phi)).add(&i.apply(&e.apply(&phi)));
            assert!(anti.is_zero(), "anticommutator k={k}");
        }
    }

    /// `[iota_d, Q] = -4 Q delta` on arbitrary forms.
    #[test]
    fn lowering_operator_cone_bracket() {
        let ctx = QuadricContext::new(4).unwrap();
        let mut rng = rng_for(107);
        let i = iota_d_op(&ctx);
        for k in [1usize, 2, 3] {
            let phi = random_polynomial_form(&ctx, k, 2, &mut rng);
            let bracket = i.apply(&phi.q_mul()).sub(&i.apply(&phi).q_mul());
            let want = phi.delta().q_mul().scale_int(-4);
            assert!(bracket.sub(&want).is_zero(), "bracket k={k}");
        }
    }

    /// The first-order pair is tangential at every homogeneity: images of
    /// the cone ideal stay in the cone ideal.
    #[test]
    fn first_order_pair_tangential_all_weights() {
        let ctx = QuadricContext::new(4).unwrap();
        let mut rng = rng_for(109);
        let e = eps_d_op(&ctx);
        let i = iota_d_op(&ctx);
        for w in [-3i64, -1, 0, 2, 4] {
            let psi = random_homogeneous_form(&ctx, 1, w, &mut rng);
            let qpsi = psi.q_mul();
            assert!(
                e.apply(&qpsi).is_in_quadric_ideal().unwrap(),
                "eps_d at weight {w}"
            );
            assert!(
                i.apply(&qpsi).is_in_quadric_ideal().unwrap(),
                "iota_d at weight {w}"
            );
        }
    }

    /// The power Laplacian is tangential exactly at componentwise weight
    /// `m - n/2` and at no other tested offset.
    #[test]
    fn lap_power_tangential_weight_window() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let mut rng = rng_for(113);
        let ops = AmbientOps::new(&ctx);
        for m in [1u32, 2, 3] {
            let k = 1usize;
            // Q psi must sit at componentwise m - n/2, so psi sits two lower.
            let good = (m as i64) - (n as i64) / 2 + (k as i64) - 2;
            for offset in [-2i64, -1, 0, 1, 2] {
                if offset == 0 {
                    let psi = random_homogeneous_form(&ctx, k, good, &mut rng);
                    let image = ops.lap.power(m).apply(&psi.q_mul());
                    assert!(
                        image.is_in_quadric_ideal().unwrap(),
                        "m={m} at the critical weight"
                    );
                    continue;
                }
                // Off the window the image is a nonzero multiple of
                // lap^{m-1} psi mod Q, so the control needs a witness whose
                // iterated Laplacian survives modulo the cone. Spatial-only
                // components do, since the ideal forces a plus factor.
                let w = good + offset;
                let comp = ScalarExpr::from_poly(Poly::monomial(
                    ctx.vars(),
                    Rat::from_integer(1.into()),
                    &{
                        let mut e = vec![0u16; ctx.dim()];
                        e[ctx.idx_spatial(0)] = 1;
                        e
                    },
                ))
                .pow(w + 1)
                .unwrap()
                .mul(
                    &ScalarExpr::from_poly(Poly::monomial(
                        ctx.vars(),
                        Rat::from_integer(1.into()),
                        &{
                            let mut e = vec![0u16; ctx.dim()];
                            e[ctx.idx_spatial(1)] = 1;
                            e
                        },
                    ))
                    .pow(-2)
                    .unwrap(),
                );
                let mut data = FormData::zero(ctx.vars(), ctx.dim(), k);
                data.add_to(1 << ctx.idx_spatial(0), comp);
                let psi = AmbientForm::homogeneous(&ctx, data, w).unwrap();
                let surviving = ops.lap.power(m - 1).apply(&psi);
                assert!(
                    !surviving.is_in_quadric_ideal().unwrap(),
                    "witness must survive m={m} offset {offset}"
                );
                let image = ops.lap.power(m).apply(&psi.q_mul());
                assert!(
                    !image.is_in_quadric_ideal().unwrap(),
                    "m={m} offset {offset} should fail"
                );
            }
        }
    }

    /// Degree-raising intertwining for `l = 0, 1, 2` at `n = 4` and a spot
    /// check at `n = 6`, both sides exact ambient forms.
    #[test]
    fn domino_raising() {
        let cases: [(usize, &[u32]); 2] = [(4, &[0, 1, 2]), (6, &[1])];
        for (n, ls) in cases {
            let ctx = QuadricContext::new(n).unwrap();
            let mut rng = rng_for(127 + n as u64);
            for &l in ls {
                for k in [0usize, 1, 2] {
                    let w = (l as i64) - (n as i64) / 2 + 1 + (k as i64);
                    let phi = random_homogeneous_form(&ctx, k, w, &mut rng);
                    let res = domino_raising_residual(&ctx, l, &phi);
                    assert!(res.is_zero(), "raising n={n} l={l} k={k}");
                }
            }
        }
    }

    /// Degree-lowering intertwining for `l = 0, 1, 2` at `n = 4` and a spot
    /// check at `n = 6`.
    #[test]
    fn domino_lowering() {
        let cases: [(usize, &[u32]); 2] = [(4, &[0, 1, 2]), (6, &[1])];
        for (n, ls) in cases {
            let ctx = QuadricContext::new(n).unwrap();
            let mut rng = rng_for(131 + n as u64);
            for &l in ls {
                for k in [1usize, 2] {
                    let w = (l as i64) - (n as i64) / 2 + (k as i64);
                    let phi = random_homogeneous_form(&ctx, k, w, &mut rng);
                    let res = domino_lowering_residual(&ctx, l, &phi);
                    assert!(res.is_zero(), "lowering n={n} l={l} k={k}");
                }
            }
        }
    }

    /// The middle operator kills both junk directions of the quotient
    /// presentation: the cone ideal and the image of `eps(X)`.
    #[test]
    fn middle_operator_kills_junk() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(137);
        let scale = random_rational_scale(&base, &mut rng);
        let dctx = DescentContext::new(&ctx, &scale);
        for (l, k) in [(1i64, 1usize), (2, 0)] {
            let w = l + k as i64 - (n as i64) / 2;
            let kop = build_k(&ctx, l, k, w).unwrap();
            // Q-junk at matching homogeneity.
            let qpsi = random_homogeneous_form(&ctx, k, w - 2, &mut rng)
                .q_mul();
            let out = dctx.extract_down(&kop.apply_ambient(&qpsi), -w).unwrap();
            assert!(out.is_zero(), "cone ideal junk l={l} k={k}");
            // eps(X)-junk at matching homogeneity.
            if k >= 1 {
                let chi = random_homogeneous_form(&ctx, k - 1, w - 2, &mut rng);
                let out = dctx
                    .extract_down(&kop.apply_ambient(&chi.eps_x()), -w)
                    .unwrap();
                assert!(out.is_zero(), "eps(X) junk l={l} k={k}");
            }
        }
    }

    /// Raising identity `eps(X) K_l = 2 (l + 1) K_{l-1} d` on random pairs,
    /// flat and curved scales, natural and shifted weights.
    #[test]
    fn key_raising_identity() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(139);
        let scales = vec![
            OmegaScale::flat(&base),
            random_rational_scale(&base, &mut rng),
        ];
        for scale in &scales {
            let dctx = DescentContext::new(&ctx, scale);
            for (l, k) in [(2i64, 0usize), (1, 1), (0, 2), (1, 0), (2, 1)] {
                let w = l + k as i64 - (n as i64) / 2;
                let s = random_up(&base, k, w, &mut rng);
                let res = key_raising_residual(&dctx, l, k, &s).unwrap();
                assert!(res.is_zero(), "raising l={l} k={k} w={w}");
            }
        }
    }

    /// Lowering identity `K_{l+1} iota(X) = 2 (l + 2) delta_pair K_l` on
    /// random pairs, flat and curved scales, natural and shifted weights.
    /// This pins the pair-level codifferential including its cross term.
    #[test]
    fn key_lowering_identity() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(149);
        let scales = vec![
            OmegaScale::flat(&base),
            random_rational_scale(&base, &mut rng),
        ];
        for scale in &scales {
            let dctx = DescentContext::new(&ctx, scale);
            for (l, k) in [(1i64, 1usize), (0, 2), (2, 1), (1, 2)] {
                let w = l + k as i64 - (n as i64) / 2;
                let s = random_up(&base, k, w, &mut rng);
                let res = key_lowering_residual(&dctx, l, k, &s).unwrap();
                assert!(res.is_zero(), "lowering l={l} k={k} w={w}");
            }
        }
    }

    /// Cross-module check: the descended critical Laplacian on functions
    /// equals the curvature-corrected second-order term list, at the flat
    /// scale, a polynomial scale, and the round one.
    #[test]
    fn yamabe_cross_module() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(151);
        let scales = vec![
            OmegaScale::flat(&base),
            random_poly_scale(&base, &mut rng),
            OmegaScale::round_sphere(&base),
        ];
        for scale in scales {
            let dctx = DescentContext::new(&ctx, &scale);
            assert!(
                yamabe_matches_descent(&dctx, 157).unwrap(),
                "yamabe at a scale"
            );
        }
    }

    /// Extension independence of the descended power Laplacian at its
    /// critical weight.
    #[test]
    fn lap_power_extension_independent() {
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let mut rng = rng_for(163);
        let scale = random_rational_scale(&base, &mut rng);
        let dctx = DescentContext::new(&ctx, &scale);
        for (m, k) in [(1u32, 0usize), (2, 0), (2, 1)] {
            let op = lap_power_descended(&ctx, m, k);
            let mu = random_slot(&base, k, &mut rng);
            let psi = random_homogeneous_form(&ctx, k, op.src().weight - 2, &mut rng);
            assert!(
                op.extension_independent(&dctx, &mu, &psi).unwrap(),
                "m={m} k={k}"
            );
        }
    }

    /// Term-list reconstruction of the flat descended Laplacian on functions
    /// matches the flat second-order oracle.
    #[test]
    fn flat_reconstruction_matches_oracle() {
        use crate::tractor::ScaleContext;
        let n = 4;
        let ctx = QuadricContext::new(n).unwrap();
        let base = BaseContext::new(n);
        let dctx = DescentContext::new(&ctx, &OmegaScale::flat(&base));
        let op = lap_power_descended(&ctx, 1, 0);
        let mine = op.to_diffop(&dctx, 2).unwrap();
        let sctx = ScaleContext::new(OmegaScale::flat(&base));
        let oracle = crate::tractor::diffop::yamabe_op(&sctx);
        assert!(mine.terms_equal(&oracle), "flat critical Laplacian terms");
    }
}
