//! Linear differential operators between weighted form spaces as explicit
//! term lists: each term routes one source component to one target component
//! through a coefficient times a coordinate multi-derivative. The list form
//! supports composition by the Leibniz rule, formal adjoints with respect to
//! the plain coordinate pairing, and principal symbols over a fresh
//! xi-alphabet.
//!
//! Symbol convention: the raw symbol substitutes `partial^alpha -> xi^alpha`
//! and keeps only top-order terms; the reported matrix carries the extra
//! factor `(-1)^{floor(m/2)}` from `partial -> i xi` for an operator of
//! order `m`, plus an `imaginary` flag when `m` is odd. With that
//! bookkeeping the symbol is multiplicative under composition and the
//! pairing identity relating the differential and the codifferential holds
//! as a transpose at the symbol level.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::forms::{insert_with_sign, letters, masks_of_degree, remove_with_sign, FormData};
use crate::scalar::{rat, Poly, Rat, ScalarExpr, VarTable};

use super::weighted::WeightedForm;
use super::{ScaleContext, TractorError};

/// Source or target space of an operator: form degree and density weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpShape {
    pub degree: usize,
    pub weight: i64,
}

impl OpShape {
    pub fn new(degree: usize, weight: i64) -> Self {
        OpShape { degree, weight }
    }
}

/// One summand `coeff * partial^alpha` routing component `src` to `tgt`.
#[derive(Clone, Debug, PartialEq)]
struct DiffTerm {
    src: u16,
    tgt: u16,
    alpha: Vec<u16>,
    coeff: ScalarExpr,
}

/// A linear differential operator given by a canonical term list: terms are
/// sorted by routing and multi-index, merged, and zero-pruned, so structural
/// equality is semantic equality of the presentation.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDiffOp {
    vars: Arc<VarTable>,
    n: usize,
    src: OpShape,
    tgt: OpShape,
    terms: Vec<DiffTerm>,
}

fn derive_multi(e: &ScalarExpr, gamma: &[u16]) -> ScalarExpr {
    let mut out = e.clone();
    for (i, &g) in gamma.iter().enumerate() {
        for _ in 0..g {
            out = out.partial_derivative(i);
        }
    }
    out
}

fn binom(n: u16, k: u16) -> i64 {
    let mut acc = 1i64;
    for i in 0..k {
        acc = acc * (n - i) as i64 / (i + 1) as i64;
    }
    acc
}

/// All multi-indices `gamma <= alpha`, odometer order.
fn sub_indices(alpha: &[u16]) -> Vec<Vec<u16>> {
    let mut out = vec![vec![0u16; alpha.len()]];
    for (i, &top) in alpha.iter().enumerate() {
        if top == 0 {
            continue;
        }
        let mut next = Vec::with_capacity(out.len() * (top as usize + 1));
        for base in &out {
            for v in 0..=top {
                let mut g = base.clone();
                g[i] = v;
                next.push(g);
            }
        }
        out = next;
    }
    out
}

impl LinearDiffOp {
    pub fn zero(vars: &Arc<VarTable>, n: usize, src: OpShape, tgt: OpShape) -> Self {
        LinearDiffOp {
            vars: vars.clone(),
            n,
            src,
            tgt,
            terms: Vec::new(),
        }
    }

    /// Build from raw terms `(src_mask, tgt_mask, alpha, coeff)`; the list is
    /// canonicalized (merged, sorted, zero-pruned).
    pub fn from_terms(
        vars: &Arc<VarTable>,
        n: usize,
        src: OpShape,
        tgt: OpShape,
        raw: Vec<(u16, u16, Vec<u16>, ScalarExpr)>,
    ) -> Self {
        let mut op = Self::zero(vars, n, src, tgt);
        op.terms = raw
            .into_iter()
            .map(|(s, t, alpha, coeff)| {
                assert_eq!(alpha.len(), n, "multi-index length");
                DiffTerm {
                    src: s,
                    tgt: t,
                    alpha,
                    coeff,
                }
            })
            .collect();
        op.canonicalize();
        op
    }

    fn canonicalize(&mut self) {
        let mut merged: BTreeMap<(u16, u16, Vec<u16>), ScalarExpr> = BTreeMap::new();
        for term in self.terms.drain(..) {
            let key = (term.src, term.tgt, term.alpha);
            match merged.get_mut(&key) {
                Some(c) => *c = c.add(&term.coeff),
                None => {
                    merged.insert(key, term.coeff);
                }
            }
        }
        self.terms = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((src, tgt, alpha), coeff)| DiffTerm {
                src,
                tgt,
                alpha,
                coeff,
            })
            .collect();
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn src(&self) -> OpShape {
        self.src
    }

    pub fn tgt(&self) -> OpShape {
        self.tgt
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest total derivative order among the terms.
    pub fn order(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.alpha.iter().map(|&e| e as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn apply_data(&self, v: &FormData) -> FormData {
        assert_eq!(v.degree(), self.src.degree, "input degree");
        let mut out = FormData::zero(&self.vars, self.n, self.tgt.degree);
        for term in &self.terms {
            let comp = v.component(term.src);
            if comp.is_zero() {
                continue;
            }
            out.add_to(term.tgt, term.coeff.mul(&derive_multi(&comp, &term.alpha)));
        }
        out
    }

    /// Apply with the weight and degree guards of the declared shape.
    pub fn apply(&self, v: &WeightedForm) -> Result<WeightedForm, TractorError> {
        if v.degree() != self.src.degree {
            return Err(TractorError::DegreeMismatch {
                expected: self.src.degree,
                found: v.degree(),
            });
        }
        if v.weight() != self.src.weight {
            return Err(TractorError::WrongWeight {
                expected: self.src.weight,
                found: v.weight(),
            });
        }
        Ok(WeightedForm::new(self.apply_data(v.data()), self.tgt.weight))
    }

    pub fn add(&self, other: &LinearDiffOp) -> LinearDiffOp {
        assert_eq!(self.src, other.src, "source shapes must agree");
        assert_eq!(self.tgt, other.tgt, "target shapes must agree");
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out.canonicalize();
        out
    }

    pub fn sub(&self, other: &LinearDiffOp) -> LinearDiffOp {
        self.add(&other.scale_int(-1))
    }

    pub fn scale_int(&self, c: i64) -> LinearDiffOp {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff = t.coeff.mul_int(c);
        }
        out.canonicalize();
        out
    }

    pub fn scale_rat(&self, c: &Rat) -> LinearDiffOp {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff = t.coeff.mul_rat(c);
        }
        out.canonicalize();
        out
    }

    pub fn scale(&self, c: &ScalarExpr) -> LinearDiffOp {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff = t.coeff.mul(c);
        }
        out.canonicalize();
        out
    }

    /// `self` after `inner`: composition by the Leibniz rule,
    /// `c1 partial^alpha (c2 partial^beta) = c1 sum_{gamma <= alpha}
    /// binom(alpha, gamma) (partial^gamma c2) partial^{alpha - gamma + beta}`.
    pub fn compose(&self, inner: &LinearDiffOp) -> LinearDiffOp {
        assert_eq!(self.src, inner.tgt, "shapes must chain");
        assert_eq!(self.n, inner.n, "same coordinate patch");
        let mut out = Self::zero(&self.vars, self.n, inner.src, self.tgt);
        for outer in &self.terms {
            for it in &inner.terms {
                if it.tgt != outer.src {
                    continue;
                }
                for gamma in sub_indices(&outer.alpha) {
                    let mut mult = 1i64;
                    for i in 0..self.n {
                        mult *= binom(outer.alpha[i], gamma[i]);
                    }
                    let inner_derived = derive_multi(&it.coeff, &gamma);
                    if inner_derived.is_zero() {
                        continue;
                    }
                    let coeff = outer.coeff.mul(&inner_derived).mul_int(mult);
                    let alpha: Vec<u16> = (0..self.n)
                        .map(|i| outer.alpha[i] - gamma[i] + it.alpha[i])
                        .collect();
                    out.terms.push(DiffTerm {
                        src: it.src,
                        tgt: outer.tgt,
                        alpha,
                        coeff,
                    });
                }
            }
        }
        out.canonicalize();
        out
    }

    /// Formal adjoint with respect to the plain coordinate pairing
    /// `sum_masks int phi_mask psi_mask`: each `c partial^alpha` becomes
    /// `(-1)^{|alpha|} partial^alpha (c .)` with routing reversed. The
    /// pairing ignores weights; the adjoint's shapes mirror the original.
    pub fn formal_adjoint(&self) -> LinearDiffOp {
        let mut out = Self::zero(&self.vars, self.n, self.tgt, self.src);
        for term in &self.terms {
            let total: u16 = term.alpha.iter().sum();
            let sign = if total % 2 == 1 { -1 } else { 1 };
            for gamma in sub_indices(&term.alpha) {
                let mut mult = 1i64;
                for i in 0..self.n {
                    mult *= binom(term.alpha[i], gamma[i]);
                }
                let derived = derive_multi(&term.coeff, &gamma);
                if derived.is_zero() {
                    continue;
                }
                let alpha: Vec<u16> = (0..self.n).map(|i| term.alpha[i] - gamma[i]).collect();
                out.terms.push(DiffTerm {
                    src: term.tgt,
                    tgt: term.src,
                    alpha,
                    coeff: derived.mul_int(sign * mult),
                });
            }
        }
        out.canonicalize();
        out
    }

    /// Equality of the term lists and degrees, ignoring the weight metadata;
    /// the coordinate pairing that defines the adjoint is weight-blind.
    pub fn terms_equal(&self, other: &LinearDiffOp) -> bool {
        self.n == other.n
            && self.src.degree == other.src.degree
            && self.tgt.degree == other.tgt.degree
            && self.terms == other.terms
    }

    pub fn is_formally_self_adjoint(&self) -> bool {
        self.terms_equal(&self.formal_adjoint())
    }

    /// Principal symbol: keep only top-order terms, substitute the
    /// xi-alphabet for the derivatives, and apply the order-dependent sign
    /// of the `i`-convention. Leading coefficients must be rational
    /// constants.
    pub fn principal_symbol(&self) -> Result<SymbolMatrix, TractorError> {
        let m = self.order();
        let xi_names: Vec<String> = (1..=self.n).map(|i| format!("xi{i}")).collect();
        let xi = VarTable::new(&xi_names, &[]);
        let sign = if (m / 2) % 2 == 1 { -1i64 } else { 1 };
        let mut entries: BTreeMap<(u16, u16), Poly> = BTreeMap::new();
        for term in &self.terms {
            let total: usize = term.alpha.iter().map(|&e| e as usize).sum();
            if total != m {
                continue;
            }
            let Some(c) = term.coeff.as_rat_const() else {
                return Err(TractorError::SymbolNotConstant {
                    reason: format!("coefficient `{}` is not constant", term.coeff),
                });
            };
            let mut mono = Poly::constant(&xi, c).mul(&Poly::int(&xi, sign));
            for (i, &e) in term.alpha.iter().enumerate() {
                mono = mono.mul(&Poly::var(&xi, i).pow(e as u32));
            }
            let entry = entries
                .entry((term.src, term.tgt))
                .or_insert_with(|| Poly::zero(&xi));
            *entry = entry.add(&mono);
        }
        entries.retain(|_, p| !p.is_zero());
        Ok(SymbolMatrix {
            xi,
            n: self.n,
            src_degree: self.src.degree,
            tgt_degree: self.tgt.degree,
            imaginary: m % 2 == 1,
            entries,
        })
    }

    /// Dump as JSON: shapes plus the list of
    /// `(coeff, multi-index, source mask, target mask)`.
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "src": { "degree": self.src.degree, "weight": self.src.weight },
            "tgt": { "degree": self.tgt.degree, "weight": self.tgt.weight },
            "terms": self.terms.iter().map(|t| json!({
                "coeff": t.coeff.to_string(),
                "alpha": t.alpha,
                "src_mask": t.src,
                "tgt_mask": t.tgt,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Principal symbol as a matrix of polynomials in the xi-alphabet, indexed
/// by (source mask, target mask), with an imaginary flag for odd orders.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolMatrix {
    xi: Arc<VarTable>,
    n: usize,
    src_degree: usize,
    tgt_degree: usize,
    imaginary: bool,
    entries: BTreeMap<(u16, u16), Poly>,
}

impl SymbolMatrix {
    pub fn xi_vars(&self) -> &Arc<VarTable> {
        &self.xi
    }

    pub fn is_imaginary(&self) -> bool {
        self.imaginary
    }

    pub fn entry(&self, src: u16, tgt: u16) -> Poly {
        self.entries
            .get(&(src, tgt))
            .cloned()
            .unwrap_or_else(|| Poly::zero(&self.xi))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Matrix composition `self` after `inner`, multiplying the scalar parts
    /// and folding `i^2 = -1` when both factors are odd.
    pub fn mul(&self, inner: &SymbolMatrix) -> SymbolMatrix {
        assert_eq!(self.src_degree, inner.tgt_degree, "shapes must chain");
        assert_eq!(self.n, inner.n, "same coordinate patch");
        let flip = self.imaginary && inner.imaginary;
        let mut entries: BTreeMap<(u16, u16), Poly> = BTreeMap::new();
        for (&(mid_i, tgt), outer) in &self.entries {
            for (&(src, mid_j), inner_p) in &inner.entries {
                if mid_j != mid_i {
                    continue;
                }
                let mut prod = outer.mul(inner_p);
                if flip {
                    prod = prod.mul(&Poly::int(&self.xi, -1));
                }
                let entry = entries
                    .entry((src, tgt))
                    .or_insert_with(|| Poly::zero(&self.xi));
                *entry = entry.add(&prod);
            }
        }
        entries.retain(|_, p| !p.is_zero());
        SymbolMatrix {
            xi: self.xi.clone(),
            n: self.n,
            src_degree: inner.src_degree,
            tgt_degree: self.tgt_degree,
            imaginary: self.imaginary != inner.imaginary,
            entries,
        }
    }

    /// When the matrix is `p * identity` on its degree block, return `p`.
    pub fn as_multiple_of_identity(&self) -> Option<Poly> {
        if self.src_degree != self.tgt_degree {
            return None;
        }
        let masks = masks_of_degree(self.n, self.src_degree);
        let mut common: Option<Poly> = None;
        for (&(s, t), p) in &self.entries {
            if s != t {
                return None;
            }
            match &common {
                Some(c) if c == p => {}
                Some(_) => return None,
                None => common = Some(p.clone()),
            }
        }
        // Every diagonal slot must carry the shared entry.
        if self.entries.len() != masks.len() {
            return None;
        }
        common
    }
}

/// The coordinate differential on degree-`k` inputs of weight `w`; scale
/// independent.
pub fn d_op(vars: &Arc<VarTable>, n: usize, k: usize, w: i64) -> LinearDiffOp {
    let mut raw = Vec::new();
    for src in masks_of_degree(n, k) {
        for a in 0..n {
            let Some((tgt, s)) = insert_with_sign(src, a) else {
                continue;
            };
            let mut alpha = vec![0u16; n];
            alpha[a] = 1;
            raw.push((src, tgt, alpha, ScalarExpr::int(vars, s as i64)));
        }
    }
    LinearDiffOp::from_terms(vars, n, OpShape::new(k, w), OpShape::new(k + 1, w), raw)
}

/// The flat-scale codifferential `-sum_a iota_a partial_a` on degree-`k`
/// inputs of weight `w`.
pub fn delta_flat_op(vars: &Arc<VarTable>, n: usize, k: usize, w: i64) -> LinearDiffOp {
    assert!(k >= 1, "codifferential needs degree at least one");
    let mut raw = Vec::new();
    for tgt in masks_of_degree(n, k - 1) {
        for a in 0..n {
            let Some((src, s)) = insert_with_sign(tgt, a) else {
                continue;
            };
            let mut alpha = vec![0u16; n];
            alpha[a] = 1;
            raw.push((src, tgt, alpha, ScalarExpr::int(vars, -(s as i64))));
        }
    }
    LinearDiffOp::from_terms(vars, n, OpShape::new(k, w), OpShape::new(k - 1, w - 2), raw)
}

/// The codifferential of the scale as a term list: the contraction of the
/// own-scale covariant derivative, with the inverse metric factor and the
/// Christoffel corrections written out.
pub fn delta_op(ctx: &ScaleContext, k: usize, w: i64) -> LinearDiffOp {
    assert!(k >= 1, "codifferential needs degree at least one");
    let n = ctx.n();
    let vars = ctx.vars();
    let ginv = ctx.inverse_metric_factor();
    let mut raw = Vec::new();
    for tgt in masks_of_degree(n, k - 1) {
        for a in 0..n {
            let Some((src1, s1)) = insert_with_sign(tgt, a) else {
                continue;
            };
            let mut alpha = vec![0u16; n];
            alpha[a] = 1;
            raw.push((src1, tgt, alpha, ginv.mul_int(-(s1 as i64))));
            if ctx.is_flat() {
                continue;
            }
            // Christoffel corrections of nabla_a evaluated at the output
            // component src1: replace each output letter by the summed
            // input letter of the upper Christoffel slot.
            for ell in letters(src1) {
                let Some((rest, r1)) = remove_with_sign(src1, ell) else {
                    continue;
                };
                for c in 0..n {
                    let g = ctx.gamma(c, a, ell);
                    if g.is_zero() {
                        continue;
                    }
                    let Some((m2, r2)) = insert_with_sign(rest, c) else {
                        continue;
                    };
                    let sign = (s1 * r1 * r2) as i64;
                    raw.push((m2, tgt, vec![0u16; n], ginv.mul(g).mul_int(sign)));
                }
            }
        }
    }
    LinearDiffOp::from_terms(vars, n, OpShape::new(k, w), OpShape::new(k - 1, w - 2), raw)
}

/// Multiplication by a scalar with a declared weight shift.
pub fn scalar_mul_op(
    vars: &Arc<VarTable>,
    n: usize,
    k: usize,
    w: i64,
    h: &ScalarExpr,
    weight_shift: i64,
) -> LinearDiffOp {
    let raw = masks_of_degree(n, k)
        .into_iter()
        .map(|m| (m, m, vec![0u16; n], h.clone()))
        .collect();
    LinearDiffOp::from_terms(
        vars,
        n,
        OpShape::new(k, w),
        OpShape::new(k, w + weight_shift),
        raw,
    )
}

/// The Schouten endomorphism as a zero-order term list.
pub fn p_sharp_op(ctx: &ScaleContext, k: usize, w: i64) -> LinearDiffOp {
    let n = ctx.n();
    let mut raw = Vec::new();
    for src in masks_of_degree(n, k) {
        for c in letters(src) {
            let Some((rest, r1)) = remove_with_sign(src, c) else {
                continue;
            };
            for b in 0..n {
                let coeff = ctx.inverse_metric_factor().mul(ctx.schouten(c, b));
                if coeff.is_zero() {
                    continue;
                }
                let Some((tgt, r2)) = insert_with_sign(rest, b) else {
                    continue;
                };
                raw.push((src, tgt, vec![0u16; n], coeff.mul_int((r1 * r2) as i64)));
            }
        }
    }
    LinearDiffOp::from_terms(
        ctx.vars(),
        n,
        OpShape::new(k, w),
        OpShape::new(k, w - 2),
        raw,
    )
}

/// The conformal Laplacian on densities of weight `1 - n/2` as a term list.
pub fn yamabe_op(ctx: &ScaleContext) -> LinearDiffOp {
    let n = ctx.n();
    let vars = ctx.vars();
    let w = 1 - n as i64 / 2;
    let ginv = ctx.inverse_metric_factor();
    let mut raw = Vec::new();
    for a in 0..n {
        let mut alpha = vec![0u16; n];
        alpha[a] = 2;
        raw.push((0u16, 0u16, alpha, ginv.neg()));
        if ctx.is_flat() {
            continue;
        }
        for b in 0..n {
            let g = ctx.gamma(b, a, a);
            if g.is_zero() {
                continue;
            }
            let mut alpha = vec![0u16; n];
            alpha[b] = 1;
            raw.push((0, 0, alpha, ginv.mul(g)));
        }
    }
    raw.push((
        0,
        0,
        vec![0u16; n],
        ctx.jay().mul_int(n as i64 / 2 - 1),
    ));
    LinearDiffOp::from_terms(vars, n, OpShape::new(0, w), OpShape::new(0, w - 2), raw)
}

/// The Maxwell operator as a term list: codifferential after differential at
/// degree `n/2 - 1`.
pub fn maxwell_op(ctx: &ScaleContext) -> Result<LinearDiffOp, TractorError> {
    let n = ctx.n();
    if n % 2 != 0 {
        return Err(TractorError::DimensionUnsupported {
            n,
            reason: "gauge operators live at degree n/2 - 1".into(),
        });
    }
    let k = n / 2 - 1;
    Ok(delta_op(ctx, k + 1, 0).compose(&d_op(ctx.vars(), n, k, 0)))
}

/// The gauge companion as a term list, mirroring the functional route.
pub fn gauge_companion_op(ctx: &ScaleContext) -> Result<LinearDiffOp, TractorError> {
    let n = ctx.n();
    if n % 2 != 0 {
        return Err(TractorError::DimensionUnsupported {
            n,
            reason: "gauge operators live at degree n/2 - 1".into(),
        });
    }
    let k = n / 2 - 1;
    let vars = ctx.vars();
    let delta1 = delta_op(ctx, k, 0);
    let d1 = d_op(vars, n, k - 1, -2);
    let delta2 = delta_op(ctx, k, -2);
    let head = delta2.compose(&d1).compose(&delta1).scale_rat(&rat(1, 2));
    let jterm = delta2.compose(&scalar_mul_op(vars, n, k, 0, ctx.jay(), -2));
    let pterm = delta2.compose(&p_sharp_op(ctx, k, 0)).scale_int(-2);
    Ok(head.add(&jterm).add(&pterm))
}

/// The third-order potential gauge operator at `n = 4` as a term list.
pub fn eastwood_singer_op(ctx: &ScaleContext) -> Result<LinearDiffOp, TractorError> {
    let n = ctx.n();
    if n != 4 {
        return Err(TractorError::DimensionUnsupported {
            n,
            reason: "the gauge operator on potentials is specific to n = 4".into(),
        });
    }
    Ok(gauge_companion_op(ctx)?.scale_int(2))
}

/// The critical fourth-order operator on functions at `n = 4` as a term
/// list: twice the gauge companion of the differential.
pub fn paneitz_op(ctx: &ScaleContext) -> Result<LinearDiffOp, TractorError> {
    let n = ctx.n();
    if n != 4 {
        return Err(TractorError::DimensionUnsupported {
            n,
            reason: "the critical fourth-order operator on functions is taken at n = 4".into(),
        });
    }
    Ok(gauge_companion_op(ctx)?
        .compose(&d_op(ctx.vars(), n, 0, 0))
        .scale_int(2))
}

/// The flat Hodge star on degree-`k` forms for the orientation
/// `dy^1 ^ ... ^ dy^n`: component `J` goes to its complement with the sign
/// of the permutation `(J, J^complement)`.
pub fn hodge_star_flat(vars: &Arc<VarTable>, n: usize, k: usize, w: i64) -> LinearDiffOp {
    let mut raw = Vec::new();
    for src in masks_of_degree(n, k) {
        let comp = (!src) & ((1u16 << n) - 1);
        let mut seq: Vec<usize> = letters(src).collect();
        seq.extend(letters(comp));
        let mut sign = 1i64;
        for i in 0..seq.len() {
            for j in (i + 1)..seq.len() {
                if seq[i] > seq[j] {
                    sign = -sign;
                }
            }
        }
        raw.push((src, comp, vec![0u16; n], ScalarExpr::int(vars, sign)));
    }
    LinearDiffOp::from_terms(vars, n, OpShape::new(k, w), OpShape::new(n - k, w), raw)
}

#[cfg(test)]
mod tests {
    use super::super::sample;
    use super::*;
    use crate::base::BaseContext;
    use crate::tractor::gauge;

    fn curved(n: usize, seed: u64) -> ScaleContext {
        let flat = ScaleContext::flat(n);
        let by = sample::random_scale(flat.base(), &mut sample::rng_for(seed));
        flat.rescaled(&by)
    }

    #[test]
    fn term_lists_match_functional_d_and_delta() {
        for (n, k, seed) in [(4usize, 1usize, 1u64), (4, 2, 2), (6, 3, 3)] {
            let base = BaseContext::new(n);
            let ctx = curved(n, seed);
            let flat = ScaleContext::flat(n);
            let v = sample::random_weighted_form(&base, k, 0, 2, &mut sample::rng_for(seed + 9));
            let d = d_op(base.vars(), n, k, 0);
            assert_eq!(d.apply(&v).unwrap(), flat.d(&v), "d n={n} k={k}");
            let del = delta_op(&ctx, k, 0);
            assert_eq!(del.apply(&v).unwrap(), ctx.delta(&v), "delta n={n} k={k}");
            assert_eq!(
                delta_op(&flat, k, 0),
                delta_flat_op(base.vars(), n, k, 0),
                "flat reduction n={n} k={k}"
            );
        }
    }

    #[test]
    fn adjoint_of_differential_is_flat_codifferential() {
        for (n, k) in [(4usize, 0usize), (4, 1), (6, 2)] {
            let base = BaseContext::new(n);
            let d = d_op(base.vars(), n, k, 0);
            let adj = d.formal_adjoint();
            assert!(
                adj.terms_equal(&delta_flat_op(base.vars(), n, k + 1, 0)),
                "n={n} k={k}"
            );
        }
    }

    #[test]
    fn adjoint_is_an_involution() {
        let ctx = curved(4, 11);
        let g = gauge_companion_op(&ctx).unwrap();
        assert_eq!(g.formal_adjoint().formal_adjoint(), g);
        let p = paneitz_op(&ctx).unwrap();
        assert_eq!(p.formal_adjoint().formal_adjoint(), p);
    }

    #[test]
    fn flat_fourth_order_operator_is_self_adjoint() {
        let flat = ScaleContext::flat(4);
        let p = paneitz_op(&flat).unwrap();
        assert!(p.is_formally_self_adjoint());
        let y = yamabe_op(&flat);
        assert!(y.is_formally_self_adjoint());
    }

    #[test]
    fn gauge_term_lists_match_functional_routes() {
        for (n, seed) in [(4usize, 21u64), (6, 22)] {
            let base = BaseContext::new(n);
            let ctx = curved(n, seed);
            let v = sample::random_weighted_form(
                &base,
                n / 2 - 1,
                0,
                2,
                &mut sample::rng_for(seed + 3),
            );
            let mx = maxwell_op(&ctx).unwrap();
            assert_eq!(mx.apply(&v).unwrap(), gauge::maxwell(&ctx, &v).unwrap());
            let g = gauge_companion_op(&ctx).unwrap();
            assert_eq!(
                g.apply(&v).unwrap(),
                gauge::gauge_companion(&ctx, &v).unwrap(),
                "n={n}"
            );
        }
        let ctx = curved(4, 23);
        let base = BaseContext::new(4);
        let f = sample::random_weighted_form(&base, 0, 0, 2, &mut sample::rng_for(24));
        assert_eq!(
            paneitz_op(&ctx).unwrap().apply(&f).unwrap(),
            gauge::paneitz(&ctx, &f).unwrap()
        );
        let u = sample::random_weighted_form(&base, 1, 0, 2, &mut sample::rng_for(25));
        assert_eq!(
            eastwood_singer_op(&ctx).unwrap().apply(&u).unwrap(),
            gauge::eastwood_singer(&ctx, &u).unwrap()
        );
    }

    #[test]
    fn yamabe_term_list_matches_functional_route() {
        for (n, seed) in [(4usize, 31u64), (6, 32)] {
            let base = BaseContext::new(n);
            let ctx = curved(n, seed);
            let w = 1 - n as i64 / 2;
            let f = sample::random_weighted_form(&base, 0, w, 2, &mut sample::rng_for(seed));
            assert_eq!(
                yamabe_op(&ctx).apply(&f).unwrap(),
                ctx.yamabe(&f).unwrap(),
                "n={n}"
            );
        }
    }

    #[test]
    fn hodge_laplacian_symbol_is_the_metric_form_times_identity() {
        let n = 4;
        let vars = BaseContext::new(n).vars().clone();
        let dd = delta_flat_op(&vars, n, 2, 0).compose(&d_op(&vars, n, 1, 0));
        let d_del = d_op(&vars, n, 0, -2).compose(&delta_flat_op(&vars, n, 1, 0));
        let lap = dd.add(&d_del);
        let sym = lap.principal_symbol().unwrap();
        assert!(!sym.is_imaginary());
        let xi = sym.xi_vars().clone();
        let mut norm = Poly::zero(&xi);
        for i in 0..n {
            norm = norm.add(&Poly::var(&xi, i).pow(2));
        }
        assert_eq!(sym.as_multiple_of_identity().unwrap(), norm);
    }

    #[test]
    fn fourth_order_symbol_is_norm_fourth() {
        let flat = ScaleContext::flat(4);
        let p = paneitz_op(&flat).unwrap();
        let sym = p.principal_symbol().unwrap();
        assert!(!sym.is_imaginary());
        let xi = sym.xi_vars().clone();
        let mut norm = Poly::zero(&xi);
        for i in 0..4 {
            norm = norm.add(&Poly::var(&xi, i).pow(2));
        }
        assert_eq!(sym.as_multiple_of_identity().unwrap(), norm.pow(2));
    }

    #[test]
    fn symbol_is_multiplicative_and_transposes_under_adjoint() {
        let n = 4;
        let vars = BaseContext::new(n).vars().clone();
        let d = d_op(&vars, n, 1, 0);
        let del = delta_flat_op(&vars, n, 2, 0);
        let composite = del.compose(&d);
        let sd = d.principal_symbol().unwrap();
        let sdel = del.principal_symbol().unwrap();
        assert!(sd.is_imaginary() && sdel.is_imaginary());
        assert_eq!(composite.principal_symbol().unwrap(), sdel.mul(&sd));
        // Pairing at the symbol level: the codifferential's symbol is minus
        // the transpose of the differential's.
        for src in masks_of_degree(n, 1) {
            for tgt in masks_of_degree(n, 2) {
                let lhs = sdel.entry(tgt, src);
                let rhs = sd.entry(src, tgt).mul(&Poly::int(sdel.xi_vars(), -1));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn curved_leading_coefficients_are_rejected_by_the_symbol() {
        let ctx = curved(4, 41);
        let del = delta_op(&ctx, 1, 0);
        assert!(matches!(
            del.principal_symbol(),
            Err(TractorError::SymbolNotConstant { .. })
        ));
    }

    #[test]
    fn hodge_star_squares_to_the_degree_sign() {
        for (n, k) in [(4usize, 0usize), (4, 1), (4, 2), (4, 3), (6, 2)] {
            let vars = BaseContext::new(n).vars().clone();
            let star = hodge_star_flat(&vars, n, k, 0);
            let back = hodge_star_flat(&vars, n, n - k, 0);
            let square = back.compose(&star);
            let sign = if (k * (n - k)) % 2 == 1 { -1 } else { 1 };
            let ident = scalar_mul_op(&vars, n, k, 0, &ScalarExpr::int(&vars, sign), 0);
            assert!(square.terms_equal(&ident), "n={n} k={k}");
        }
    }

    #[test]
    fn apply_guards_shapes() {
        let base = BaseContext::new(4);
        let d = d_op(base.vars(), 4, 1, 0);
        let wrong_degree =
            sample::random_weighted_form(&base, 2, 0, 2, &mut sample::rng_for(51));
        assert!(matches!(
            d.apply(&wrong_degree),
            Err(TractorError::DegreeMismatch { expected: 1, found: 2 })
        ));
        let wrong_weight =
            sample::random_weighted_form(&base, 1, 3, 2, &mut sample::rng_for(52));
        assert!(matches!(
            d.apply(&wrong_weight),
            Err(TractorError::WrongWeight { expected: 0, found: 3 })
        ));
    }

    #[test]
    fn json_dump_lists_every_term() {
        let base = BaseContext::new(4);
        let d = d_op(base.vars(), 4, 0, 0);
        let doc = d.to_json();
        assert_eq!(doc["src"]["degree"], 0);
        assert_eq!(doc["tgt"]["degree"], 1);
        assert_eq!(doc["terms"].as_array().unwrap().len(), d.term_count());
        assert_eq!(doc["terms"][0]["coeff"], "1");
    }

    #[test]
    fn composition_leibniz_rule_with_nonconstant_coefficients() {
        // d compose (x1^2 . ) applied to a random function must agree with
        // differentiating the scaled input directly.
        let base = BaseContext::new(4);
        let vars = base.vars();
        let x1sq = ScalarExpr::var(vars, 0).mul(&ScalarExpr::var(vars, 0));
        let m0 = scalar_mul_op(vars, 4, 0, 0, &x1sq, 0);
        let composite = d_op(vars, 4, 0, 0).compose(&m0);
        let f = sample::random_weighted_form(&base, 0, 0, 2, &mut sample::rng_for(61));
        let flat = ScaleContext::flat(4);
        let direct = flat.d(&WeightedForm::new(f.data().scale(&x1sq), 0));
        assert_eq!(composite.apply(&f).unwrap(), direct);
    }
}
