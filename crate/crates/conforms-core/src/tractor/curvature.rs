//! Curvature of the tractor connection. The curvature two-form is built
//! from the Weyl tensor on the `z`-pair slots and the Cotton tensor on the
//! mixed `z`-`x` slots; every scale in scope is conformally flat, so all of
//! it vanishes identically, and that vanishing is computed, not assumed.
//!
//! Sections carrying one extra pair of lower tractor indices (the shape of
//! the curvature and of the algebraic Weyl tractor built from it) get the
//! coupled connection: the form-letter action plus the dual correction
//! `-Gamma[B][C] T_B` on each lower index.

use crate::forms::FormData;
use crate::scalar::{rat, Rat, ScalarExpr};

use super::bundle::contract_letter;
use super::{ScaleContext, TractorError, TractorForm};

fn x_letter(n: usize) -> usize {
    n + 1
}

/// Connection coefficient of the tractor connection in direction `a`:
/// the component on the output letter `out` of the derivative of the basis
/// section on letter `inp`. This is the same table `tractor_nabla` applies
/// mask by mask; the basis test ties the two together.
pub(crate) fn connection_entry(
    ctx: &ScaleContext,
    a: usize,
    out: usize,
    inp: usize,
) -> ScalarExpr {
    let n = ctx.n();
    let x = x_letter(n);
    let vars = ctx.vars();
    if inp == 0 {
        if (1..=n).contains(&out) {
            return ctx.schouten(a, out - 1).clone();
        }
    } else if inp == x {
        if out == 1 + a {
            return ctx.metric_factor().clone();
        }
    } else {
        let c = inp - 1;
        if out == 0 {
            if a == c {
                return ScalarExpr::one(vars).neg();
            }
        } else if (1..=n).contains(&out) {
            return ctx.gamma(c, a, out - 1).neg();
        } else if out == x {
            return ctx.inverse_metric_factor().mul(ctx.schouten(a, c)).neg();
        }
    }
    ScalarExpr::zero(vars)
}

/// A section with one antisymmetric pair of lower tractor indices, each
/// entry a tractor form of common rank and weight. Entries are stored as a
/// full `(n+2) x (n+2)` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPairSection {
    n: usize,
    rank: usize,
    weight: i64,
    entries: Vec<TractorForm>,
}

impl DualPairSection {
    pub fn zero(ctx: &ScaleContext, rank: usize, weight: i64) -> Self {
        let n = ctx.n();
        let dim = n + 2;
        let entries = (0..dim * dim)
            .map(|_| TractorForm::zero(ctx, rank, weight))
            .collect();
        DualPairSection {
            n,
            rank,
            weight,
            entries,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn get(&self, c: usize, e: usize) -> &TractorForm {
        &self.entries[c * (self.n + 2) + e]
    }

    pub fn set(&mut self, c: usize, e: usize, f: TractorForm) {
        assert_eq!(f.degree(), self.rank, "entry rank");
        assert_eq!(f.weight(), self.weight, "entry weight");
        self.entries[c * (self.n + 2) + e] = f;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(TractorForm::is_zero)
    }

    fn from_data(n: usize, rank: usize, weight: i64, data: Vec<FormData>) -> Self {
        let entries = data
            .into_iter()
            .map(|d| TractorForm::new(d, weight))
            .collect();
        DualPairSection {
            n,
            rank,
            weight,
            entries,
        }
    }

    pub fn add(&self, other: &DualPairSection) -> DualPairSection {
        assert_eq!(self.weight, other.weight, "weights must agree");
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(l, r)| l.add(r))
            .collect();
        DualPairSection {
            n: self.n,
            rank: self.rank,
            weight: self.weight,
            entries,
        }
    }

    pub fn sub(&self, other: &DualPairSection) -> DualPairSection {
        self.add(&other.scale_rat(&rat(-1, 1)))
    }

    pub fn scale_rat(&self, r: &Rat) -> DualPairSection {
        let entries = self
            .entries
            .iter()
            .map(|f| TractorForm::new(f.data().scale_rat(r), f.weight()))
            .collect();
        DualPairSection {
            n: self.n,
            rank: self.rank,
            weight: self.weight,
            entries,
        }
    }

    /// Wedge the canonical `X` into every entry.
    pub fn eps_x(&self) -> DualPairSection {
        let entries = self.entries.iter().map(TractorForm::eps_x).collect();
        DualPairSection {
            n: self.n,
            rank: self.rank + 1,
            weight: self.weight + 1,
            entries,
        }
    }

    /// Coupled derivative in direction `a`: the form-letter connection on
    /// each entry plus the dual correction on both lower indices.
    pub fn nabla(&self, ctx: &ScaleContext, a: usize) -> DualPairSection {
        let dim = self.n + 2;
        let mut out = Vec::with_capacity(dim * dim);
        for c in 0..dim {
            for e in 0..dim {
                let mut d = ctx.tractor_nabla(a, self.get(c, e)).data().clone();
                for b in 0..dim {
                    let coeff = connection_entry(ctx, a, b, c);
                    if !coeff.is_zero() && !self.get(b, e).is_zero() {
                        d = d.sub(&self.get(b, e).data().scale(&coeff));
                    }
                    let coeff = connection_entry(ctx, a, b, e);
                    if !coeff.is_zero() && !self.get(c, b).is_zero() {
                        d = d.sub(&self.get(c, b).data().scale(&coeff));
                    }
                }
                out.push(d);
            }
        }
        DualPairSection::from_data(self.n, self.rank, self.weight, out)
    }

    /// Coupled trace Laplacian; weight drops by two.
    pub fn trace_laplacian(&self, ctx: &ScaleContext) -> DualPairSection {
        let n = self.n;
        let dim = n + 2;
        let mut acc = vec![FormData::zero(ctx.vars(), dim, self.rank); dim * dim];
        for a in 0..n {
            let first = self.nabla(ctx, a);
            let mut second = first.nabla(ctx, a);
            if !ctx.is_flat() {
                for b in 0..n {
                    let coeff = ctx.gamma(b, a, a);
                    if coeff.is_zero() {
                        continue;
                    }
                    let corr = self.nabla(ctx, b);
                    for (i, e) in corr.entries.iter().enumerate() {
                        let sub = TractorForm::new(
                            second.entries[i].data().sub(&e.data().scale(coeff)),
                            self.weight,
                        );
                        second.entries[i] = sub;
                    }
                }
            }
            for (i, e) in second.entries.iter().enumerate() {
                acc[i] = acc[i].add(&e.data().scale(ctx.inverse_metric_factor()));
            }
        }
        DualPairSection::from_data(n, self.rank, self.weight - 2, acc)
    }

    /// Interior tractor-D coupled to the dual pair, mirroring the plain
    /// version entry by entry with the coupled derivative and Laplacian.
    pub fn iota_d(&self, ctx: &ScaleContext) -> DualPairSection {
        let n = self.n;
        let dim = n + 2;
        let w = self.weight;
        let cfac = n as i64 + 2 * w - 2;
        if self.rank == 0 {
            return DualPairSection::zero(ctx, 0, w - 1);
        }
        let nablas: Vec<DualPairSection> = (0..n).map(|a| self.nabla(ctx, a)).collect();
        let lap = self.trace_laplacian(ctx);
        let mut out = Vec::with_capacity(dim * dim);
        for c in 0..dim {
            for e in 0..dim {
                let f = self.get(c, e);
                let mut d =
                    contract_letter(f.data(), x_letter(n)).map(|_, v| v.mul_int(cfac * w));
                for a in 0..n {
                    d = d.add(
                        &contract_letter(nablas[a].get(c, e).data(), 1 + a)
                            .scale(ctx.inverse_metric_factor())
                            .map(|_, v| v.mul_int(cfac)),
                    );
                }
                let arg = lap
                    .get(c, e)
                    .data()
                    .add(&f.data().scale(ctx.jay()).map(|_, v| v.mul_int(w)));
                d = d.sub(&contract_letter(&arg, 0));
                out.push(d);
            }
        }
        DualPairSection::from_data(n, self.rank - 1, w - 1, out)
    }
}

/// The curvature two-form of the tractor connection for the coordinate pair
/// `(a, b)`, as a degree-two form over the tractor letters in its lower
/// index pair: Weyl `C_{abce}` on the `z`-pair components and Cotton
/// `A_{abe}` on the sorted `z`-`x` components.
pub fn curvature_two_form(ctx: &ScaleContext, a: usize, b: usize) -> FormData {
    let n = ctx.n();
    let x = x_letter(n);
    let mut out = FormData::zero(ctx.vars(), n + 2, 2);
    for c in 0..n {
        for e in (c + 1)..n {
            out.add_to(
                (1 << (1 + c)) | (1 << (1 + e)),
                ctx.weyl(a, b, c, e).clone(),
            );
        }
        out.add_to((1 << (1 + c)) | (1 << x), ctx.cotton(a, b, c).clone());
    }
    out
}

/// The curvature with its form indices inserted into the `mu` slot: for each
/// lower pair `(C, E)` a rank-two tractor of weight `-2` whose `mu` slot is
/// the base two-form `(a, b) -> K_{abCE}`.
pub fn curvature_inserted(ctx: &ScaleContext) -> DualPairSection {
    let n = ctx.n();
    let dim = n + 2;
    let mut out = DualPairSection::zero(ctx, 2, -2);
    // Base two-form for each fixed lower pair.
    for c in 0..dim {
        for e in (c + 1)..dim {
            let mut base = FormData::zero(ctx.vars(), n, 2);
            for a in 0..n {
                for b in (a + 1)..n {
                    let k_ab = curvature_two_form(ctx, a, b);
                    let comp = k_ab.component((1 << c) | (1 << e));
                    if !comp.is_zero() {
                        // Letters are stored sorted, so (c, e) reads off the
                        // plus component.
                        base.add_to((1 << a) | (1 << b), comp);
                    }
                }
            }
            if base.is_zero() {
                continue;
            }
            let f = TractorForm::insert_z(-2, &base);
            out.set(c, e, f.clone());
            out.set(e, c, f.neg());
        }
    }
    out
}

/// True when the tractor curvature vanishes identically; exact on every
/// scale in scope since each is a rescaling of the flat metric.
pub fn tractor_curvature_vanishes(ctx: &ScaleContext) -> bool {
    curvature_inserted(ctx).is_zero()
}

/// The algebraic Weyl tractor `3 / ((n-2)(n-4)) iota(D) eps(X) K`; the
/// division makes it undefined at `n = 4`. Identically zero on scope.
pub fn w_tractor(ctx: &ScaleContext) -> Result<DualPairSection, TractorError> {
    let n = ctx.n();
    if n == 4 {
        return Err(TractorError::DimensionUnsupported {
            n,
            reason: "the algebraic Weyl tractor divides by n - 4".into(),
        });
    }
    let inserted = curvature_inserted(ctx).eps_x();
    let dropped = inserted.iota_d(ctx);
    Ok(dropped.scale_rat(&rat(3, (n as i64 - 2) * (n as i64 - 4))))
}

/// True when the algebraic Weyl tractor vanishes identically.
pub fn w_tractor_vanishes(ctx: &ScaleContext) -> Result<bool, TractorError> {
    Ok(w_tractor(ctx)?.is_zero())
}

#[cfg(test)]
mod tests {
    use super::super::sample;
    use super::*;
    use crate::base::BaseContext;

    fn curved(n: usize, seed: u64) -> ScaleContext {
        let flat = ScaleContext::flat(n);
        let by = sample::random_scale(flat.base(), &mut sample::rng_for(seed));
        flat.rescaled(&by)
    }

    fn random_rank_one(n: usize, weight: i64, seed: u64) -> TractorForm {
        let base = BaseContext::new(n);
        let mut rng = sample::rng_for(seed);
        let mut s = super::super::Slots::zero(base.vars(), n, 1);
        s.alpha = sample::random_weighted_form(&base, 0, 0, 2, &mut rng).into_data();
        s.mu = sample::random_weighted_form(&base, 1, 0, 2, &mut rng).into_data();
        s.rho = sample::random_weighted_form(&base, 0, 0, 2, &mut rng).into_data();
        TractorForm::from_slots(weight, &s)
    }

    #[test]
    fn connection_entries_match_basis_derivatives() {
        for (n, seed) in [(4usize, 11u64), (6, 12)] {
            let ctx = curved(n, seed);
            let dim = n + 2;
            for a in 0..n {
                for inp in 0..dim {
                    let mut data = FormData::zero(ctx.vars(), dim, 1);
                    data.set(1 << inp, ScalarExpr::one(ctx.vars()));
                    let basis = TractorForm::new(data, 0);
                    let nb = ctx.tractor_nabla(a, &basis);
                    for out in 0..dim {
                        assert_eq!(
                            nb.data().component(1 << out),
                            connection_entry(&ctx, a, out, inp),
                            "n={n} a={a} {inp}->{out}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn coupled_connection_commutes_on_dual_pairs() {
        let n = 4;
        let ctx = curved(n, 21);
        let x = n + 1;
        let mut sec = DualPairSection::zero(&ctx, 1, 0);
        sec.set(0, 2, random_rank_one(n, 0, 22));
        sec.set(3, x, random_rank_one(n, 0, 23));
        sec.set(2, 3, random_rank_one(n, 0, 24));
        for a in 0..n {
            for b in 0..a {
                let ab = sec.nabla(&ctx, b).nabla(&ctx, a);
                let ba = sec.nabla(&ctx, a).nabla(&ctx, b);
                assert_eq!(ab, ba, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn connection_preserves_tractor_metric() {
        let n = 4;
        let ctx = curved(n, 31);
        for (k, seed) in [(1usize, 32u64), (2, 33)] {
            let base = BaseContext::new(n);
            let mut rng = sample::rng_for(seed);
            let mut sv = super::super::Slots::zero(base.vars(), n, k);
            sv.alpha = sample::random_weighted_form(&base, k - 1, 0, 2, &mut rng).into_data();
            sv.mu = sample::random_weighted_form(&base, k, 0, 2, &mut rng).into_data();
            if k >= 2 {
                sv.phi = sample::random_weighted_form(&base, k - 2, 0, 2, &mut rng).into_data();
            }
            sv.rho = sample::random_weighted_form(&base, k - 1, 0, 2, &mut rng).into_data();
            let v = TractorForm::from_slots(0, &sv);
            let mut su = super::super::Slots::zero(base.vars(), n, k);
            su.alpha = sample::random_weighted_form(&base, k - 1, 0, 2, &mut rng).into_data();
            su.mu = sample::random_weighted_form(&base, k, 0, 2, &mut rng).into_data();
            if k >= 2 {
                su.phi = sample::random_weighted_form(&base, k - 2, 0, 2, &mut rng).into_data();
            }
            su.rho = sample::random_weighted_form(&base, k - 1, 0, 2, &mut rng).into_data();
            let u = TractorForm::from_slots(0, &su);
            for a in 0..n {
                let lhs = ctx.tractor_metric(&v, &u).partial_derivative(a);
                let rhs = ctx
                    .tractor_metric(&ctx.tractor_nabla(a, &v), &u)
                    .add(&ctx.tractor_metric(&v, &ctx.tractor_nabla(a, &u)));
                assert_eq!(lhs, rhs, "k={k} a={a}");
            }
        }
    }

    #[test]
    fn curvature_vanishes_on_scope_scales() {
        for (n, seed) in [(4usize, 41u64), (6, 42)] {
            let ctx = curved(n, seed);
            assert!(ctx.weyl_is_zero(), "n={n}");
            assert!(ctx.cotton_is_zero(), "n={n}");
            assert!(tractor_curvature_vanishes(&ctx), "n={n}");
        }
        assert!(tractor_curvature_vanishes(&ScaleContext::round_sphere(6)));
    }

    #[test]
    fn weyl_tractor_vanishes_and_guards_dimension_four() {
        let ctx4 = curved(4, 51);
        assert!(matches!(
            w_tractor(&ctx4),
            Err(TractorError::DimensionUnsupported { n: 4, .. })
        ));
        let ctx6 = curved(6, 52);
        assert!(w_tractor_vanishes(&ctx6).unwrap());
    }
}
