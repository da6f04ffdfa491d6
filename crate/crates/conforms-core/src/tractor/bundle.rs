//! Form tractors in a scale: slot decomposition, the change-of-scale
//! transform, the tractor connection, splitting operators, the conformal
//! Laplacian, and the second-order tractor-D operator with its interior and
//! exterior forms.
//!
//! A rank-`k` tractor form over an `n`-dimensional base is stored as an
//! alternating `k`-tensor over `n + 2` letters: letter `0` is the `Y`
//! direction, letters `1..=n` are the `Z` directions (one per base
//! coordinate), letter `n + 1` is the `X` direction. In a fixed scale this
//! matches the familiar four-slot description: for `F` in `T^k[w]`,
//!
//! ```text
//! alpha in E^{k-1}[w+k]    component on  {y} + J
//! mu    in E^k[w+k]        component on  J
//! phi   in E^{k-2}[w+k-2]  component on  {y} + J + {x}, sign (-1)^{k-1}
//! rho   in E^{k-1}[w+k-2]  component on  J + {x},       sign (-1)^{k-1}
//! ```
//!
//! where `J` is a set of `Z` letters. The tractor pairing couples `Y` with
//! `X` and pairs `Z` letters through the inverse metric of the scale.

use crate::forms::{insert_with_sign, letters, remove_with_sign, FormData};
use crate::scalar::{rat, ScalarExpr};

use super::weighted::WeightedForm;
use super::{ScaleContext, TractorError};

/// Letter index of the `X` direction for an `n`-dimensional base.
fn x_letter(n: usize) -> usize {
    n + 1
}

/// `(-1)^{k-1}`, the stored sign of the two `x`-carrying slots.
fn slot_sign(k: usize) -> i64 {
    if (k - 1) % 2 == 1 {
        -1
    } else {
        1
    }
}

/// Remove one letter (no metric): the summand of an interior product.
pub(crate) fn contract_letter(data: &FormData, letter: usize) -> FormData {
    assert!(data.degree() >= 1, "cannot contract a scalar");
    let mut out = FormData::zero(data.vars(), data.dim(), data.degree() - 1);
    for (mask, e) in data.iter() {
        if let Some((m, s)) = remove_with_sign(mask, letter) {
            out.add_to(m, e.mul_int(s as i64));
        }
    }
    out
}

/// Wedge one letter from the left.
fn wedge_letter(data: &FormData, letter: usize) -> FormData {
    let mut out = FormData::zero(data.vars(), data.dim(), data.degree() + 1);
    for (mask, e) in data.iter() {
        if let Some((m, s)) = insert_with_sign(mask, letter) {
            out.add_to(m, e.mul_int(s as i64));
        }
    }
    out
}

/// The four-slot description of a rank-`k` tractor form; each slot is a base
/// form over `n` letters.
#[derive(Clone, Debug, PartialEq)]
pub struct Slots {
    pub alpha: FormData,
    pub mu: FormData,
    pub phi: FormData,
    pub rho: FormData,
}

impl Slots {
    pub fn zero(vars: &std::sync::Arc<crate::scalar::VarTable>, n: usize, k: usize) -> Slots {
        assert!(k >= 1, "slots describe rank >= 1");
        Slots {
            alpha: FormData::zero(vars, n, k - 1),
            mu: FormData::zero(vars, n, k),
            phi: FormData::zero(vars, n, k.saturating_sub(2)),
            rho: FormData::zero(vars, n, k - 1),
        }
    }
}

/// A rank-`k` tractor form of weight `w`, trivialized in a fixed scale.
#[derive(Clone, Debug, PartialEq)]
pub struct TractorForm {
    data: FormData,
    weight: i64,
}

impl TractorForm {
    pub fn new(data: FormData, weight: i64) -> Self {
        assert!(data.dim() >= 3, "tractor letters are y, z_1..z_n, x");
        TractorForm { data, weight }
    }

    pub fn zero(ctx: &ScaleContext, k: usize, weight: i64) -> Self {
        TractorForm {
            data: FormData::zero(ctx.vars(), ctx.n() + 2, k),
            weight,
        }
    }

    pub fn data(&self) -> &FormData {
        &self.data
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn degree(&self) -> usize {
        self.data.degree()
    }

    /// Base dimension `n`; the letter count is `n + 2`.
    pub fn n(&self) -> usize {
        self.data.dim() - 2
    }

    pub fn is_zero(&self) -> bool {
        self.data.is_zero()
    }

    pub fn add(&self, other: &TractorForm) -> TractorForm {
        assert_eq!(self.weight, other.weight, "weights must agree");
        TractorForm::new(self.data.add(&other.data), self.weight)
    }

    pub fn sub(&self, other: &TractorForm) -> TractorForm {
        assert_eq!(self.weight, other.weight, "weights must agree");
        TractorForm::new(self.data.sub(&other.data), self.weight)
    }

    pub fn neg(&self) -> TractorForm {
        TractorForm::new(self.data.neg(), self.weight)
    }

    pub fn scale(&self, c: &ScalarExpr) -> TractorForm {
        TractorForm::new(self.data.scale(c), self.weight)
    }

    pub fn scale_int(&self, c: i64) -> TractorForm {
        TractorForm::new(self.data.map(|_, e| e.mul_int(c)), self.weight)
    }

    /// Assemble from the four slots; `k` and `n` are read off the `mu` slot.
    pub fn from_slots(weight: i64, slots: &Slots) -> TractorForm {
        let k = slots.mu.degree();
        assert!(k >= 1, "rank zero tractors are plain densities");
        let n = slots.mu.dim();
        assert_eq!(slots.alpha.degree(), k - 1, "alpha slot degree");
        assert_eq!(slots.rho.degree(), k - 1, "rho slot degree");
        if k >= 2 {
            assert_eq!(slots.phi.degree(), k - 2, "phi slot degree");
        } else {
            assert!(slots.phi.is_zero(), "no phi slot at rank one");
        }
        let sign = slot_sign(k);
        let x = x_letter(n);
        let mut data = FormData::zero(slots.mu.vars(), n + 2, k);
        for (j, e) in slots.alpha.iter() {
            data.add_to((j << 1) | 1, e.clone());
        }
        for (j, e) in slots.mu.iter() {
            data.add_to(j << 1, e.clone());
        }
        if k >= 2 {
            for (j, e) in slots.phi.iter() {
                data.add_to((j << 1) | 1 | (1 << x), e.mul_int(sign));
            }
        }
        for (j, e) in slots.rho.iter() {
            data.add_to((j << 1) | (1 << x), e.mul_int(sign));
        }
        TractorForm::new(data, weight)
    }

    /// Decompose into the four slots.
    pub fn slots(&self) -> Slots {
        let k = self.degree();
        assert!(k >= 1, "rank zero tractors are plain densities");
        let n = self.n();
        let x = x_letter(n);
        let sign = slot_sign(k);
        let mut out = Slots::zero(self.data.vars(), n, k);
        for (mask, e) in self.data.iter() {
            let has_y = mask & 1 != 0;
            let has_x = mask & (1 << x) != 0;
            let j = (mask & !(1 | (1 << x))) >> 1;
            match (has_y, has_x) {
                (true, false) => out.alpha.add_to(j, e.clone()),
                (false, false) => out.mu.add_to(j, e.clone()),
                (true, true) => out.phi.add_to(j, e.mul_int(sign)),
                (false, true) => out.rho.add_to(j, e.mul_int(sign)),
            }
        }
        out
    }

    /// Tractor with only the `alpha` slot; rank is `deg(alpha) + 1`.
    pub fn insert_y(weight: i64, alpha: &FormData) -> TractorForm {
        let mut s = Slots::zero(alpha.vars(), alpha.dim(), alpha.degree() + 1);
        s.alpha = alpha.clone();
        Self::from_slots(weight, &s)
    }

    /// Tractor with only the `mu` slot; rank is `deg(mu)`.
    pub fn insert_z(weight: i64, mu: &FormData) -> TractorForm {
        let mut s = Slots::zero(mu.vars(), mu.dim(), mu.degree());
        s.mu = mu.clone();
        Self::from_slots(weight, &s)
    }

    /// Tractor with only the `phi` slot; rank is `deg(phi) + 2`.
    pub fn insert_w(weight: i64, phi: &FormData) -> TractorForm {
        let mut s = Slots::zero(phi.vars(), phi.dim(), phi.degree() + 2);
        s.phi = phi.clone();
        Self::from_slots(weight, &s)
    }

    /// Tractor with only the `rho` slot; rank is `deg(rho) + 1`.
    pub fn insert_x(weight: i64, rho: &FormData) -> TractorForm {
        let mut s = Slots::zero(rho.vars(), rho.dim(), rho.degree() + 1);
        s.rho = rho.clone();
        Self::from_slots(weight, &s)
    }

    /// Exterior multiplication by the canonical weight-one tractor `X`:
    /// wedge the `x` letter. `T^k[w] -> T^{k+1}[w+1]`.
    pub fn eps_x(&self) -> TractorForm {
        TractorForm::new(wedge_letter(&self.data, x_letter(self.n())), self.weight + 1)
    }

    /// Interior multiplication by `X`: through the pairing this contracts
    /// the `y` letter. `T^k[w] -> T^{k-1}[w+1]`.
    pub fn iota_x(&self) -> TractorForm {
        if self.degree() == 0 {
            return TractorForm::new(
                FormData::zero(self.data.vars(), self.data.dim(), 0),
                self.weight + 1,
            );
        }
        TractorForm::new(contract_letter(&self.data, 0), self.weight + 1)
    }

    /// Exterior multiplication by `Y`: wedge the `y` letter.
    /// `T^k[w] -> T^{k+1}[w-1]`.
    pub fn eps_y(&self) -> TractorForm {
        TractorForm::new(wedge_letter(&self.data, 0), self.weight - 1)
    }

    /// Interior multiplication by `Y`: contract the `x` letter.
    /// `T^k[w] -> T^{k-1}[w-1]`.
    pub fn iota_y(&self) -> TractorForm {
        if self.degree() == 0 {
            return TractorForm::new(
                FormData::zero(self.data.vars(), self.data.dim(), 0),
                self.weight - 1,
            );
        }
        TractorForm::new(
            contract_letter(&self.data, x_letter(self.n())),
            self.weight - 1,
        )
    }
}

impl ScaleContext {
    /// Relative factor `e^omega` and gradient from this scale to `to`.
    fn relative(&self, to: &ScaleContext) -> (ScalarExpr, Vec<ScalarExpr>) {
        let rel = to
            .exp_omega()
            .mul(&self.exp_omega().inverse().expect("scale factor is a unit"));
        let ups = (0..self.n())
            .map(|a| to.upsilon(a).sub(self.upsilon(a)))
            .collect();
        (rel, ups)
    }

    /// Re-express a tractor form in the splitting of the scale `to`. The
    /// letter frame changes by a unipotent matrix built from the relative
    /// gradient (raised indices use this scale's inverse metric) composed
    /// with the diagonal letter rescaling, and the whole form picks up the
    /// weight factor.
    pub fn tractor_transform(&self, to: &ScaleContext, f: &TractorForm) -> TractorForm {
        let n = self.n();
        let dim = n + 2;
        let x = x_letter(n);
        let vars = self.vars();
        let (rel, ups) = self.relative(to);
        let rel_inv = rel.inverse().expect("scale factor is a unit");
        let ginv = self.inverse_metric_factor();
        let mut ups_sq = ScalarExpr::zero(vars);
        for u in &ups {
            ups_sq = ups_sq.add(&u.mul(u));
        }
        // cols[in][out]: the image of the `in` coframe letter.
        let mut cols = vec![vec![ScalarExpr::zero(vars); dim]; dim];
        cols[0][0] = rel.clone();
        for i in 0..n {
            cols[0][1 + i] = rel.mul(&ups[i]);
        }
        cols[0][x] = rel_inv
            .mul(&ginv.mul(&ups_sq))
            .mul_rat(&rat(-1, 2));
        for j in 0..n {
            cols[1 + j][1 + j] = rel.clone();
            cols[1 + j][x] = rel_inv.mul(&ginv.mul(&ups[j])).neg();
        }
        cols[x][x] = rel_inv.clone();
        let wfac = rel.pow(f.weight()).expect("scale factor is a unit");
        let mut out = FormData::zero(vars, dim, f.degree());
        for (mask, comp) in f.data().iter() {
            let mut acc = FormData::zero(vars, dim, 0);
            acc.set(0, comp.mul(&wfac));
            // Wedge the last letter's column first so factors end up in
            // ascending order.
            for letter in letters(mask).collect::<Vec<_>>().into_iter().rev() {
                acc = acc.wedge1(&cols[letter]);
            }
            out = out.add(&acc);
        }
        TractorForm::new(out, f.weight())
    }

    /// Direction-`a` tractor connection. Besides the coordinate derivative,
    /// each letter mixes: `y` feeds `Schouten` into `z`, `z` feeds `-1` into
    /// `y` and the metric into `x`-sources, the Levi-Civita Christoffels act
    /// on the `z` block.
    pub fn tractor_nabla(&self, a: usize, f: &TractorForm) -> TractorForm {
        let n = self.n();
        let x = x_letter(n);
        let mut out = f.data().map(|_, e| e.partial_derivative(a));
        let push = |acc: &mut FormData, mask: u16, ell: usize, tgt: usize, c: &ScalarExpr, comp: &ScalarExpr| {
            if c.is_zero() {
                return;
            }
            let Some((rest, s1)) = remove_with_sign(mask, ell) else {
                return;
            };
            let Some((m, s2)) = insert_with_sign(rest, tgt) else {
                return;
            };
            acc.add_to(m, c.mul(comp).mul_int((s1 * s2) as i64));
        };
        for (mask, comp) in f.data().iter() {
            for ell in letters(mask) {
                if ell == 0 {
                    // y input: out z_b picks up P_{ab}.
                    for b in 0..n {
                        push(&mut out, mask, 0, 1 + b, self.schouten(a, b), comp);
                    }
                } else if ell == x {
                    // x input: out z_a picks up g_{aa} = e^{2 omega}.
                    push(&mut out, mask, x, 1 + a, self.metric_factor(), comp);
                } else {
                    let c = ell - 1;
                    // z_c input: out y picks up -delta_{ac}; the z block is
                    // the form Levi-Civita action -Gamma^c_{ab}; out x picks
                    // up -g^{cb} P_{ab} = -e^{-2 omega} P_{ac}.
                    if a == c {
                        let minus_one = ScalarExpr::one(self.vars()).neg();
                        push(&mut out, mask, ell, 0, &minus_one, comp);
                    }
                    for b in 0..n {
                        let coeff = self.gamma(c, a, b).neg();
                        push(&mut out, mask, ell, 1 + b, &coeff, comp);
                    }
                    let coeff = self
                        .inverse_metric_factor()
                        .mul(self.schouten(a, c))
                        .neg();
                    push(&mut out, mask, ell, x, &coeff, comp);
                }
            }
        }
        TractorForm::new(out, f.weight())
    }

    /// Trace Laplacian `nabla^p nabla_p` of the coupled tractor
    /// Levi-Civita connection; weight drops by two.
    pub fn tractor_trace_laplacian(&self, f: &TractorForm) -> TractorForm {
        let n = self.n();
        let mut out = FormData::zero(self.vars(), n + 2, f.degree());
        for a in 0..n {
            let first = self.tractor_nabla(a, f);
            let mut second = self.tractor_nabla(a, &first).into_parts().0;
            if !self.is_flat() {
                for b in 0..n {
                    let coeff = self.gamma(b, a, a);
                    if coeff.is_zero() {
                        continue;
                    }
                    second = second.sub(&self.tractor_nabla(b, f).data().scale(coeff));
                }
            }
            out = out.add(&second.scale(self.inverse_metric_factor()));
        }
        TractorForm::new(out, f.weight() - 2)
    }

    /// Tractor pairing of two rank-`k` tractor forms: `y` couples to `x`
    /// and the `z` block pairs through the inverse metric. Both arguments
    /// use this scale's trivialization.
    pub fn tractor_metric(&self, v: &TractorForm, u: &TractorForm) -> ScalarExpr {
        assert_eq!(v.degree(), u.degree(), "pair equal ranks");
        let n = self.n();
        let x = x_letter(n);
        let vars = self.vars();
        let partner = |ell: usize| -> usize {
            if ell == 0 {
                x
            } else if ell == x {
                0
            } else {
                ell
            }
        };
        let mut acc = ScalarExpr::zero(vars);
        for (mask, ve) in v.data().iter() {
            let ls: Vec<usize> = letters(mask).collect();
            let partners: Vec<usize> = ls.iter().map(|&l| partner(l)).collect();
            let mut tmask = 0u16;
            for &p in &partners {
                tmask |= 1 << p;
            }
            let Some(ue) = u.data().get(tmask) else {
                continue;
            };
            // Sign of the permutation sorting the partner sequence.
            let mut sign = 1i64;
            for i in 0..partners.len() {
                for j in (i + 1)..partners.len() {
                    if partners[i] > partners[j] {
                        sign = -sign;
                    }
                }
            }
            let zcount = ls.iter().filter(|&&l| l != 0 && l != x).count();
            let mut term = ve.mul(ue).mul_int(sign);
            for _ in 0..zcount {
                term = term.mul(self.inverse_metric_factor());
            }
            acc = acc.add(&term);
        }
        acc
    }

    /// The splitting operator on unweighted `k`-forms: `mu` goes into the
    /// `mu` slot and `delta mu / (n - 2k)` into the `rho` slot, producing a
    /// rank-`k` tractor of weight `-k`.
    pub fn splitting(&self, mu: &WeightedForm) -> Result<TractorForm, TractorError> {
        let k = mu.degree();
        let n = self.n();
        if k == 0 {
            return Err(TractorError::DegreeMismatch {
                expected: 1,
                found: 0,
            });
        }
        if mu.weight() != 0 {
            return Err(TractorError::WrongWeight {
                expected: 0,
                found: mu.weight(),
            });
        }
        if n == 2 * k {
            return Err(TractorError::DivisorZero { n, k });
        }
        let inv = rat(1, n as i64 - 2 * k as i64);
        let rho = self.delta(mu).data().scale_rat(&inv);
        let mut s = Slots::zero(self.vars(), n, k);
        s.mu = mu.data().clone();
        s.rho = rho;
        Ok(TractorForm::from_slots(-(k as i64), &s))
    }

    /// Conformal Laplacian on densities of weight `1 - n/2`:
    /// `-nabla^p nabla_p - (1 - n/2) J`.
    pub fn yamabe(&self, f: &WeightedForm) -> Result<WeightedForm, TractorError> {
        let n = self.n() as i64;
        if f.degree() != 0 {
            return Err(TractorError::DegreeMismatch {
                expected: 0,
                found: f.degree(),
            });
        }
        if f.weight() != 1 - n / 2 {
            return Err(TractorError::WrongWeight {
                expected: 1 - n / 2,
                found: f.weight(),
            });
        }
        let jterm = WeightedForm::new(
            f.data().scale(self.jay()).map(|_, e| e.mul_int(n / 2 - 1)),
            f.weight() - 2,
        );
        Ok(self.trace_laplacian(f).neg().add(&jterm))
    }

    /// Conformal Laplacian coupled to the tractor connection, on tractor
    /// forms of weight `1 - n/2`.
    pub fn yamabe_tractor(&self, f: &TractorForm) -> Result<TractorForm, TractorError> {
        let n = self.n() as i64;
        if f.weight() != 1 - n / 2 {
            return Err(TractorError::WrongWeight {
                expected: 1 - n / 2,
                found: f.weight(),
            });
        }
        let jterm = TractorForm::new(
            f.data().scale(self.jay()).map(|_, e| e.mul_int(n / 2 - 1)),
            f.weight() - 2,
        );
        Ok(self.tractor_trace_laplacian(f).neg().add(&jterm))
    }

    /// Second-order tractor-D operator on densities of weight `w`:
    /// `(n+2w-2) w Y f + (n+2w-2) Z^a nabla_a f - X (nabla^p nabla_p f
    /// + w J f)`, landing in rank-one tractors of weight `w - 1`.
    pub fn tractor_d_density(&self, f: &WeightedForm) -> Result<TractorForm, TractorError> {
        if f.degree() != 0 {
            return Err(TractorError::DegreeMismatch {
                expected: 0,
                found: f.degree(),
            });
        }
        let n = self.n();
        let w = f.weight();
        let c = n as i64 + 2 * w - 2;
        let mut s = Slots::zero(self.vars(), n, 1);
        s.alpha = f.data().map(|_, e| e.mul_int(c * w));
        let mut mu = FormData::zero(self.vars(), n, 1);
        for (_, e) in f.data().iter() {
            for a in 0..n {
                mu.add_to(1 << a, e.partial_derivative(a).mul_int(c));
            }
        }
        s.mu = mu;
        let lap = self.trace_laplacian(f);
        s.rho = lap
            .data()
            .add(&f.data().scale(self.jay()).map(|_, e| e.mul_int(w)))
            .neg();
        Ok(TractorForm::from_slots(w - 1, &s))
    }

    /// Interior form of the tractor-D operator:
    /// `iota(D) F = (n+2w-2) w iota(Y) F + (n+2w-2) g^{ab} iota(z_b)
    /// nabla_a F - iota(X) (nabla^p nabla_p + w J) F`, mapping
    /// `T^k[w] -> T^{k-1}[w-1]`. Contractions happen after differentiation.
    pub fn iota_d(&self, f: &TractorForm) -> TractorForm {
        let n = self.n();
        let w = f.weight();
        let c = n as i64 + 2 * w - 2;
        if f.degree() == 0 {
            return TractorForm::new(FormData::zero(self.vars(), n + 2, 0), w - 1);
        }
        // (n+2w-2) w iota(Y): contract the x letter.
        let mut out = contract_letter(f.data(), x_letter(n)).map(|_, e| e.mul_int(c * w));
        // (n+2w-2) g^{ab} contract z_b of nabla_a.
        for a in 0..n {
            let da = self.tractor_nabla(a, f);
            out = out.add(
                &contract_letter(da.data(), 1 + a)
                    .scale(self.inverse_metric_factor())
                    .map(|_, e| e.mul_int(c)),
            );
        }
        // -iota(X) (nabla^p nabla_p + w J): contract the y letter.
        let lap = self.tractor_trace_laplacian(f);
        let arg = lap
            .data()
            .add(&f.data().scale(self.jay()).map(|_, e| e.mul_int(w)));
        out = out.sub(&contract_letter(&arg, 0));
        TractorForm::new(out, w - 1)
    }

    /// Exterior form of the tractor-D operator:
    /// `eps(D) F = (n+2w-2) w eps(Y) F + (n+2w-2) eps(z_b) nabla_b F
    /// - eps(X) (nabla^p nabla_p + w J) F`, mapping `T^k[w] -> T^{k+1}[w-1]`.
    pub fn eps_d(&self, f: &TractorForm) -> TractorForm {
        let n = self.n();
        let w = f.weight();
        let c = n as i64 + 2 * w - 2;
        let mut out = wedge_letter(f.data(), 0).map(|_, e| e.mul_int(c * w));
        for b in 0..n {
            let db = self.tractor_nabla(b, f);
            out = out.add(&wedge_letter(db.data(), 1 + b).map(|_, e| e.mul_int(c)));
        }
        let lap = self.tractor_trace_laplacian(f);
        let arg = lap
            .data()
            .add(&f.data().scale(self.jay()).map(|_, e| e.mul_int(w)));
        out = out.sub(&wedge_letter(&arg, x_letter(n)));
        TractorForm::new(out, w - 1)
    }
}

impl TractorForm {
    fn into_parts(self) -> (FormData, i64) {
        (self.data, self.weight)
    }
}

/// Matrix route against the slot route for the change-of-scale transform:
/// `alpha -> alpha`, `mu -> mu + eps(Ups) alpha`, `phi -> phi
/// + iota(Ups) alpha`, `rho -> rho - iota(Ups) mu + eps(Ups) phi
/// + (eps iota - iota eps)(Ups) alpha / 2`, each slot then retrivialized by
/// its own weight. `iota` raises with the source scale's metric.
pub fn transform_matches_slot_laws(
    from: &ScaleContext,
    to: &ScaleContext,
    f: &TractorForm,
) -> bool {
    let k = f.degree();
    let w = f.weight();
    assert!(k >= 1);
    let rel = to
        .exp_omega()
        .mul(&from.exp_omega().inverse().expect("scale factor is a unit"));
    let ups: Vec<ScalarExpr> = (0..from.n())
        .map(|a| to.upsilon(a).sub(from.upsilon(a)))
        .collect();
    let raised: Vec<ScalarExpr> = ups
        .iter()
        .map(|u| u.mul(from.inverse_metric_factor()))
        .collect();
    let eps = |d: &FormData| d.wedge1(&ups);
    let iota = |d: &FormData| d.contract1(&raised);
    let s = f.slots();
    let mut hat = Slots::zero(from.vars(), from.n(), k);
    let up = rel.pow(w + k as i64).expect("scale factor is a unit");
    let down = rel.pow(w + k as i64 - 2).expect("scale factor is a unit");
    hat.alpha = s.alpha.scale(&up);
    hat.mu = s.mu.add(&eps(&s.alpha)).scale(&up);
    let mut rho_new = s.rho.sub(&iota(&s.mu));
    if k >= 2 {
        hat.phi = s.phi.add(&iota(&s.alpha)).scale(&down);
        rho_new = rho_new.add(&eps(&s.phi));
        rho_new = rho_new.add(&eps(&iota(&s.alpha)).scale_rat(&rat(1, 2)));
    }
    rho_new = rho_new.sub(&iota(&eps(&s.alpha)).scale_rat(&rat(1, 2)));
    hat.rho = rho_new.scale(&down);
    let expected = TractorForm::from_slots(w, &hat);
    from.tractor_transform(to, f) == expected
}

/// The four concrete projector transformation identities, checked through
/// the matrix transform `T` with the given slot data:
///
/// ```text
/// T(I_X rho)                                   = I_X(r^{w+k-2} rho)
/// T(I_Z mu + I_X(iota mu))                     = I_Z(r^{w+k} mu)
/// T(I_W phi - I_X(eps phi))                    = I_W(r^{w+k-2} phi)
/// T(I_Y al - I_Z(eps al) - I_W(iota al)
///    + I_X((eps iota - iota eps) al) / 2)      = I_Y(r^{w+k} al)
/// ```
pub fn projector_transform_check(
    from: &ScaleContext,
    to: &ScaleContext,
    w: i64,
    slots: &Slots,
) -> bool {
    let k = slots.mu.degree();
    let rel = to
        .exp_omega()
        .mul(&from.exp_omega().inverse().expect("scale factor is a unit"));
    let ups: Vec<ScalarExpr> = (0..from.n())
        .map(|a| to.upsilon(a).sub(from.upsilon(a)))
        .collect();
    let raised: Vec<ScalarExpr> = ups
        .iter()
        .map(|u| u.mul(from.inverse_metric_factor()))
        .collect();
    let eps = |d: &FormData| d.wedge1(&ups);
    let iota = |d: &FormData| d.contract1(&raised);
    let up = rel.pow(w + k as i64).expect("scale factor is a unit");
    let down = rel.pow(w + k as i64 - 2).expect("scale factor is a unit");
    let t = |f: &TractorForm| from.tractor_transform(to, f);

    let x_in = TractorForm::insert_x(w, &slots.rho);
    if t(&x_in) != TractorForm::insert_x(w, &slots.rho.scale(&down)) {
        return false;
    }

    let z_in = TractorForm::insert_z(w, &slots.mu)
        .add(&TractorForm::insert_x(w, &iota(&slots.mu)));
    if t(&z_in) != TractorForm::insert_z(w, &slots.mu.scale(&up)) {
        return false;
    }

    if k >= 2 {
        let w_in = TractorForm::insert_w(w, &slots.phi)
            .sub(&TractorForm::insert_x(w, &eps(&slots.phi)));
        if t(&w_in) != TractorForm::insert_w(w, &slots.phi.scale(&down)) {
            return false;
        }
    }

    let mut y_in = TractorForm::insert_y(w, &slots.alpha)
        .sub(&TractorForm::insert_z(w, &eps(&slots.alpha)));
    let mut corr = iota(&eps(&slots.alpha)).neg();
    if k >= 2 {
        y_in = y_in.sub(&TractorForm::insert_w(w, &iota(&slots.alpha)));
        corr = corr.add(&eps(&iota(&slots.alpha)));
    }
    y_in = y_in.add(&TractorForm::insert_x(w, &corr.scale_rat(&rat(1, 2))));
    t(&y_in) == TractorForm::insert_y(w, &slots.alpha.scale(&up))
}

/// The coordinate-direction curvature of the tractor connection:
/// `nabla_a nabla_b - nabla_b nabla_a` (the Christoffel corrections cancel
/// by symmetry). Zero exactly on every scale in scope.
pub fn connection_is_flat(ctx: &ScaleContext, f: &TractorForm) -> bool {
    let n = ctx.n();
    for a in 0..n {
        for b in 0..a {
            let ab = ctx.tractor_nabla(a, &ctx.tractor_nabla(b, f));
            let ba = ctx.tractor_nabla(b, &ctx.tractor_nabla(a, f));
            if ab != ba {
                return false;
            }
        }
    }
    true
}

/// Rank-one connection against its classical slotwise formula:
/// `nabla_a (al, mu_b, rho) = (nabla_a al - mu_a,
/// nabla_a mu_b + g_{ab} rho + P_{ab} al, nabla_a rho - P_a{}^b mu_b)`.
pub fn connection_matches_component_formula(ctx: &ScaleContext, f: &TractorForm) -> bool {
    assert_eq!(f.degree(), 1);
    let n = ctx.n();
    let vars = ctx.vars();
    let s = f.slots();
    let alpha = s.alpha.component(0);
    let rho = s.rho.component(0);
    for a in 0..n {
        let got = ctx.tractor_nabla(a, f).slots();
        let want_alpha = alpha
            .partial_derivative(a)
            .sub(&s.mu.component(1 << a));
        if got.alpha.component(0) != want_alpha {
            return false;
        }
        let lc = ctx.nabla_data(a, &s.mu);
        for b in 0..n {
            let mut want = lc.component(1 << b);
            if a == b {
                want = want.add(&ctx.metric_factor().mul(&rho));
            }
            want = want.add(&ctx.schouten(a, b).mul(&alpha));
            if got.mu.component(1 << b) != want {
                return false;
            }
        }
        let mut want_rho = rho.partial_derivative(a);
        for b in 0..n {
            let term = ctx
                .inverse_metric_factor()
                .mul(ctx.schouten(a, b))
                .mul(&s.mu.component(1 << b));
            want_rho = want_rho.sub(&term);
        }
        if got.rho.component(0) != want_rho {
            return false;
        }
        let _ = vars;
    }
    true
}

/// Derivatives of the canonical tractors: `nabla_a X = Z(g_{a.})`,
/// `nabla_a Y = Z(P_{a.})`, and for the lowered `Z(g_{b.})` the fully
/// coupled derivative (tractor connection plus Levi-Civita on the lower
/// index) equals `-P_{ab} X - g_{ab} Y`.
pub fn constant_tractor_derivatives_hold(ctx: &ScaleContext) -> bool {
    let n = ctx.n();
    let vars = ctx.vars();
    let one = FormData::zero(vars, n, 0).add(&{
        let mut f = FormData::zero(vars, n, 0);
        f.set(0, ScalarExpr::one(vars));
        f
    });
    let x_tr = TractorForm::insert_x(1, &one);
    let y_tr = TractorForm::insert_y(-1, &one);
    let row = |a: usize, which: &dyn Fn(usize, usize) -> ScalarExpr| -> FormData {
        let mut f = FormData::zero(vars, n, 1);
        for b in 0..n {
            f.add_to(1 << b, which(a, b));
        }
        f
    };
    let metric_row = |a: usize, b: usize| -> ScalarExpr {
        if a == b {
            ctx.metric_factor().clone()
        } else {
            ScalarExpr::zero(vars)
        }
    };
    let schouten_row = |a: usize, b: usize| ctx.schouten(a, b).clone();
    for a in 0..n {
        let got = ctx.tractor_nabla(a, &x_tr);
        let want = TractorForm::insert_z(1, &row(a, &metric_row));
        if got != want {
            return false;
        }
        let got = ctx.tractor_nabla(a, &y_tr);
        let want = TractorForm::insert_z(-1, &row(a, &schouten_row));
        if got != want {
            return false;
        }
    }
    // Lowered Z as a one-form of rank-one tractors.
    let z_low: Vec<TractorForm> = (0..n)
        .map(|b| TractorForm::insert_z(1, &row(b, &metric_row)))
        .collect();
    for a in 0..n {
        for b in 0..n {
            let mut full = ctx.tractor_nabla(a, &z_low[b]).into_parts().0;
            for c in 0..n {
                let g = ctx.gamma(c, a, b);
                if !g.is_zero() {
                    full = full.sub(&z_low[c].data().scale(g));
                }
            }
            let mut want = x_tr.data().scale(&ctx.schouten(a, b).neg());
            if a == b {
                want = want.sub(&y_tr.data().scale(ctx.metric_factor()));
            }
            if full != want {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::super::sample;
    use super::*;
    use crate::base::BaseContext;

    fn curved(n: usize, seed: u64) -> (ScaleContext, ScaleContext) {
        let ctx = ScaleContext::flat(n);
        let by = sample::random_scale(ctx.base(), &mut sample::rng_for(seed));
        let hat = ctx.rescaled(&by);
        (ctx, hat)
    }

    fn random_slots(n: usize, k: usize, seed: u64) -> Slots {
        let base = BaseContext::new(n);
        let mut rng = sample::rng_for(seed);
        let mut s = Slots::zero(base.vars(), n, k);
        s.alpha = sample::random_weighted_form(&base, k - 1, 0, 2, &mut rng).into_data();
        s.mu = sample::random_weighted_form(&base, k, 0, 2, &mut rng).into_data();
        if k >= 2 {
            s.phi = sample::random_weighted_form(&base, k - 2, 0, 2, &mut rng).into_data();
        }
        s.rho = sample::random_weighted_form(&base, k - 1, 0, 2, &mut rng).into_data();
        s
    }

    #[test]
    fn slots_round_trip() {
        for (n, k) in [(4usize, 1usize), (4, 2), (4, 3), (6, 2)] {
            let s = random_slots(n, k, 100 + (n + k) as u64);
            let f = TractorForm::from_slots(-2, &s);
            assert_eq!(f.slots(), s, "n={n} k={k}");
        }
    }

    #[test]
    fn transform_is_identity_at_same_scale() {
        let ctx = ScaleContext::round_sphere(4);
        let f = TractorForm::from_slots(1, &random_slots(4, 2, 7));
        assert_eq!(ctx.tractor_transform(&ctx, &f), f);
    }

    #[test]
    fn transform_composes() {
        let n = 4;
        let flat = ScaleContext::flat(n);
        let mid = ScaleContext::round_sphere(n);
        let far = mid.rescaled(&sample::random_scale(flat.base(), &mut sample::rng_for(15)));
        for k in [1usize, 2] {
            let f = TractorForm::from_slots(1, &random_slots(n, k, 200 + k as u64));
            let two_step = mid.tractor_transform(&far, &flat.tractor_transform(&mid, &f));
            let direct = flat.tractor_transform(&far, &f);
            assert_eq!(two_step, direct, "k={k}");
        }
    }

    #[test]
    fn transform_matches_slot_laws_all_ranks() {
        for (n, k, w, seed) in [
            (4usize, 1usize, 0i64, 301u64),
            (4, 2, -1, 302),
            (4, 3, 2, 303),
            (6, 2, 0, 304),
        ] {
            let (ctx, hat) = curved(n, seed);
            let f = TractorForm::from_slots(w, &random_slots(n, k, seed + 50));
            assert!(transform_matches_slot_laws(&ctx, &hat, &f), "n={n} k={k}");
        }
    }

    #[test]
    fn projector_transformation_identities() {
        for (n, k, w, seed) in [(4usize, 1usize, -1i64, 401u64), (4, 2, 0, 402), (6, 2, 1, 403)]
        {
            let (ctx, hat) = curved(n, seed);
            let slots = random_slots(n, k, seed + 60);
            assert!(projector_transform_check(&ctx, &hat, w, &slots), "n={n} k={k}");
        }
    }

    #[test]
    fn transform_between_two_curved_scales() {
        let n = 4;
        let sphere = ScaleContext::round_sphere(n);
        let hat = sphere.rescaled(&sample::random_scale(sphere.base(), &mut sample::rng_for(17)));
        let f = TractorForm::from_slots(0, &random_slots(n, 2, 500));
        assert!(transform_matches_slot_laws(&sphere, &hat, &f));
    }

    #[test]
    fn metric_is_invariant_and_matches_rank_one_formula() {
        let n = 4;
        let (ctx, hat) = curved(n, 601);
        for (k, w, seed) in [(1usize, 0i64, 611u64), (2, -1, 612)] {
            let v = TractorForm::from_slots(w, &random_slots(n, k, seed));
            let u = TractorForm::from_slots(w, &random_slots(n, k, seed + 5));
            let here = ctx.tractor_metric(&v, &u);
            let there = hat.tractor_metric(
                &ctx.tractor_transform(&hat, &v),
                &ctx.tractor_transform(&hat, &u),
            );
            let rel = hat
                .exp_omega()
                .mul(&ctx.exp_omega().inverse().unwrap());
            let want = here.mul(&rel.pow(2 * w).unwrap());
            assert_eq!(there, want, "k={k}");
        }
        // Rank one: h(V, U) = g^{ab} mu_a nu_b + al xi + rho la.
        let v = TractorForm::from_slots(0, &random_slots(n, 1, 620));
        let u = TractorForm::from_slots(0, &random_slots(n, 1, 621));
        let (sv, su) = (v.slots(), u.slots());
        let mut want = sv
            .alpha
            .component(0)
            .mul(&su.rho.component(0))
            .add(&sv.rho.component(0).mul(&su.alpha.component(0)));
        for a in 0..n {
            want = want.add(
                &ctx.inverse_metric_factor()
                    .mul(&sv.mu.component(1 << a))
                    .mul(&su.mu.component(1 << a)),
            );
        }
        assert_eq!(ctx.tractor_metric(&v, &u), want);
    }

    #[test]
    fn connection_is_flat_on_scope_scales() {
        for (n, k, seed) in [(4usize, 1usize, 701u64), (4, 2, 702), (6, 1, 703)] {
            let (_, hat) = curved(n, seed);
            let f = TractorForm::from_slots(0, &random_slots(n, k, seed + 7));
            assert!(connection_is_flat(&hat, &f), "n={n} k={k}");
        }
    }

    #[test]
    fn connection_matches_rank_one_component_formula() {
        for n in [4usize, 6] {
            let (_, hat) = curved(n, 801 + n as u64);
            let f = TractorForm::from_slots(2, &random_slots(n, 1, 810 + n as u64));
            assert!(connection_matches_component_formula(&hat, &f), "n={n}");
        }
    }

    #[test]
    fn canonical_tractor_derivatives() {
        for n in [4usize, 6] {
            let (_, hat) = curved(n, 901 + n as u64);
            assert!(constant_tractor_derivatives_hold(&hat), "n={n}");
            assert!(constant_tractor_derivatives_hold(&ScaleContext::round_sphere(n)));
        }
    }

    #[test]
    fn splitting_guards_and_invariance() {
        let base = BaseContext::new(4);
        let ctx = ScaleContext::flat(4);
        let mut rng = sample::rng_for(41);
        // n = 2k is rejected.
        let mid = sample::random_weighted_form(&base, 2, 0, 2, &mut rng);
        assert!(matches!(
            ctx.splitting(&mid),
            Err(TractorError::DivisorZero { n: 4, k: 2 })
        ));
        let weighted = sample::random_weighted_form(&base, 1, 1, 2, &mut rng);
        assert!(matches!(
            ctx.splitting(&weighted),
            Err(TractorError::WrongWeight { expected: 0, found: 1 })
        ));
        // Invariance: transform of the splitting equals the splitting in the
        // rescaled context (the input form is unweighted, so it is shared).
        for (n, k, seed) in [(4usize, 1usize, 42u64), (6, 1, 43), (6, 2, 44)] {
            let base = BaseContext::new(n);
            let (ctx, hat) = curved(n, seed);
            let mu = sample::random_weighted_form(&base, k, 0, 2, &mut sample::rng_for(seed + 1));
            let here = ctx.splitting(&mu).unwrap();
            let there = hat.splitting(&mu).unwrap();
            assert_eq!(ctx.tractor_transform(&hat, &here), there, "n={n} k={k}");
        }
    }

    #[test]
    fn yamabe_guards_and_invariance() {
        let base = BaseContext::new(4);
        let ctx = ScaleContext::flat(4);
        let mut rng = sample::rng_for(51);
        let wrong = sample::random_weighted_form(&base, 0, 0, 2, &mut rng);
        assert!(matches!(
            ctx.yamabe(&wrong),
            Err(TractorError::WrongWeight { expected: -1, found: 0 })
        ));
        for n in [4usize, 6] {
            let base = BaseContext::new(n);
            let w = 1 - n as i64 / 2;
            let (ctx, hat) = curved(n, 52 + n as u64);
            let f = sample::random_weighted_form(&base, 0, w, 2, &mut sample::rng_for(53));
            let rel = hat.exp_omega().mul(&ctx.exp_omega().inverse().unwrap());
            let f_hat = f.retrivialized(&rel);
            let lhs = hat.yamabe(&f_hat).unwrap();
            let rhs = ctx.yamabe(&f).unwrap().retrivialized(&rel);
            assert_eq!(lhs, rhs, "n={n}");
        }
    }

    #[test]
    fn yamabe_is_strongly_invariant_on_tractors() {
        let n = 4;
        let (ctx, hat) = curved(n, 61);
        let w = 1 - n as i64 / 2;
        let f = TractorForm::from_slots(w, &random_slots(n, 1, 62));
        let lhs = hat.yamabe_tractor(&ctx.tractor_transform(&hat, &f)).unwrap();
        let rhs = ctx.tractor_transform(&hat, &ctx.yamabe_tractor(&f).unwrap());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn tractor_d_is_invariant_and_collapses_at_critical_weight() {
        for (n, w, seed) in [(4usize, 2i64, 71u64), (4, -1, 72), (6, 1, 73)] {
            let base = BaseContext::new(n);
            let (ctx, hat) = curved(n, seed);
            let f = sample::random_weighted_form(&base, 0, w, 2, &mut sample::rng_for(seed + 2));
            let rel = hat.exp_omega().mul(&ctx.exp_omega().inverse().unwrap());
            let lhs = hat.tractor_d_density(&f.retrivialized(&rel)).unwrap();
            let rhs = ctx.tractor_transform(&hat, &ctx.tractor_d_density(&f).unwrap());
            assert_eq!(lhs, rhs, "n={n} w={w}");
        }
        // At w = 1 - n/2 the operator is X times the conformal Laplacian.
        for n in [4usize, 6] {
            let base = BaseContext::new(n);
            let w = 1 - n as i64 / 2;
            let ctx = ScaleContext::round_sphere(n);
            let f = sample::random_weighted_form(&base, 0, w, 2, &mut sample::rng_for(74));
            let d = ctx.tractor_d_density(&f).unwrap();
            let box_f = ctx.yamabe(&f).unwrap();
            let want = TractorForm::insert_x(w - 1, box_f.data());
            assert_eq!(d, want, "n={n}");
        }
    }

    #[test]
    fn x_and_y_multiplications_anticommute_correctly() {
        let f = TractorForm::from_slots(0, &random_slots(4, 2, 81));
        // eps(X)^2 = 0 and iota(X)^2 = 0.
        assert!(f.eps_x().eps_x().is_zero());
        assert!(f.iota_x().iota_x().is_zero());
        // {eps(X), iota(X)} = h(X, X) = 0 since X is null.
        assert!(f.eps_x().iota_x().add(&f.iota_x().eps_x()).is_zero());
        // {eps(X), iota(Y)} = h(X, Y) = 1.
        let anti = f.eps_x().iota_y().add(&f.iota_y().eps_x());
        assert_eq!(anti.data(), f.data());
    }

    #[test]
    fn tractor_d_interior_and_exterior_identities() {
        // iota(D)^2 = 0, eps(D)^2 = 0, {iota(D), eps(D)} = 0.
        let n = 4;
        let (_, hat) = curved(n, 91);
        for (k, w, seed) in [(1usize, 2i64, 92u64), (2, 0, 93)] {
            let f = TractorForm::from_slots(w, &random_slots(n, k, seed));
            assert!(hat.iota_d(&hat.iota_d(&f)).is_zero(), "iota^2 k={k}");
            assert!(hat.eps_d(&hat.eps_d(&f)).is_zero(), "eps^2 k={k}");
            let anti = hat.iota_d(&hat.eps_d(&f)).add(&hat.eps_d(&hat.iota_d(&f)));
            assert!(anti.is_zero(), "anticommutator k={k}");
        }
    }
}
