//! Rational expressions with factored denominators and a formal exponential
//! factor.
//!
//! A `ScalarExpr` is a finite sum `sum_k t^k * num_k / den_k` where `t` is a
//! formal unit `exp(omega)` known only through its logarithmic gradient, and
//! each `den_k` is a product of canonical atoms. Zero-testing is exact: an
//! expression is zero exactly when it has no terms, because numerators are
//! always reduced against their denominator atoms and the factor is a unit.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use super::poly::{same_table, Poly, VarTable};
use super::{Rat, ScalarError};

/// Declaration of the formal factor `t = exp(omega)`: its display name and the
/// logarithmic gradient `d omega` as one factor-free expression per coordinate.
#[derive(Debug)]
pub struct FactorSpec {
    name: String,
    vars: Arc<VarTable>,
    grad: Vec<ScalarExpr>,
}

impl FactorSpec {
    pub fn new(name: &str, vars: &Arc<VarTable>, grad: Vec<ScalarExpr>) -> Arc<Self> {
        assert_eq!(
            grad.len(),
            vars.n_coords(),
            "factor gradient must list one entry per coordinate"
        );
        for g in &grad {
            assert!(
                g.factor.is_none(),
                "factor gradient entries must be factor-free"
            );
            assert!(same_table(g.vars(), vars), "factor gradient table mismatch");
        }
        Arc::new(FactorSpec {
            name: name.to_owned(),
            vars: Arc::clone(vars),
            grad,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    /// Logarithmic derivative of the factor in the given coordinate.
    pub fn grad(&self, coord: usize) -> &ScalarExpr {
        &self.grad[coord]
    }

    /// The scalar `c` with `X(omega) = c` for the Euler vector
    /// `X = sum_a x_a d/dx_a`, when that derivative is a rational constant.
    pub fn euler_weight(&self) -> Option<Rat> {
        let mut acc = ScalarExpr::zero(&self.vars);
        for a in 0..self.vars.n_coords() {
            let xa = ScalarExpr::var(&self.vars, a);
            acc = acc.add(&xa.mul(&self.grad[a]));
        }
        acc.as_rat_const()
    }
}

impl PartialEq for FactorSpec {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.vars == other.vars && self.grad == other.grad
    }
}

fn same_factor(a: &Option<Arc<FactorSpec>>, b: &Option<Arc<FactorSpec>>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => Arc::ptr_eq(x, y) || x == y,
        _ => false,
    }
}

/// Merges the factors of two operands; only the zero-power part of an operand
/// may be factor-free.
fn merge_factor(
    a: &Option<Arc<FactorSpec>>,
    b: &Option<Arc<FactorSpec>>,
) -> Option<Arc<FactorSpec>> {
    match (a, b) {
        (None, None) => None,
        (Some(x), None) => Some(Arc::clone(x)),
        (None, Some(y)) => Some(Arc::clone(y)),
        (Some(x), Some(y)) => {
            assert!(
                Arc::ptr_eq(x, y) || x == y,
                "operands carry different formal factors: `{}` vs `{}`",
                x.name(),
                y.name()
            );
            Some(Arc::clone(x))
        }
    }
}

/// One reduced fraction: numerator polynomial over a product of atom powers.
///
/// Atoms are primitive integer polynomials with positive leading coefficient,
/// sorted and distinct; the numerator is not divisible by any atom. Atoms are
/// not factored further, so two equal fractions may factor their denominator
/// differently; equality therefore cross-multiplies, which is still exact.
#[derive(Clone, Debug)]
pub struct RatFunc {
    num: Poly,
    den: Vec<(Poly, u32)>,
}

impl PartialEq for RatFunc {
    fn eq(&self, other: &Self) -> bool {
        if self.den == other.den {
            return self.num == other.num;
        }
        let da = den_poly(self.vars(), &self.den);
        let db = den_poly(other.vars(), &other.den);
        self.num.mul(&db) == other.num.mul(&da)
    }
}

impl Eq for RatFunc {}

/// Splits a nonzero polynomial into a rational scale and canonical atoms:
/// `p = scale * prod atom_i^{e_i}`. Monomial content becomes per-variable
/// atoms; the remaining primitive cofactor is one composite atom.
fn atomize(p: &Poly) -> (Rat, Vec<(Poly, u32)>) {
    assert!(!p.is_zero(), "cannot atomize the zero polynomial");
    let (scale, prim) = p.primitive_part();
    let (content, cofactor) = prim.monomial_content();
    let vars = p.vars();
    let mut atoms: Vec<(Poly, u32)> = Vec::new();
    for (idx, &e) in content.exponents().iter().enumerate() {
        if e > 0 {
            atoms.push((Poly::var(vars, idx), e as u32));
        }
    }
    if cofactor.as_constant().is_none() {
        atoms.push((cofactor, 1));
    }
    atoms.sort_by(|a, b| a.0.cmp(&b.0));
    (scale, atoms)
}

/// Merges two sorted atom lists, adding exponents of equal atoms.
fn den_mul(a: &[(Poly, u32)], b: &[(Poly, u32)]) -> Vec<(Poly, u32)> {
    let mut out: Vec<(Poly, u32)> = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0.clone(), a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Product of `den` atoms raised to their powers, as a polynomial.
fn den_poly(vars: &Arc<VarTable>, den: &[(Poly, u32)]) -> Poly {
    let mut out = Poly::one(vars);
    for (atom, e) in den {
        out = out.mul(&atom.pow(*e));
    }
    out
}

impl RatFunc {
    pub fn zero(vars: &Arc<VarTable>) -> Self {
        RatFunc {
            num: Poly::zero(vars),
            den: Vec::new(),
        }
    }

    pub fn from_poly(num: Poly) -> Self {
        RatFunc {
            num,
            den: Vec::new(),
        }
    }

    /// Builds `num / prod den_i^{e_i}` and normalizes.
    pub fn new(num: Poly, den: Vec<(Poly, u32)>) -> Self {
        let mut canonical: Vec<(Poly, u32)> = Vec::new();
        let mut num = num;
        for (p, e) in den {
            assert!(e > 0, "denominator exponent must be positive");
            let (scale, atoms) = atomize(&p);
            num = num.mul_rat(&scale.recip().pow(e as i32));
            for (atom, ae) in atoms {
                canonical = den_mul(&canonical, &[(atom, ae * e)]);
            }
        }
        let mut rf = RatFunc {
            num,
            den: canonical,
        };
        rf.reduce();
        rf
    }

    /// Cancels atoms dividing the numerator; clears the denominator at zero.
    fn reduce(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            return;
        }
        let mut den = std::mem::take(&mut self.den);
        for (atom, e) in den.iter_mut() {
            while *e > 0 {
                match self.num.try_div(atom) {
                    Some(q) => {
                        self.num = q;
                        *e -= 1;
                    }
                    None => break,
                }
            }
        }
        den.retain(|(_, e)| *e > 0);
        self.den = den;
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &[(Poly, u32)] {
        &self.den
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        self.num.vars()
    }

    pub fn as_constant(&self) -> Option<Rat> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn add(&self, other: &RatFunc) -> RatFunc {
        // Common denominator: max exponent per atom.
        let mut common: Vec<(Poly, u32)> = self.den.clone();
        for (atom, e) in &other.den {
            match common.binary_search_by(|c| c.0.cmp(atom)) {
                Ok(i) => common[i].1 = common[i].1.max(*e),
                Err(i) => common.insert(i, (atom.clone(), *e)),
            }
        }
        let lift = |rf: &RatFunc| -> Poly {
            let mut num = rf.num.clone();
            for (atom, ce) in &common {
                let have = rf
                    .den
                    .binary_search_by(|c| c.0.cmp(atom))
                    .map(|i| rf.den[i].1)
                    .unwrap_or(0);
                if *ce > have {
                    num = num.mul(&atom.pow(ce - have));
                }
            }
            num
        };
        let num = lift(self).add(&lift(other));
        let mut rf = RatFunc { num, den: common };
        rf.reduce();
        rf
    }

    pub fn neg(&self) -> RatFunc {
        RatFunc {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &RatFunc) -> RatFunc {
        let mut rf = RatFunc {
            num: self.num.mul(&other.num),
            den: den_mul(&self.den, &other.den),
        };
        rf.reduce();
        rf
    }

    pub fn mul_rat(&self, c: &Rat) -> RatFunc {
        if c.is_zero() {
            return RatFunc::zero(self.vars());
        }
        RatFunc {
            num: self.num.mul_rat(c),
            den: self.den.clone(),
        }
    }

    pub fn inverse(&self) -> Result<RatFunc, ScalarError> {
        if self.num.is_zero() {
            return Err(ScalarError::NonInvertible {
                expr: "0".to_owned(),
            });
        }
        let (scale, atoms) = atomize(&self.num);
        let num = den_poly(self.vars(), &self.den).mul_rat(&scale.recip());
        let mut rf = RatFunc { num, den: atoms };
        rf.reduce();
        Ok(rf)
    }

    /// Partial derivative in a coordinate, by the quotient rule.
    pub fn derivative(&self, coord: usize) -> RatFunc {
        if self.den.is_empty() {
            return RatFunc::from_poly(self.num.derivative(coord));
        }
        // d(p / prod q_i^{e_i}) has denominator prod q_i^{e_i + 1} and
        // numerator dp * prod q_i - p * sum_i e_i dq_i * prod_{j != i} q_j.
        let vars = self.vars();
        let mut prod_all = Poly::one(vars);
        for (q, _) in &self.den {
            prod_all = prod_all.mul(q);
        }
        let mut num = self.num.derivative(coord).mul(&prod_all);
        for (i, (qi, ei)) in self.den.iter().enumerate() {
            let dq = qi.derivative(coord);
            if dq.is_zero() {
                continue;
            }
            let mut prod_others = Poly::one(vars);
            for (j, (qj, _)) in self.den.iter().enumerate() {
                if j != i {
                    prod_others = prod_others.mul(qj);
                }
            }
            let coeff = Rat::from_integer((*ei).into());
            num = num.sub(&self.num.mul(&dq).mul(&prod_others).mul_rat(&coeff));
        }
        let den = self.den.iter().map(|(q, e)| (q.clone(), e + 1)).collect();
        let mut rf = RatFunc { num, den };
        rf.reduce();
        rf
    }

    /// Degree of the fraction when numerator and all atoms are coordinate
    /// homogeneous; `None` otherwise. Zero fraction reports degree 0.
    pub fn homogeneous_coord_degree(&self) -> Option<i64> {
        let mut deg = self.num.homogeneous_coord_degree()?;
        for (atom, e) in &self.den {
            deg -= atom.homogeneous_coord_degree()? * (*e as i64);
        }
        Some(deg)
    }
}

/// Exact rational expression, optionally multiplied by integer powers of the
/// formal factor.
#[derive(Clone, Debug)]
pub struct ScalarExpr {
    vars: Arc<VarTable>,
    factor: Option<Arc<FactorSpec>>,
    terms: BTreeMap<i64, RatFunc>,
}

impl PartialEq for ScalarExpr {
    fn eq(&self, other: &Self) -> bool {
        same_table(&self.vars, &other.vars)
            && same_factor(&self.factor, &other.factor)
            && self.terms == other.terms
    }
}

impl Eq for ScalarExpr {}

impl ScalarExpr {
    // ---- Constructors ----

    pub fn zero(vars: &Arc<VarTable>) -> Self {
        ScalarExpr {
            vars: Arc::clone(vars),
            factor: None,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_ratfunc(rf: RatFunc) -> Self {
        let vars = Arc::clone(rf.vars());
        let mut terms = BTreeMap::new();
        if !rf.is_zero() {
            terms.insert(0, rf);
        }
        ScalarExpr {
            vars,
            factor: None,
            terms,
        }
    }

    pub fn from_poly(p: Poly) -> Self {
        ScalarExpr::from_ratfunc(RatFunc {
            num: p,
            den: Vec::new(),
        })
    }

    pub fn constant(vars: &Arc<VarTable>, c: Rat) -> Self {
        ScalarExpr::from_poly(Poly::constant(vars, c))
    }

    pub fn int(vars: &Arc<VarTable>, v: i64) -> Self {
        ScalarExpr::from_poly(Poly::int(vars, v))
    }

    pub fn one(vars: &Arc<VarTable>) -> Self {
        ScalarExpr::int(vars, 1)
    }

    pub fn var(vars: &Arc<VarTable>, idx: usize) -> Self {
        ScalarExpr::from_poly(Poly::var(vars, idx))
    }

    pub fn var_named(vars: &Arc<VarTable>, name: &str) -> Self {
        ScalarExpr::from_poly(Poly::var_named(vars, name))
    }

    /// `num / den` as an expression.
    pub fn fraction(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        ScalarExpr::from_ratfunc(RatFunc::new(num, vec![(den, 1)]))
    }

    /// The pure factor power `t^k`.
    pub fn factor_power_of(spec: &Arc<FactorSpec>, k: i64) -> Self {
        let vars = Arc::clone(spec.vars());
        let mut terms = BTreeMap::new();
        terms.insert(k, RatFunc::from_poly(Poly::one(&vars)));
        let mut e = ScalarExpr {
            vars,
            factor: Some(Arc::clone(spec)),
            terms,
        };
        e.normalize();
        e
    }

    fn normalize(&mut self) {
        self.terms.retain(|_, rf| !rf.is_zero());
        let needs_factor = self.terms.keys().any(|&k| k != 0);
        if !needs_factor {
            self.factor = None;
        } else {
            assert!(
                self.factor.is_some(),
                "nonzero factor power without a factor declaration"
            );
        }
    }

    // ---- Accessors ----

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    pub fn factor(&self) -> Option<&Arc<FactorSpec>> {
        self.factor.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &RatFunc)> {
        self.terms.iter().map(|(k, rf)| (*k, rf))
    }

    /// The factor exponent when the expression is a single `t`-power times a
    /// rational function. Zero exponent for factor-free expressions.
    pub fn factor_power(&self) -> Option<i64> {
        match self.terms.len() {
            0 => Some(0),
            1 => self.terms.keys().next().copied(),
            _ => None,
        }
    }

    /// The underlying fraction when the expression is factor-free.
    pub fn as_ratfunc(&self) -> Option<&RatFunc> {
        if self.factor.is_some() {
            return None;
        }
        match self.terms.len() {
            0 => None, // zero: caller should use is_zero
            1 => self.terms.get(&0),
            _ => unreachable!("factor-free expression with several powers"),
        }
    }

    pub fn as_rat_const(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            if let Some(rf) = self.terms.get(&0) {
                return rf.as_constant();
            }
        }
        None
    }

    pub fn is_one(&self) -> bool {
        self.as_rat_const().map(|c| c.is_one()).unwrap_or(false)
    }

    /// The expression as a polynomial, if no denominators or factors occur.
    pub fn as_poly(&self) -> Option<&Poly> {
        if self.terms.is_empty() {
            return None;
        }
        self.as_ratfunc().and_then(|rf| {
            if rf.den().is_empty() {
                Some(rf.num())
            } else {
                None
            }
        })
    }

    // ---- Arithmetic ----

    pub fn add(&self, other: &ScalarExpr) -> ScalarExpr {
        assert!(
            same_table(&self.vars, &other.vars),
            "variable table mismatch"
        );
        let factor = merge_factor(&self.factor, &other.factor);
        let mut terms = self.terms.clone();
        for (k, rf) in &other.terms {
            match terms.entry(*k) {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert(rf.clone());
                }
                std::collections::btree_map::Entry::Occupied(mut o) => {
                    let sum = o.get().add(rf);
                    if sum.is_zero() {
                        o.remove();
                    } else {
                        *o.get_mut() = sum;
                    }
                }
            }
        }
        let mut e = ScalarExpr {
            vars: Arc::clone(&self.vars),
            factor,
            terms,
        };
        e.normalize();
        e
    }

    pub fn sub(&self, other: &ScalarExpr) -> ScalarExpr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> ScalarExpr {
        let mut out = self.clone();
        for rf in out.terms.values_mut() {
            *rf = rf.neg();
        }
        out
    }

    pub fn mul(&self, other: &ScalarExpr) -> ScalarExpr {
        assert!(
            same_table(&self.vars, &other.vars),
            "variable table mismatch"
        );
        let factor = merge_factor(&self.factor, &other.factor);
        let mut terms: BTreeMap<i64, RatFunc> = BTreeMap::new();
        for (ka, ra) in &self.terms {
            for (kb, rb) in &other.terms {
                let k = ka + kb;
                let prod = ra.mul(rb);
                if prod.is_zero() {
                    continue;
                }
                match terms.entry(k) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(prod);
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        let sum = o.get().add(&prod);
                        if sum.is_zero() {
                            o.remove();
                        } else {
                            *o.get_mut() = sum;
                        }
                    }
                }
            }
        }
        let mut e = ScalarExpr {
            vars: Arc::clone(&self.vars),
            factor,
            terms,
        };
        e.normalize();
        e
    }

    pub fn mul_rat(&self, c: &Rat) -> ScalarExpr {
        if c.is_zero() {
            return ScalarExpr::zero(&self.vars);
        }
        let mut out = self.clone();
        for rf in out.terms.values_mut() {
            *rf = rf.mul_rat(c);
        }
        out
    }

    pub fn mul_int(&self, v: i64) -> ScalarExpr {
        self.mul_rat(&super::rat_int(v))
    }

    pub fn inverse(&self) -> Result<ScalarExpr, ScalarError> {
        if self.terms.len() != 1 {
            return Err(ScalarError::NonInvertible {
                expr: self.to_string(),
            });
        }
        let (k, rf) = self.terms.iter().next().unwrap();
        let inv = rf.inverse()?;
        let mut terms = BTreeMap::new();
        terms.insert(-k, inv);
        let mut e = ScalarExpr {
            vars: Arc::clone(&self.vars),
            factor: self.factor.clone(),
            terms,
        };
        e.normalize();
        Ok(e)
    }

    pub fn div(&self, other: &ScalarExpr) -> Result<ScalarExpr, ScalarError> {
        Ok(self.mul(&other.inverse()?))
    }

    pub fn pow(&self, e: i64) -> Result<ScalarExpr, ScalarError> {
        if e < 0 {
            return self.inverse()?.pow(-e);
        }
        let mut out = ScalarExpr::one(&self.vars);
        let mut base = self.clone();
        let mut e = e as u64;
        loop {
            if e & 1 == 1 {
                out = out.mul(&base);
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.mul(&base);
        }
        Ok(out)
    }

    // ---- Calculus ----

    /// Partial derivative in a coordinate. The formal factor differentiates by
    /// `d(t^k r) = t^k (dr + k r (d omega))`.
    pub fn partial_derivative(&self, coord: usize) -> ScalarExpr {
        assert!(
            self.vars.is_coord(coord),
            "derivative with respect to inert parameter `{}`",
            self.vars.name(coord)
        );
        let mut out = ScalarExpr::zero(&self.vars);
        out.factor = if self.terms.keys().any(|&k| k != 0) {
            self.factor.clone()
        } else {
            None
        };
        for (k, rf) in &self.terms {
            let mut piece = ScalarExpr::from_ratfunc(rf.derivative(coord));
            if *k != 0 {
                let spec = self
                    .factor
                    .as_ref()
                    .expect("nonzero factor power without a factor declaration");
                let scaled = ScalarExpr::from_ratfunc(rf.clone())
                    .mul(spec.grad(coord))
                    .mul_int(*k);
                piece = piece.add(&scaled);
            }
            // piece is factor-free; re-tag its content at power k.
            for (pk, prf) in piece.terms {
                debug_assert_eq!(pk, 0);
                let key = *k;
                match out.terms.entry(key) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(prf);
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        let sum = o.get().add(&prf);
                        if sum.is_zero() {
                            o.remove();
                        } else {
                            *o.get_mut() = sum;
                        }
                    }
                }
            }
        }
        out.normalize();
        out
    }

    /// Degree under the grading that gives each coordinate degree one and
    /// parameters degree zero. Requires every numerator and atom to be
    /// homogeneous and, when the factor occurs, the factor's Euler weight to
    /// be an integer constant. `None` when any of that fails.
    pub fn homogeneity_degree(&self) -> Option<i64> {
        if self.terms.is_empty() {
            return Some(0);
        }
        let factor_weight: i64 = match &self.factor {
            None => 0,
            Some(spec) => {
                let w = spec.euler_weight()?;
                if !w.is_integer() {
                    return None;
                }
                let w = w.to_integer();
                i64::try_from(w).ok()?
            }
        };
        let mut deg = None;
        for (k, rf) in &self.terms {
            let d = rf.homogeneous_coord_degree()? + k * factor_weight;
            match deg {
                None => deg = Some(d),
                Some(prev) if prev != d => return None,
                _ => {}
            }
        }
        deg
    }

    // ---- Substitution ----

    /// Replaces every occurrence of the formal factor by a concrete value,
    /// after verifying `d(value) = value * d(omega)` in every coordinate.
    pub fn substitute_factor(&self, value: &ScalarExpr) -> Result<ScalarExpr, ScalarError> {
        let spec = match &self.factor {
            None => return Ok(self.clone()),
            Some(spec) => spec,
        };
        assert!(
            same_table(&self.vars, value.vars()),
            "variable table mismatch"
        );
        for a in 0..self.vars.n_coords() {
            let lhs = value.partial_derivative(a);
            let rhs = value.mul(spec.grad(a));
            if lhs != rhs {
                return Err(ScalarError::InconsistentFactor {
                    var: self.vars.name(a).to_owned(),
                });
            }
        }
        let mut out = ScalarExpr::zero(&self.vars);
        for (k, rf) in &self.terms {
            let term = ScalarExpr::from_ratfunc(rf.clone()).mul(&value.pow(*k)?);
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Substitutes each variable by an expression over `target`; the factor
    /// maps to `factor_image` when given, otherwise it must not occur.
    /// Fails when a denominator atom collapses to zero under the substitution.
    pub fn substitute(
        &self,
        target: &Arc<VarTable>,
        images: &[ScalarExpr],
        factor_image: Option<&ScalarExpr>,
    ) -> Result<ScalarExpr, ScalarError> {
        assert_eq!(images.len(), self.vars.len(), "one image per variable");
        for img in images {
            assert!(same_table(img.vars(), target), "image table mismatch");
        }
        let subst_poly = |p: &Poly| -> ScalarExpr {
            let mut cache: Vec<Vec<ScalarExpr>> = images
                .iter()
                .map(|e| vec![ScalarExpr::one(target), e.clone()])
                .collect();
            let mut out = ScalarExpr::zero(target);
            for (m, c) in p.terms() {
                let mut term = ScalarExpr::constant(target, c.clone());
                for (idx, &e) in m.exponents().iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    let powers = &mut cache[idx];
                    while powers.len() <= e as usize {
                        let next = powers.last().unwrap().mul(&images[idx]);
                        powers.push(next);
                    }
                    term = term.mul(&powers[e as usize]);
                }
                out = out.add(&term);
            }
            out
        };
        let mut out = ScalarExpr::zero(target);
        for (k, rf) in &self.terms {
            let mut term = subst_poly(rf.num());
            for (atom, e) in rf.den() {
                let image = subst_poly(atom);
                if image.is_zero() {
                    return Err(ScalarError::DenominatorOnCone {
                        atom: atom.to_string(),
                    });
                }
                term = term.mul(&image.pow(-(*e as i64))?);
            }
            if *k != 0 {
                let fi = factor_image.ok_or_else(|| ScalarError::InvalidAst {
                    reason: "substitution hit a factor power with no factor image".to_owned(),
                })?;
                term = term.mul(&fi.pow(*k)?);
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Writes the expression as a polynomial in one inert parameter:
    /// `self = sum_j coeff[j] * param^j` with parameter-free coefficients.
    /// Fails when the parameter occurs in a denominator or in the factor's
    /// gradient while the factor is present.
    pub fn extract_param_polynomial(
        &self,
        param_idx: usize,
    ) -> Result<Vec<ScalarExpr>, ScalarError> {
        assert!(
            !self.vars.is_coord(param_idx),
            "expected an inert parameter"
        );
        let name = self.vars.name(param_idx).to_owned();
        if let Some(spec) = &self.factor {
            for a in 0..self.vars.n_coords() {
                let g = spec.grad(a);
                if g.depends_on_var(param_idx) {
                    return Err(ScalarError::ParamNotPolynomial { param: name });
                }
            }
        }
        let mut out: Vec<ScalarExpr> = Vec::new();
        for (k, rf) in &self.terms {
            for (atom, _) in rf.den() {
                if atom.depends_on(param_idx) {
                    return Err(ScalarError::ParamNotPolynomial { param: name });
                }
            }
            for (j, coeff) in rf.num().coefficients_in(param_idx).into_iter().enumerate() {
                if coeff.is_zero() {
                    continue;
                }
                while out.len() <= j {
                    out.push(ScalarExpr::zero(&self.vars));
                }
                let piece = ScalarExpr::from_ratfunc(RatFunc::new(
                    coeff,
                    rf.den().to_vec(),
                ));
                let piece = if *k == 0 {
                    piece
                } else {
                    let spec = self.factor.as_ref().unwrap();
                    piece.mul(&ScalarExpr::factor_power_of(spec, *k))
                };
                out[j] = out[j].add(&piece);
            }
        }
        if out.is_empty() {
            out.push(ScalarExpr::zero(&self.vars));
        }
        Ok(out)
    }

    fn depends_on_var(&self, idx: usize) -> bool {
        self.terms.values().any(|rf| {
            rf.num().depends_on(idx) || rf.den().iter().any(|(a, _)| a.depends_on(idx))
        })
    }

    /// True when any term's numerator or denominator involves the variable.
    /// The factor's gradient is not inspected.
    pub fn depends_on(&self, idx: usize) -> bool {
        self.depends_on_var(idx)
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_empty() {
            return write!(f, "{}", self.num);
        }
        if self.num.n_terms() > 1 {
            write!(f, "({})", self.num)?;
        } else {
            write!(f, "{}", self.num)?;
        }
        write!(f, " / (")?;
        let mut first = true;
        for (atom, e) in &self.den {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if atom.n_terms() > 1 {
                write!(f, "({atom})")?;
            } else {
                write!(f, "{atom}")?;
            }
            if *e > 1 {
                write!(f, "^{e}")?;
            }
        }
        write!(f, ")")
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let name = self
            .factor
            .as_ref()
            .map(|s| s.name().to_owned())
            .unwrap_or_else(|| "t".to_owned());
        let mut first = true;
        for (k, rf) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match *k {
                0 => write!(f, "{rf}")?,
                1 => write!(f, "{name}*({rf})")?,
                k => write!(f, "{name}^{k}*({rf})")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{rat, rat_int};
    use super::*;

    fn table() -> Arc<VarTable> {
        VarTable::new(&["x", "y"], &["w"])
    }

    fn x(t: &Arc<VarTable>) -> ScalarExpr {
        ScalarExpr::var(t, 0)
    }

    fn y(t: &Arc<VarTable>) -> ScalarExpr {
        ScalarExpr::var(t, 1)
    }

    #[test]
    fn fraction_cancels_common_atoms() {
        let t = table();
        let num = Poly::var(&t, 0).mul(&Poly::var(&t, 0)).mul(&Poly::var(&t, 1));
        let den = Poly::var(&t, 0);
        let e = ScalarExpr::fraction(num, den);
        assert_eq!(e, x(&t).mul(&y(&t)));
    }

    #[test]
    fn zero_test_via_normal_form() {
        let t = table();
        // x/(x+y) + y/(x+y) - 1 == 0
        let xy = Poly::var(&t, 0).add(&Poly::var(&t, 1));
        let a = ScalarExpr::fraction(Poly::var(&t, 0), xy.clone());
        let b = ScalarExpr::fraction(Poly::var(&t, 1), xy);
        let e = a.add(&b).sub(&ScalarExpr::one(&t));
        assert!(e.is_zero());
    }

    #[test]
    fn division_roundtrip() {
        let t = table();
        let a = x(&t).add(&y(&t).mul_rat(&rat(3, 7)));
        let b = x(&t).mul(&x(&t)).sub(&ScalarExpr::one(&t));
        let q = b.div(&a).unwrap();
        assert_eq!(q.mul(&a), b);
    }

    #[test]
    fn quotient_rule_on_fractions() {
        let t = table();
        let den = Poly::var(&t, 0)
            .mul(&Poly::var(&t, 0))
            .add(&Poly::one(&t));
        let e = ScalarExpr::fraction(Poly::var(&t, 1), den);
        // d/dx (y / (x^2+1)) = -2xy / (x^2+1)^2
        let expect_num = Poly::var(&t, 0).mul(&Poly::var(&t, 1)).mul_rat(&rat_int(-2));
        let expect_den = Poly::var(&t, 0)
            .mul(&Poly::var(&t, 0))
            .add(&Poly::one(&t))
            .pow(2);
        let expect = ScalarExpr::fraction(expect_num, expect_den);
        assert_eq!(e.partial_derivative(0), expect);
    }

    fn simple_factor(t: &Arc<VarTable>) -> Arc<FactorSpec> {
        // omega = x*y, so d omega = (y, x).
        FactorSpec::new("exp_xy", t, vec![y(t), x(t)])
    }

    #[test]
    fn factor_derivative_follows_gradient() {
        let t = table();
        let spec = simple_factor(&t);
        let tk = ScalarExpr::factor_power_of(&spec, 3);
        // d/dx t^3 = 3 t^3 y
        let expect = tk.mul(&y(&t)).mul_int(3);
        assert_eq!(tk.partial_derivative(0), expect);
        // Leibniz on t^3 * x.
        let e = tk.mul(&x(&t));
        let d = e.partial_derivative(0);
        let expect = tk.add(&tk.mul(&x(&t)).mul(&y(&t)).mul_int(3));
        assert_eq!(d, expect);
    }

    #[test]
    fn mixed_powers_and_commuting_partials() {
        let t = table();
        let spec = simple_factor(&t);
        let e = ScalarExpr::factor_power_of(&spec, 2)
            .mul(&x(&t))
            .add(&ScalarExpr::factor_power_of(&spec, -1).mul(&y(&t)))
            .add(&x(&t).mul(&y(&t)));
        let dxy = e.partial_derivative(0).partial_derivative(1);
        let dyx = e.partial_derivative(1).partial_derivative(0);
        assert_eq!(dxy, dyx);
    }

    #[test]
    fn substitute_factor_checks_gradient() {
        let t = table();
        let spec = simple_factor(&t);
        let e = ScalarExpr::factor_power_of(&spec, 2).mul(&x(&t));
        // The only polynomial candidates are wrong, e.g. value = x.
        let bad = e.substitute_factor(&x(&t));
        assert!(matches!(bad, Err(ScalarError::InconsistentFactor { .. })));
        // A factor-valued substitute: t itself is consistent.
        let same = e.substitute_factor(&ScalarExpr::factor_power_of(&spec, 1)).unwrap();
        assert_eq!(same, e);
    }

    #[test]
    fn factor_euler_weight_constant_case() {
        let t = VarTable::new(&["x", "y"], &[]);
        // omega with d omega = (1/x, 0): Euler weight x * 1/x = 1.
        let gx = ScalarExpr::fraction(Poly::one(&t), Poly::var(&t, 0));
        let gy = ScalarExpr::zero(&t);
        let spec = FactorSpec::new("scale", &t, vec![gx, gy]);
        assert_eq!(spec.euler_weight(), Some(rat_int(1)));
    }

    #[test]
    fn homogeneity_of_fractions() {
        let t = table();
        // x^2 y / x : degree 2; params ignored.
        let w = ScalarExpr::var(&t, 2);
        let e = ScalarExpr::fraction(
            Poly::var(&t, 0).pow(2).mul(&Poly::var(&t, 1)),
            Poly::var(&t, 0),
        )
        .mul(&w);
        assert_eq!(e.homogeneity_degree(), Some(2));
        let inhom = e.add(&x(&t));
        assert_eq!(inhom.homogeneity_degree(), None);
        // 1/(x+y) has degree -1.
        let f = ScalarExpr::fraction(Poly::one(&t), Poly::var(&t, 0).add(&Poly::var(&t, 1)));
        assert_eq!(f.homogeneity_degree(), Some(-1));
    }

    #[test]
    fn extract_param_polynomial_roundtrip() {
        let t = table();
        let w = ScalarExpr::var(&t, 2);
        let e = x(&t)
            .mul(&w.pow(2).unwrap())
            .add(&y(&t).mul(&w))
            .add(&ScalarExpr::one(&t));
        let coeffs = e.extract_param_polynomial(2).unwrap();
        assert_eq!(coeffs.len(), 3);
        assert_eq!(coeffs[0], ScalarExpr::one(&t));
        assert_eq!(coeffs[1], y(&t));
        assert_eq!(coeffs[2], x(&t));
    }

    #[test]
    fn substitution_composes() {
        let t = table();
        let u = VarTable::new(&["a"], &[]);
        let a = ScalarExpr::var(&u, 0);
        // x -> a^2, y -> a + 1, w -> 1
        let images = vec![
            a.mul(&a),
            a.add(&ScalarExpr::one(&u)),
            ScalarExpr::one(&u),
        ];
        let e = x(&t).mul(&y(&t)); // becomes a^2 (a+1)
        let s = e.substitute(&u, &images, None).unwrap();
        let expect = a.mul(&a).mul(&a.add(&ScalarExpr::one(&u)));
        assert_eq!(s, expect);
    }
}
