//! Sparse multivariate polynomials over the rationals.
//!
//! A `Poly` is a map from monomials to nonzero rational coefficients. All
//! monomials in a polynomial have exponent vectors of the table's length, so
//! the derived lexicographic order on boxed slices is a valid monomial order.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::Rat;

/// Ordered table of variable names shared by all polynomials of a context.
///
/// The first `n_coords` variables are coordinates: they are differentiable and
/// they count toward homogeneity degrees. The remaining variables are inert
/// parameters (degree zero, no derivatives).
#[derive(Debug, PartialEq, Eq)]
pub struct VarTable {
    names: Vec<String>,
    n_coords: usize,
}

impl VarTable {
    pub fn new<S: AsRef<str>>(coords: &[S], params: &[S]) -> Arc<Self> {
        let mut names: Vec<String> = coords.iter().map(|s| s.as_ref().to_owned()).collect();
        names.extend(params.iter().map(|s| s.as_ref().to_owned()));
        let table = VarTable {
            n_coords: coords.len(),
            names,
        };
        let mut seen = std::collections::BTreeSet::new();
        for name in &table.names {
            assert!(seen.insert(name.clone()), "duplicate variable `{name}`");
        }
        Arc::new(table)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn n_coords(&self) -> usize {
        self.n_coords
    }

    pub fn is_coord(&self, idx: usize) -> bool {
        idx < self.n_coords
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn coord_names(&self) -> &[String] {
        &self.names[..self.n_coords]
    }

    pub fn param_names(&self) -> &[String] {
        &self.names[self.n_coords..]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Checks that two tables are the same (pointer fast path, then content).
pub(crate) fn same_table(a: &Arc<VarTable>, b: &Arc<VarTable>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Exponent vector of a monomial. Always as long as the variable table.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Mono(Box<[u16]>);

impl Mono {
    pub fn one(nvars: usize) -> Self {
        Mono(vec![0u16; nvars].into_boxed_slice())
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        let mut e = vec![0u16; nvars];
        e[idx] = 1;
        Mono(e.into_boxed_slice())
    }

    pub fn from_exponents(exps: &[u16]) -> Self {
        Mono(exps.to_vec().into_boxed_slice())
    }

    pub fn exponents(&self) -> &[u16] {
        &self.0
    }

    pub fn exponent(&self, idx: usize) -> u16 {
        self.0[idx]
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        let e: Vec<u16> = self
            .0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.checked_add(*b).expect("monomial exponent overflow"))
            .collect();
        Mono(e.into_boxed_slice())
    }

    /// Componentwise division; `None` if any exponent would go negative.
    pub fn try_div(&self, other: &Mono) -> Option<Mono> {
        let mut e = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            e.push(a.checked_sub(*b)?);
        }
        Some(Mono(e.into_boxed_slice()))
    }

    /// Total degree in the first `n_coords` variables.
    pub fn coord_degree(&self, n_coords: usize) -> i64 {
        self.0[..n_coords].iter().map(|&e| e as i64).sum()
    }

    pub fn total_degree(&self) -> i64 {
        self.0.iter().map(|&e| e as i64).sum()
    }
}

/// Sparse polynomial over the rationals.
#[derive(Clone, PartialEq, Eq)]
pub struct Poly {
    vars: Arc<VarTable>,
    terms: std::collections::BTreeMap<Mono, Rat>,
}

impl Poly {
    // ---- Constructors ----

    pub fn zero(vars: &Arc<VarTable>) -> Self {
        Poly {
            vars: Arc::clone(vars),
            terms: Default::default(),
        }
    }

    pub fn constant(vars: &Arc<VarTable>, c: Rat) -> Self {
        let mut p = Poly::zero(vars);
        if !c.is_zero() {
            p.terms.insert(Mono::one(vars.len()), c);
        }
        p
    }

    pub fn one(vars: &Arc<VarTable>) -> Self {
        Poly::constant(vars, Rat::one())
    }

    pub fn int(vars: &Arc<VarTable>, v: i64) -> Self {
        Poly::constant(vars, super::rat_int(v))
    }

    pub fn var(vars: &Arc<VarTable>, idx: usize) -> Self {
        assert!(idx < vars.len(), "variable index out of range");
        let mut p = Poly::zero(vars);
        p.terms.insert(Mono::var(vars.len(), idx), Rat::one());
        p
    }

    pub fn var_named(vars: &Arc<VarTable>, name: &str) -> Self {
        let idx = vars
            .index_of(name)
            .unwrap_or_else(|| panic!("unknown variable `{name}`"));
        Poly::var(vars, idx)
    }

    pub fn monomial(vars: &Arc<VarTable>, coeff: Rat, exps: &[u16]) -> Self {
        assert_eq!(exps.len(), vars.len());
        let mut p = Poly::zero(vars);
        if !coeff.is_zero() {
            p.terms.insert(Mono::from_exponents(exps), coeff);
        }
        p
    }

    // ---- Accessors ----

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rat)> {
        self.terms.iter()
    }

    /// The constant value if the polynomial has no variable dependence.
    pub fn as_constant(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if m.is_one() {
                return Some(c.clone());
            }
        }
        None
    }

    /// Leading term in the lexicographic order (largest monomial).
    pub fn leading_term(&self) -> Option<(&Mono, &Rat)> {
        self.terms.iter().next_back()
    }

    /// Largest exponent of the given variable across all terms.
    pub fn degree_in(&self, idx: usize) -> u16 {
        self.terms
            .keys()
            .map(|m| m.exponent(idx))
            .max()
            .unwrap_or(0)
    }

    pub fn depends_on(&self, idx: usize) -> bool {
        self.terms.keys().any(|m| m.exponent(idx) > 0)
    }

    /// Common degree in the coordinate variables, if every term agrees.
    /// Zero for the zero polynomial. Parameters do not count.
    pub fn homogeneous_coord_degree(&self) -> Option<i64> {
        let n_coords = self.vars.n_coords();
        let mut deg = None;
        for m in self.terms.keys() {
            let d = m.coord_degree(n_coords);
            match deg {
                None => deg = Some(d),
                Some(prev) if prev != d => return None,
                _ => {}
            }
        }
        Some(deg.unwrap_or(0))
    }

    pub fn total_coord_degree(&self) -> i64 {
        let n_coords = self.vars.n_coords();
        self.terms
            .keys()
            .map(|m| m.coord_degree(n_coords))
            .max()
            .unwrap_or(0)
    }

    // ---- Ring operations ----

    fn insert_term(&mut self, m: Mono, c: Rat) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get().clone() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert!(same_table(&self.vars, &other.vars), "variable table mismatch");
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert!(same_table(&self.vars, &other.vars), "variable table mismatch");
        let mut out = Poly::zero(&self.vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.insert_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn mul_rat(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero(&self.vars);
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = v.clone() * c;
        }
        out
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut out = Poly::one(&self.vars);
        let mut base = self.clone();
        let mut e = e;
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
        out
    }

    /// Partial derivative with respect to a coordinate variable.
    /// Panics when applied to an inert parameter.
    pub fn derivative(&self, idx: usize) -> Poly {
        assert!(
            self.vars.is_coord(idx),
            "derivative with respect to inert parameter `{}`",
            self.vars.name(idx)
        );
        let mut out = Poly::zero(&self.vars);
        for (m, c) in &self.terms {
            let e = m.exponent(idx);
            if e == 0 {
                continue;
            }
            let mut exps = m.exponents().to_vec();
            exps[idx] = e - 1;
            out.insert_term(
                Mono::from_exponents(&exps),
                c * Rat::from_integer(BigInt::from(e)),
            );
        }
        out
    }

    /// Exact division: `Some(q)` with `self == q * d`, else `None`.
    ///
    /// Single-divisor multivariate division: the remainder of the division
    /// algorithm is zero exactly when `d` divides `self`.
    pub fn try_div(&self, d: &Poly) -> Option<Poly> {
        assert!(same_table(&self.vars, &d.vars), "variable table mismatch");
        let (dm, dc) = d.leading_term()?;
        let dm = dm.clone();
        let dc = dc.clone();
        let mut rem = self.clone();
        let mut quot = Poly::zero(&self.vars);
        while let Some((rm, rc)) = rem.leading_term() {
            let q = rm.try_div(&dm)?;
            let qc = rc / &dc;
            quot.insert_term(q.clone(), qc.clone());
            // rem -= (qc * q) * d
            for (m, c) in &d.terms {
                rem.insert_term(q.mul(m), -(&qc * c));
            }
        }
        Some(quot)
    }

    /// Splits off the largest monomial dividing every term.
    /// Returns `(gcd_monomial, cofactor)`; the zero polynomial yields `(1, 0)`.
    pub fn monomial_content(&self) -> (Mono, Poly) {
        let nvars = self.vars.len();
        if self.terms.is_empty() {
            return (Mono::one(nvars), self.clone());
        }
        let mut gcd = vec![u16::MAX; nvars];
        for m in self.terms.keys() {
            for (g, e) in gcd.iter_mut().zip(m.exponents()) {
                *g = (*g).min(*e);
            }
        }
        let gcd = Mono::from_exponents(&gcd);
        if gcd.is_one() {
            return (gcd, self.clone());
        }
        let mut cof = Poly::zero(&self.vars);
        for (m, c) in &self.terms {
            cof.terms.insert(m.try_div(&gcd).unwrap(), c.clone());
        }
        (gcd, cof)
    }

    /// Writes `self = scale * primitive` with `primitive` an integer-coefficient
    /// polynomial of content one and positive leading coefficient.
    /// The zero polynomial returns `(0, 0)`.
    pub fn primitive_part(&self) -> (Rat, Poly) {
        if self.is_zero() {
            return (Rat::zero(), self.clone());
        }
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            den_lcm = num_integer::lcm(den_lcm, c.denom().clone());
        }
        let mut num_gcd = BigInt::zero();
        for c in self.terms.values() {
            let scaled = c.numer() * (&den_lcm / c.denom());
            num_gcd = num_integer::gcd(num_gcd, scaled);
        }
        // num_gcd > 0 since some coefficient is nonzero.
        let mut scale = Rat::new(num_gcd, den_lcm);
        let lead_negative = self
            .leading_term()
            .map(|(_, c)| c.is_negative())
            .unwrap_or(false);
        if lead_negative {
            scale = -scale;
        }
        let inv = scale.recip();
        (scale, self.mul_rat(&inv))
    }

    /// Expands the polynomial as coefficients of powers of one variable:
    /// `self = sum_j coeff[j] * x_idx^j`. Coefficients do not involve `x_idx`.
    pub fn coefficients_in(&self, idx: usize) -> Vec<Poly> {
        let deg = self.degree_in(idx) as usize;
        let mut out = vec![Poly::zero(&self.vars); deg + 1];
        for (m, c) in &self.terms {
            let e = m.exponent(idx) as usize;
            let mut exps = m.exponents().to_vec();
            exps[idx] = 0;
            out[e].insert_term(Mono::from_exponents(&exps), c.clone());
        }
        out
    }

    /// Evaluates the polynomial with each variable replaced by the supplied
    /// polynomial over a (possibly different) table. Powers are cached.
    pub fn compose(&self, images: &[Poly], target: &Arc<VarTable>) -> Poly {
        assert_eq!(images.len(), self.vars.len());
        let mut powers: Vec<Vec<Poly>> = images
            .iter()
            .map(|p| vec![Poly::one(target), p.clone()])
            .collect();
        let mut out = Poly::zero(target);
        for (m, c) in &self.terms {
            let mut term = Poly::constant(target, c.clone());
            for (idx, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let cache = &mut powers[idx];
                while cache.len() <= e as usize {
                    let next = cache.last().unwrap().mul(&images[idx]);
                    cache.push(next);
                }
                term = term.mul(&cache[e as usize]);
            }
            out = out.add(&term);
        }
        out
    }
}

impl Ord for Poly {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.terms.iter();
        let mut b = other.terms.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some((ma, ca)), Some((mb, cb))) => {
                    let c = ma.cmp(mb).then_with(|| ca.cmp(cb));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
            }
        }
    }
}

impl PartialOrd for Poly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        // Print highest monomial first for readability.
        for (m, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let abs = if neg { -c.clone() } else { c.clone() };
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut printed = false;
            if !abs.is_one() || m.is_one() {
                write!(f, "{abs}")?;
                printed = true;
            }
            for (idx, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if printed {
                    write!(f, "*")?;
                }
                write!(f, "{}", self.vars.name(idx))?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
                printed = true;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}
