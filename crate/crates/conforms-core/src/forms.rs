//! Antisymmetric component storage shared by cone forms and tractor forms.
//!
//! Components of a degree-`k` form are stored against sorted multi-indices
//! encoded as bitmasks over at most 16 letters; the coefficient of
//! `dx^{i_1} ^ .. ^ dx^{i_k}` with `i_1 < .. < i_k` is the entry at the mask
//! with those bits set. All signs come from counting transpositions, so wedge
//! and contraction below are the standard ones with no combinatorial factors:
//!
//! * `(xi ^ phi)_J = sum_{a in J} (-1)^{pos_J(a)} xi_a phi_{J \ a}`
//! * `(iota(v) phi)_I = sum_{a not in I} (-1)^{pos_{I+a}(a)} v^a phi_{I + a}`
//!
//! where `pos_J(a)` counts the letters of `J` below `a`. Contraction inserts
//! the vector into the first slot.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::scalar::{Rat, ScalarExpr, VarTable};

/// Parity of the permutation that sorts `letter` into the ascending index set
/// `mask`, together with the resulting mask. `None` when the letter is
/// already present (the wedge vanishes).
pub fn insert_with_sign(mask: u16, letter: usize) -> Option<(u16, i32)> {
    let bit = 1u16 << letter;
    if mask & bit != 0 {
        return None;
    }
    let below = (mask & (bit - 1)).count_ones();
    let sign = if below % 2 == 0 { 1 } else { -1 };
    Some((mask | bit, sign))
}

/// Sign picked up by pulling `letter` out of the front of the sorted index
/// set `mask`. `None` when the letter is absent.
pub fn remove_with_sign(mask: u16, letter: usize) -> Option<(u16, i32)> {
    let bit = 1u16 << letter;
    if mask & bit == 0 {
        return None;
    }
    let below = (mask & (bit - 1)).count_ones();
    let sign = if below % 2 == 0 { 1 } else { -1 };
    Some((mask & !bit, sign))
}

/// Letters of a mask in ascending order.
pub fn letters(mask: u16) -> impl Iterator<Item = usize> {
    (0..16usize).filter(move |a| mask & (1 << a) != 0)
}

/// All masks of the given popcount over `dim` letters, ascending.
pub fn masks_of_degree(dim: usize, degree: usize) -> Vec<u16> {
    (0u16..(1u16 << dim))
        .filter(|m| m.count_ones() as usize == degree)
        .collect()
}

/// Sparse antisymmetric components of a fixed-degree form.
#[derive(Clone)]
pub struct FormData {
    vars: Arc<VarTable>,
    dim: usize,
    degree: usize,
    comps: BTreeMap<u16, ScalarExpr>,
}

impl FormData {
    pub fn zero(vars: &Arc<VarTable>, dim: usize, degree: usize) -> Self {
        assert!(dim <= 16, "at most 16 letters");
        assert!(degree <= dim, "degree exceeds letter count");
        FormData {
            vars: Arc::clone(vars),
            dim,
            degree,
            comps: BTreeMap::new(),
        }
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn get(&self, mask: u16) -> Option<&ScalarExpr> {
        self.comps.get(&mask)
    }

    /// Component at a mask, defaulting to zero.
    pub fn component(&self, mask: u16) -> ScalarExpr {
        self.comps
            .get(&mask)
            .cloned()
            .unwrap_or_else(|| ScalarExpr::zero(&self.vars))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u16, &ScalarExpr)> {
        self.comps.iter().map(|(m, e)| (*m, e))
    }

    pub fn add_to(&mut self, mask: u16, e: ScalarExpr) {
        assert_eq!(mask.count_ones() as usize, self.degree, "mask degree");
        assert!(mask < (1 << self.dim), "mask letter out of range");
        if e.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.comps.entry(mask) {
            Entry::Vacant(v) => {
                v.insert(e);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get().add(&e);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn set(&mut self, mask: u16, e: ScalarExpr) {
        assert_eq!(mask.count_ones() as usize, self.degree, "mask degree");
        assert!(mask < (1 << self.dim), "mask letter out of range");
        if e.is_zero() {
            self.comps.remove(&mask);
        } else {
            self.comps.insert(mask, e);
        }
    }

    fn assert_compatible(&self, other: &FormData) {
        assert!(
            Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars,
            "variable table mismatch"
        );
        assert_eq!(self.dim, other.dim, "letter count mismatch");
        assert_eq!(self.degree, other.degree, "form degree mismatch");
    }

    pub fn add(&self, other: &FormData) -> FormData {
        self.assert_compatible(other);
        let mut out = self.clone();
        for (m, e) in &other.comps {
            out.add_to(*m, e.clone());
        }
        out
    }

    pub fn sub(&self, other: &FormData) -> FormData {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> FormData {
        self.map(|_, e| e.neg())
    }

    pub fn scale(&self, c: &ScalarExpr) -> FormData {
        self.map(|_, e| e.mul(c))
    }

    pub fn scale_rat(&self, c: &Rat) -> FormData {
        self.map(|_, e| e.mul_rat(c))
    }

    /// Applies `f` to every stored component, dropping zeros.
    pub fn map(&self, f: impl Fn(u16, &ScalarExpr) -> ScalarExpr) -> FormData {
        let mut out = FormData::zero(&self.vars, self.dim, self.degree);
        for (m, e) in &self.comps {
            let v = f(*m, e);
            if !v.is_zero() {
                out.comps.insert(*m, v);
            }
        }
        out
    }

    /// Wedge with a one-form given by covariant components.
    pub fn wedge1(&self, cov: &[ScalarExpr]) -> FormData {
        assert_eq!(cov.len(), self.dim);
        let mut out = FormData::zero(&self.vars, self.dim, self.degree + 1);
        for (mask, f) in &self.comps {
            for (a, xi) in cov.iter().enumerate() {
                if xi.is_zero() {
                    continue;
                }
                if let Some((m, s)) = insert_with_sign(*mask, a) {
                    let term = xi.mul(f);
                    out.add_to(m, if s < 0 { term.neg() } else { term });
                }
            }
        }
        out
    }

    /// First-slot contraction with a vector given by contravariant components.
    pub fn contract1(&self, contra: &[ScalarExpr]) -> FormData {
        assert_eq!(contra.len(), self.dim);
        assert!(self.degree >= 1, "cannot contract a scalar");
        let mut out = FormData::zero(&self.vars, self.dim, self.degree - 1);
        for (mask, f) in &self.comps {
            for a in letters(*mask) {
                let v = &contra[a];
                if v.is_zero() {
                    continue;
                }
                let (m, s) = remove_with_sign(*mask, a).unwrap();
                let term = v.mul(f);
                out.add_to(m, if s < 0 { term.neg() } else { term });
            }
        }
        out
    }

    /// Exterior derivative relative to the supplied partial derivative:
    /// `(d phi)_J = sum_{a in J} (-1)^{pos} partial(a, phi_{J \ a})`.
    pub fn d_with(&self, partial: impl Fn(usize, &ScalarExpr) -> ScalarExpr) -> FormData {
        let mut out = FormData::zero(&self.vars, self.dim, self.degree + 1);
        for (mask, f) in &self.comps {
            for a in 0..self.dim {
                if let Some((m, s)) = insert_with_sign(*mask, a) {
                    let term = partial(a, f);
                    if term.is_zero() {
                        continue;
                    }
                    out.add_to(m, if s < 0 { term.neg() } else { term });
                }
            }
        }
        out
    }

    /// Codifferential relative to a metric with `h^{a, pair(a)} = 1` as its
    /// only nonzero inverse components:
    /// `(delta phi)_I = - sum_{a not in I} (-1)^{pos} partial(pair(a), phi_{I + a})`.
    pub fn codiff_with(
        &self,
        pair: impl Fn(usize) -> usize,
        partial: impl Fn(usize, &ScalarExpr) -> ScalarExpr,
    ) -> FormData {
        assert!(self.degree >= 1, "cannot take the codifferential of a scalar");
        let mut out = FormData::zero(&self.vars, self.dim, self.degree - 1);
        for (mask, f) in &self.comps {
            for a in letters(*mask) {
                let (m, s) = remove_with_sign(*mask, a).unwrap();
                let term = partial(pair(a), f);
                if term.is_zero() {
                    continue;
                }
                out.add_to(m, if s < 0 { term } else { term.neg() });
            }
        }
        out
    }
}

impl PartialEq for FormData {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.degree == other.degree && self.comps == other.comps
    }
}

impl Eq for FormData {}

impl fmt::Debug for FormData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FormData(deg {} in {} letters", self.degree, self.dim)?;
        for (m, e) in &self.comps {
            let idx: Vec<String> = letters(*m).map(|a| a.to_string()).collect();
            write!(f, "; [{}] = {}", idx.join(","), e)?;
        }
        write!(f, ")")
    }
}
