//! Abstract rewriting for the graded operator algebra on a weighted platform.
//!
//! Words in the eight generators act on a formal family of forms labelled by
//! three scalars: the dimension offset `n`, the component weight `w` (the
//! coordinate degree of the components, so the Euler operator acts as `w`),
//! and the form degree `k`. Every generator shifts `(w, k)` by a fixed
//! amount, so the scalar operators `lie(X)`, `lie*(X)` and `K(X)` evaluate to
//! polynomials in `Q[n, w, k]` at any position inside a word. Rewriting
//! eliminates them and sorts the remaining six generators into the canonical
//! order `Q < eps(X) < lap < d < delta < iota(X)` using the closed bracket
//! table; odd generators square to zero. The result is a normal form
//!
//! ```text
//! sum of  c(n, w, k) * Q^a eps(X)^e lap^m d^c delta^f iota(X)^g
//! ```
//!
//! with `e, c, f, g` in `{0, 1}`, unique for the operator on the platform.

pub mod eval;
pub mod local;
pub mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::ambient::Parity;
use crate::scalar::{rat_int, Poly, Rat, VarTable};

/// Variable table for platform coefficients: polynomials in `n, w, k`.
pub fn platform_vars() -> Arc<VarTable> {
    VarTable::new(&["n", "w", "k"], &[] as &[&str])
}

/// The eight generators of the operator algebra.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Gen {
    Q,
    EpsX,
    Lap,
    D,
    Delta,
    IotaX,
    LieX,
    LieXStar,
}

impl Gen {
    pub fn parity(self) -> Parity {
        match self {
            Gen::D | Gen::Delta | Gen::EpsX | Gen::IotaX => Parity::Odd,
            Gen::Lap | Gen::Q | Gen::LieX | Gen::LieXStar => Parity::Even,
        }
    }

    /// Shift of `(w, k)` when the generator is applied.
    pub fn shift(self) -> (i64, i64) {
        match self {
            Gen::Q => (2, 0),
            Gen::EpsX => (1, 1),
            Gen::Lap => (-2, 0),
            Gen::D => (-1, 1),
            Gen::Delta => (-1, -1),
            Gen::IotaX => (1, -1),
            Gen::LieX | Gen::LieXStar => (0, 0),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Gen::Q => "Q",
            Gen::EpsX => "eps(X)",
            Gen::Lap => "lap",
            Gen::D => "d",
            Gen::Delta => "delta",
            Gen::IotaX => "iota(X)",
            Gen::LieX => "lie(X)",
            Gen::LieXStar => "lie*(X)",
        }
    }

    /// Position in the canonical order; scalar generators are eliminated
    /// before ordering matters.
    fn ord(self) -> u8 {
        match self {
            Gen::Q => 0,
            Gen::EpsX => 1,
            Gen::Lap => 2,
            Gen::D => 3,
            Gen::Delta => 4,
            Gen::IotaX => 5,
            Gen::LieX | Gen::LieXStar => 6,
        }
    }
}

/// Total `(w, k)` shift of a word (composition reads right to left, but the
/// shifts commute so the order does not matter).
pub fn word_shift(word: &[Gen]) -> (i64, i64) {
    word.iter().fold((0, 0), |(a, b), g| {
        let (dw, dk) = g.shift();
        (a + dw, b + dk)
    })
}

/// Parity of a word: odd iff it contains an odd number of odd generators.
pub fn word_parity(word: &[Gen]) -> Parity {
    let odd = word.iter().filter(|g| g.parity() == Parity::Odd).count();
    if odd % 2 == 0 {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// Value of `lie(X)` on the platform shifted by `(dw, dk)`: `w + k + dw + dk`.
pub fn lie_poly(vars: &Arc<VarTable>, shift: (i64, i64)) -> Poly {
    Poly::var_named(vars, "w")
        .add(&Poly::var_named(vars, "k"))
        .add(&Poly::int(vars, shift.0 + shift.1))
}

/// Value of `lie*(X)` shifted by `(dw, dk)`: `k - n - 2 - w + dk - dw`.
pub fn lie_star_poly(vars: &Arc<VarTable>, shift: (i64, i64)) -> Poly {
    Poly::var_named(vars, "k")
        .sub(&Poly::var_named(vars, "n"))
        .sub(&Poly::var_named(vars, "w"))
        .add(&Poly::int(vars, shift.1 - shift.0 - 2))
}

/// Value of `K(X) = lie(X) - lie*(X)` shifted by `(dw, dk)`: `n + 2w + 2dw + 2`.
pub fn kx_poly(vars: &Arc<VarTable>, shift: (i64, i64)) -> Poly {
    Poly::var_named(vars, "n")
        .add(&Poly::var_named(vars, "w").mul_rat(&rat_int(2)))
        .add(&Poly::int(vars, 2 * shift.0 + 2))
}

/// A word in canonical order. Odd generators carry flags since they square
/// to zero; `Q` and `lap` carry exponents.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash, Default)]
pub struct NormalWord {
    pub q: u32,
    pub eps: bool,
    pub lap: u32,
    pub d: bool,
    pub delta: bool,
    pub iota: bool,
}

impl NormalWord {
    pub fn empty() -> Self {
        NormalWord::default()
    }

    pub fn is_identity(&self) -> bool {
        *self == NormalWord::default()
    }

    pub fn shift(&self) -> (i64, i64) {
        let q = self.q as i64;
        let m = self.lap as i64;
        let e = self.eps as i64;
        let c = self.d as i64;
        let f = self.delta as i64;
        let g = self.iota as i64;
        (2 * q + e - 2 * m - c - f + g, e + c - f - g)
    }

    pub fn parity(&self) -> Parity {
        let odd = self.eps as u32 + self.d as u32 + self.delta as u32 + self.iota as u32;
        if odd % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Expansion back into a generator sequence (left to right; composition
    /// applies the rightmost generator first).
    pub fn gens(&self) -> Vec<Gen> {
        let mut v = Vec::new();
        v.extend(std::iter::repeat(Gen::Q).take(self.q as usize));
        if self.eps {
            v.push(Gen::EpsX);
        }
        v.extend(std::iter::repeat(Gen::Lap).take(self.lap as usize));
        if self.d {
            v.push(Gen::D);
        }
        if self.delta {
            v.push(Gen::Delta);
        }
        if self.iota {
            v.push(Gen::IotaX);
        }
        v
    }
}

impl fmt::Display for NormalWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        let mut parts = Vec::new();
        match self.q {
            0 => {}
            1 => parts.push("Q".to_owned()),
            a => parts.push(format!("Q^{a}")),
        }
        if self.eps {
            parts.push("eps(X)".to_owned());
        }
        match self.lap {
            0 => {}
            1 => parts.push("lap".to_owned()),
            m => parts.push(format!("lap^{m}")),
        }
        if self.d {
            parts.push("d".to_owned());
        }
        if self.delta {
            parts.push("delta".to_owned());
        }
        if self.iota {
            parts.push("iota(X)".to_owned());
        }
        write!(f, "{}", parts.join(" "))
    }
}

/// A finite sum of normal words with polynomial coefficients in `Q[n, w, k]`.
/// Coefficients refer to the platform the whole element acts on, so they are
/// central and multiply through.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Element {
    terms: BTreeMap<NormalWord, Poly>,
}

impl Element {
    pub fn zero() -> Self {
        Element::default()
    }

    pub fn identity() -> Self {
        Element::from_word(NormalWord::empty())
    }

    pub fn from_word(w: NormalWord) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(w, Poly::one(&platform_vars()));
        Element { terms }
    }

    pub fn from_word_scaled(w: NormalWord, c: Poly) -> Self {
        let mut e = Element::zero();
        e.add_term(w, c);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&NormalWord, &Poly)> {
        self.terms.iter()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, w: &NormalWord) -> Option<&Poly> {
        self.terms.get(w)
    }

    fn add_term(&mut self, w: NormalWord, c: Poly) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(w) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let s = e.get().add(&c);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Element) -> Element {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Element) -> Element {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.neg());
        }
        out
    }

    pub fn scale_poly(&self, c: &Poly) -> Element {
        let mut out = Element::zero();
        for (w, p) in &self.terms {
            out.add_term(w.clone(), p.mul(c));
        }
        out
    }

    pub fn scale_rat(&self, c: &Rat) -> Element {
        let mut out = Element::zero();
        for (w, p) in &self.terms {
            out.add_term(w.clone(), p.mul_rat(c));
        }
        out
    }

    pub fn scale_int(&self, c: i64) -> Element {
        self.scale_rat(&rat_int(c))
    }

    /// Common `(w, k)` shift of all terms, when they agree. Normal forms of a
    /// single word always have one.
    pub fn common_shift(&self) -> Option<(i64, i64)> {
        let mut it = self.terms.keys().map(|w| w.shift());
        let first = it.next()?;
        it.all(|s| s == first).then_some(first)
    }

    /// Prepend one generator (multiply by it on the left), recording the
    /// rewrite rules fired in `trace`.
    pub fn apply_gen(&self, g: Gen, trace: &mut Vec<String>) -> Element {
        let mut out = Element::zero();
        for (w, c) in &self.terms {
            let part = mul_gen_word(g, w, trace).scale_poly(c);
            out = out.add(&part);
        }
        out
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, c)| {
                if w.is_identity() {
                    format!("({c})")
                } else {
                    format!("({c}) {w}")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Left-multiply a single generator onto a normal word, producing the normal
/// form of the product. Rules fire with scalars evaluated at the platform
/// shifted by everything to the right of the rewritten pair.
fn mul_gen_word(g: Gen, w: &NormalWord, trace: &mut Vec<String>) -> Element {
    let vars = platform_vars();
    match g {
        Gen::LieX => Element::from_word_scaled(w.clone(), lie_poly(&vars, w.shift())),
        Gen::LieXStar => Element::from_word_scaled(w.clone(), lie_star_poly(&vars, w.shift())),
        Gen::Q => {
            let mut v = w.clone();
            v.q += 1;
            Element::from_word(v)
        }
        Gen::EpsX => {
            if w.eps {
                trace.push("anti:eps(X),eps(X) -> 0".to_owned());
                Element::zero()
            } else {
                let mut v = w.clone();
                v.eps = true;
                Element::from_word(v)
            }
        }
        Gen::Lap => {
            if w.q > 0 {
                // lap Q = Q lap - 2 K(X)
                let mut wp = w.clone();
                wp.q -= 1;
                trace.push("comm:lap,Q".to_owned());
                let pass = mul_gen_word(Gen::Lap, &wp, trace).apply_gen(Gen::Q, trace);
                let kx = kx_poly(&vars, wp.shift());
                pass.add(&Element::from_word_scaled(wp, kx.mul_rat(&rat_int(-2))))
            } else if w.eps {
                // lap eps(X) = eps(X) lap - 2 d
                let mut wp = w.clone();
                wp.eps = false;
                trace.push("comm:lap,eps(X)".to_owned());
                let pass = mul_gen_word(Gen::Lap, &wp, trace).apply_gen(Gen::EpsX, trace);
                pass.add(&mul_gen_word(Gen::D, &wp, trace).scale_int(-2))
            } else {
                let mut v = w.clone();
                v.lap += 1;
                Element::from_word(v)
            }
        }
        Gen::D => {
            if w.q > 0 {
                // d Q = Q d + 2 eps(X)
                let mut wp = w.clone();
                wp.q -= 1;
                trace.push("comm:Q,d".to_owned());
                let pass = mul_gen_word(Gen::D, &wp, trace).apply_gen(Gen::Q, trace);
                pass.add(&mul_gen_word(Gen::EpsX, &wp, trace).scale_int(2))
            } else if w.eps {
                // d eps(X) = -eps(X) d
                let mut wp = w.clone();
                wp.eps = false;
                trace.push("anti:d,eps(X)".to_owned());
                mul_gen_word(Gen::D, &wp, trace)
                    .apply_gen(Gen::EpsX, trace)
                    .scale_int(-1)
            } else if w.d {
                trace.push("anti:d,d -> 0".to_owned());
                Element::zero()
            } else {
                // d passes lap freely
                let mut v = w.clone();
                v.d = true;
                Element::from_word(v)
            }
        }
        Gen::Delta => {
            if w.q > 0 {
                // delta Q = Q delta - 2 iota(X)
                let mut wp = w.clone();
                wp.q -= 1;
                trace.push("comm:Q,delta".to_owned());
                let pass = mul_gen_word(Gen::Delta, &wp, trace).apply_gen(Gen::Q, trace);
                pass.add(&mul_gen_word(Gen::IotaX, &wp, trace).scale_int(-2))
            } else if w.eps {
                // delta eps(X) = -eps(X) delta + lie*(X)
                let mut wp = w.clone();
                wp.eps = false;
                trace.push("anti:delta,eps(X)".to_owned());
                let pass = mul_gen_word(Gen::Delta, &wp, trace)
                    .apply_gen(Gen::EpsX, trace)
                    .scale_int(-1);
                let star = lie_star_poly(&vars, wp.shift());
                pass.add(&Element::from_word_scaled(wp, star))
            } else if w.d {
                // delta passes lap, then {d, delta} = lap on the remainder
                let mut rem = w.clone();
                rem.d = false;
                let m = rem.lap;
                rem.lap = 0;
                trace.push("anti:d,delta".to_owned());
                let mut sub = mul_gen_word(Gen::Delta, &rem, trace)
                    .apply_gen(Gen::D, trace)
                    .scale_int(-1)
                    .add(&mul_gen_word(Gen::Lap, &rem, trace));
                for _ in 0..m {
                    sub = sub.apply_gen(Gen::Lap, trace);
                }
                sub
            } else if w.delta {
                trace.push("anti:delta,delta -> 0".to_owned());
                Element::zero()
            } else {
                let mut v = w.clone();
                v.delta = true;
                Element::from_word(v)
            }
        }
        Gen::IotaX => {
            if w.q > 0 {
                // iota(X) commutes with Q
                let mut rem = w.clone();
                let a = rem.q;
                rem.q = 0;
                let mut sub = mul_gen_word(Gen::IotaX, &rem, trace);
                for _ in 0..a {
                    sub = sub.apply_gen(Gen::Q, trace);
                }
                sub
            } else if w.eps {
                // iota(X) eps(X) = -eps(X) iota(X) + Q
                let mut wp = w.clone();
                wp.eps = false;
                trace.push("anti:eps(X),iota(X)".to_owned());
                let pass = mul_gen_word(Gen::IotaX, &wp, trace)
                    .apply_gen(Gen::EpsX, trace)
                    .scale_int(-1);
                pass.add(&Element::from_word(wp).apply_gen(Gen::Q, trace))
            } else if w.lap > 0 {
                // iota(X) lap = lap iota(X) - 2 delta
                let mut wp = w.clone();
                wp.lap -= 1;
                trace.push("comm:lap,iota(X)".to_owned());
                let pass = mul_gen_word(Gen::IotaX, &wp, trace).apply_gen(Gen::Lap, trace);
                pass.add(&mul_gen_word(Gen::Delta, &wp, trace).scale_int(-2))
            } else if w.d {
                // iota(X) d = -d iota(X) + lie(X)
                let mut wp = w.clone();
                wp.d = false;
                trace.push("anti:d,iota(X)".to_owned());
                let pass = mul_gen_word(Gen::IotaX, &wp, trace)
                    .apply_gen(Gen::D, trace)
                    .scale_int(-1);
                let lie = lie_poly(&vars, wp.shift());
                pass.add(&Element::from_word_scaled(wp, lie))
            } else if w.delta {
                // iota(X) delta = -delta iota(X)
                let mut wp = w.clone();
                wp.delta = false;
                trace.push("anti:delta,iota(X)".to_owned());
                mul_gen_word(Gen::IotaX, &wp, trace)
                    .apply_gen(Gen::Delta, trace)
                    .scale_int(-1)
            } else if w.iota {
                trace.push("anti:iota(X),iota(X) -> 0".to_owned());
                Element::zero()
            } else {
                let mut v = w.clone();
                v.iota = true;
                Element::from_word(v)
            }
        }
    }
}

/// Normal form of a word (composition applies the rightmost generator first).
pub fn normal_form(word: &[Gen]) -> Element {
    let mut trace = Vec::new();
    normal_form_traced(word, &mut trace)
}

pub fn normal_form_traced(word: &[Gen], trace: &mut Vec<String>) -> Element {
    let mut acc = Element::identity();
    for g in word.iter().rev() {
        acc = acc.apply_gen(*g, trace);
    }
    acc
}

/// A formal sum of scaled words, the input language of the rewriter.
pub type WordSum = Vec<(Rat, Vec<Gen>)>;

pub fn normal_form_sum(sum: &[(Rat, Vec<Gen>)]) -> Element {
    let mut trace = Vec::new();
    let mut acc = Element::zero();
    for (c, word) in sum {
        acc = acc.add(&normal_form_traced(word, &mut trace).scale_rat(c));
    }
    acc
}

/// Graded bracket of two formal sums: `[a, b] = ab - (-1)^{|a||b|} ba`.
/// Every word inside each argument must have the parity of the whole sum.
pub fn bracket_sums(a: &[(Rat, Vec<Gen>)], b: &[(Rat, Vec<Gen>)]) -> WordSum {
    let pa = a
        .first()
        .map(|(_, w)| word_parity(w))
        .unwrap_or(Parity::Even);
    let pb = b
        .first()
        .map(|(_, w)| word_parity(w))
        .unwrap_or(Parity::Even);
    debug_assert!(a.iter().all(|(_, w)| word_parity(w) == pa));
    debug_assert!(b.iter().all(|(_, w)| word_parity(w) == pb));
    let sign = if pa == Parity::Odd && pb == Parity::Odd {
        rat_int(1)
    } else {
        rat_int(-1)
    };
    let mut out = WordSum::new();
    for (ca, wa) in a {
        for (cb, wb) in b {
            let mut ab = wa.clone();
            ab.extend_from_slice(wb);
            out.push((ca.clone() * cb.clone(), ab));
            let mut ba = wb.clone();
            ba.extend_from_slice(wa);
            out.push((ca.clone() * cb.clone() * sign.clone(), ba));
        }
    }
    out
}

/// The closed form of `[lap^m, Q]` on the platform:
/// `-2m (2w - 2m + n + 4) lap^(m-1)`.
pub fn power_commutator_claim(m: u32) -> Element {
    if m == 0 {
        return Element::zero();
    }
    let vars = platform_vars();
    let coeff = Poly::var_named(&vars, "w")
        .mul_rat(&rat_int(2))
        .add(&Poly::var_named(&vars, "n"))
        .add(&Poly::int(&vars, 4 - 2 * (m as i64)))
        .mul_rat(&rat_int(-2 * (m as i64)));
    Element::from_word_scaled(
        NormalWord {
            lap: m - 1,
            ..NormalWord::default()
        },
        coeff,
    )
}
