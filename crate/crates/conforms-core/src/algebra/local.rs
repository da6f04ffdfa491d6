//! A second, independent route to normal forms: local rewriting on free
//! words. Out-of-order adjacent pairs are replaced using the bracket table,
//! one pair at a time, until every word is sorted. The pair to rewrite is
//! picked either deterministically (leftmost in the first word) or uniformly
//! at random with a seeded generator; confluence means every strategy ends
//! at the same normal form, which the tests compare against the direct
//! fold in [`super::normal_form_sum`].

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::{
    kx_poly, lie_poly, lie_star_poly, platform_vars, word_shift, Element, Gen, NormalWord,
};
use crate::ambient::Parity;
use crate::scalar::{Poly, Rat};

pub enum Strategy {
    Leftmost,
    Random(ChaCha20Rng),
}

/// One pending word: a polynomial coefficient and a free generator sequence.
type FreeTerm = (Poly, Vec<Gen>);

/// A position is reducible when it holds a scalar generator (eliminated in
/// place) or an out-of-order or repeated-odd adjacent pair.
fn reducible_positions(word: &[Gen]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..word.len() {
        let g = word[i];
        if matches!(g, Gen::LieX | Gen::LieXStar) {
            out.push(i);
            continue;
        }
        if i + 1 < word.len() {
            let h = word[i + 1];
            if matches!(h, Gen::LieX | Gen::LieXStar) {
                continue;
            }
            let clash = g == h && g.parity() == Parity::Odd;
            if g.ord() > h.ord() || clash {
                out.push(i);
            }
        }
    }
    out
}

/// Rewrite the pair (or scalar token) at position `i`, returning replacement
/// terms. Scalars in the rules are evaluated at the platform shifted by the
/// suffix to the right of the rewritten site.
fn rewrite_at(coeff: &Poly, word: &[Gen], i: usize) -> Vec<FreeTerm> {
    let vars = platform_vars();
    let g = word[i];

    // Scalar generator: replace by its polynomial value.
    if matches!(g, Gen::LieX | Gen::LieXStar) {
        let shift = word_shift(&word[i + 1..]);
        let value = match g {
            Gen::LieX => lie_poly(&vars, shift),
            _ => lie_star_poly(&vars, shift),
        };
        let mut rest = word.to_vec();
        rest.remove(i);
        return vec![(coeff.mul(&value), rest)];
    }

    let h = word[i + 1];
    if g == h && g.parity() == Parity::Odd {
        // Odd square vanishes.
        return Vec::new();
    }

    let suffix_shift = word_shift(&word[i + 2..]);
    let mut swapped = word.to_vec();
    swapped.swap(i, i + 1);

    // Helper words: pair removed, or pair replaced by one generator.
    let drop_pair = || {
        let mut v = word.to_vec();
        v.remove(i + 1);
        v.remove(i);
        v
    };
    let replace_pair = |gen: Gen| {
        let mut v = drop_pair();
        v.insert(i, gen);
        v
    };

    let one = Poly::one(&vars);
    let minus = |p: &Poly| p.neg();
    let int = |v: i64| Poly::int(&vars, v);

    // g h -> sign * h g + extras, from the closed bracket table.
    let (sign, extras): (Poly, Vec<FreeTerm>) = match (g, h) {
        (Gen::EpsX, Gen::Q) | (Gen::IotaX, Gen::Q) => (one.clone(), vec![]),
        (Gen::Lap, Gen::Q) => (
            one.clone(),
            vec![(
                kx_poly(&vars, suffix_shift).mul_rat(&crate::scalar::rat_int(-2)),
                drop_pair(),
            )],
        ),
        (Gen::D, Gen::Q) => (one.clone(), vec![(int(2), replace_pair(Gen::EpsX))]),
        (Gen::Delta, Gen::Q) => (one.clone(), vec![(int(-2), replace_pair(Gen::IotaX))]),
        (Gen::Lap, Gen::EpsX) => (one.clone(), vec![(int(-2), replace_pair(Gen::D))]),
        (Gen::D, Gen::EpsX) => (minus(&one), vec![]),
        (Gen::Delta, Gen::EpsX) => (
            minus(&one),
            vec![(lie_star_poly(&vars, suffix_shift), drop_pair())],
        ),
        (Gen::IotaX, Gen::EpsX) => (minus(&one), vec![(one.clone(), replace_pair(Gen::Q))]),
        (Gen::D, Gen::Lap) | (Gen::Delta, Gen::Lap) => (one.clone(), vec![]),
        (Gen::IotaX, Gen::Lap) => (one.clone(), vec![(int(-2), replace_pair(Gen::Delta))]),
        (Gen::Delta, Gen::D) => (minus(&one), vec![(one.clone(), replace_pair(Gen::Lap))]),
        (Gen::IotaX, Gen::D) => (
            minus(&one),
            vec![(lie_poly(&vars, suffix_shift), drop_pair())],
        ),
        (Gen::IotaX, Gen::Delta) => (minus(&one), vec![]),
        _ => unreachable!("pair ({g:?}, {h:?}) is not reducible"),
    };

    let mut out = vec![(coeff.mul(&sign), swapped)];
    for (c, w) in extras {
        out.push((coeff.mul(&c), w));
    }
    out
}

/// Collapse a fully sorted word into its canonical key.
fn collect_sorted(word: &[Gen]) -> NormalWord {
    let mut w = NormalWord::empty();
    for g in word {
        match g {
            Gen::Q => w.q += 1,
            Gen::EpsX => w.eps = true,
            Gen::Lap => w.lap += 1,
            Gen::D => w.d = true,
            Gen::Delta => w.delta = true,
            Gen::IotaX => w.iota = true,
            Gen::LieX | Gen::LieXStar => unreachable!("scalars were eliminated"),
        }
    }
    w
}

/// Rewrite a formal sum to its normal form by local steps.
pub fn rewrite_free(sum: &[(Rat, Vec<Gen>)], strategy: &mut Strategy) -> Element {
    let vars = platform_vars();
    let mut pending: Vec<FreeTerm> = sum
        .iter()
        .map(|(c, w)| (Poly::constant(&vars, c.clone()), w.clone()))
        .collect();
    let mut done = Element::zero();

    while !pending.is_empty() {
        // Gather every reducible site across pending words.
        let mut sites: Vec<(usize, usize)> = Vec::new();
        for (ti, (_, w)) in pending.iter().enumerate() {
            for p in reducible_positions(w) {
                sites.push((ti, p));
            }
        }
        if sites.is_empty() {
            for (c, w) in pending.drain(..) {
                done = done.add(&Element::from_word_scaled(collect_sorted(&w), c));
            }
            break;
        }
        let (ti, p) = match strategy {
            Strategy::Leftmost => sites[0],
            Strategy::Random(rng) => sites[rng.gen_range(0..sites.len())],
        };
        let (coeff, word) = pending.swap_remove(ti);
        pending.extend(rewrite_at(&coeff, &word, p));
    }
    done
}
