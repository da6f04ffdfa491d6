//! Seeded random inputs for the scale-level verification suites: weighted
//! forms with polynomial components, and scales of both supported flavors
//! (polynomial `omega` with a formal factor, rational `e^omega`). A recorded
//! seed reproduces the exact inputs.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

pub use crate::ambient::sample::rng_for;

use crate::ambient::scale::OmegaScale;
use crate::base::BaseContext;
use crate::forms::{masks_of_degree, FormData};
use crate::scalar::{rat_int, Poly, ScalarExpr};

use super::weighted::WeightedForm;

fn nonzero_coeff(rng: &mut ChaCha20Rng) -> i64 {
    let c = rng.gen_range(1..=3i64);
    if rng.gen_bool(0.5) {
        -c
    } else {
        c
    }
}

/// Random polynomial over the base coordinates with one or two monomials of
/// total degree at most `max_degree`.
pub fn random_base_poly(base: &BaseContext, max_degree: usize, rng: &mut ChaCha20Rng) -> Poly {
    let vars = base.vars();
    let mut p = Poly::zero(vars);
    let terms = rng.gen_range(1..=2usize);
    for _ in 0..terms {
        let mut exps = vec![0u16; vars.len()];
        let deg = rng.gen_range(0..=max_degree);
        for _ in 0..deg {
            exps[rng.gen_range(0..base.n())] += 1;
        }
        p = p.add(&Poly::monomial(vars, rat_int(nonzero_coeff(rng)), &exps));
    }
    if p.is_zero() {
        return random_base_poly(base, max_degree, rng);
    }
    p
}

/// Random weighted `degree`-form with one or two populated components.
pub fn random_weighted_form(
    base: &BaseContext,
    degree: usize,
    weight: i64,
    max_poly_degree: usize,
    rng: &mut ChaCha20Rng,
) -> WeightedForm {
    let masks = masks_of_degree(base.n(), degree);
    let mut data = FormData::zero(base.vars(), base.n(), degree);
    let picks = rng.gen_range(1..=2usize);
    for _ in 0..picks {
        let mask = masks[rng.gen_range(0..masks.len())];
        data.add_to(
            mask,
            ScalarExpr::from_poly(random_base_poly(base, max_poly_degree, rng)),
        );
    }
    if data.is_zero() {
        return random_weighted_form(base, degree, weight, max_poly_degree, rng);
    }
    WeightedForm::new(data, weight)
}

/// Random polynomial `omega` of degree at most two; `e^omega` is a formal
/// factor.
pub fn random_poly_scale(base: &BaseContext, rng: &mut ChaCha20Rng) -> OmegaScale {
    let omega = random_base_poly(base, 2, rng);
    OmegaScale::from_omega_poly(base, &omega)
}

/// Random rational scale `e^omega = 1 + p` or `1 / (1 + p)` with `p` a small
/// polynomial; either way the factor is a unit in the rational functions.
pub fn random_rational_scale(base: &BaseContext, rng: &mut ChaCha20Rng) -> OmegaScale {
    let p = random_base_poly(base, 2, rng);
    let one_plus = Poly::one(base.vars()).add(&p.mul(&p));
    let exp_omega = if rng.gen_bool(0.5) {
        ScalarExpr::from_poly(one_plus)
    } else {
        ScalarExpr::fraction(Poly::one(base.vars()), one_plus)
    };
    OmegaScale::from_rational(base, exp_omega)
}

/// Random scale, alternating between the two flavors.
pub fn random_scale(base: &BaseContext, rng: &mut ChaCha20Rng) -> OmegaScale {
    if rng.gen_bool(0.5) {
        random_poly_scale(base, rng)
    } else {
        random_rational_scale(base, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let base = BaseContext::new(4);
        let a = random_weighted_form(&base, 2, -1, 2, &mut rng_for(3));
        let b = random_weighted_form(&base, 2, -1, 2, &mut rng_for(3));
        assert_eq!(a, b);
    }

    #[test]
    fn scales_are_units() {
        let base = BaseContext::new(6);
        let mut rng = rng_for(9);
        for _ in 0..4 {
            let s = random_scale(&base, &mut rng);
            assert!(s.exp_omega().inverse().is_ok());
        }
    }
}
