//! Evaluation of abstract words and normal forms on concrete cone forms.
//!
//! This ties the rewriting layer to the exterior calculus: a word evaluated
//! generator by generator must agree with its normal form, where the
//! platform coefficients are specialized at `n`, the component weight
//! `w = (declared weight) - (form degree)`, and `k = form degree`.

use std::sync::Arc;

use super::{platform_vars, Element, Gen};
use crate::ambient::AmbientForm;
use crate::scalar::{Poly, Rat, VarTable};

/// Apply one generator concretely.
pub fn apply_gen_on(g: Gen, phi: &AmbientForm) -> AmbientForm {
    match g {
        Gen::Q => phi.q_mul(),
        Gen::EpsX => phi.eps_x(),
        Gen::Lap => phi.lap(),
        Gen::D => phi.d(),
        Gen::Delta => phi.delta(),
        Gen::IotaX => phi.iota_x(),
        Gen::LieX => phi.lie_x(),
        Gen::LieXStar => phi.lie_x_star(),
    }
}

/// Apply a word (rightmost generator first).
pub fn eval_word_on(word: &[Gen], phi: &AmbientForm) -> AmbientForm {
    let mut acc = phi.clone();
    for g in word.iter().rev() {
        acc = apply_gen_on(*g, &acc);
    }
    acc
}

/// Specialize a platform coefficient at concrete `(n, w, k)`.
pub fn specialize(coeff: &Poly, n: i64, w: i64, k: i64) -> Rat {
    let vars: Arc<VarTable> = platform_vars();
    let images = vec![
        Poly::int(&vars, n),
        Poly::int(&vars, w),
        Poly::int(&vars, k),
    ];
    coeff
        .compose(&images, &vars)
        .as_constant()
        .expect("platform coefficient specializes to a constant")
}

/// Evaluate a normal form on a homogeneous form with integer declared
/// weight. Returns `None` when the form does not expose one.
pub fn eval_element_on(e: &Element, phi: &AmbientForm) -> Option<AmbientForm> {
    let declared = phi.weight_int()?;
    let k = phi.degree() as i64;
    let w = declared - k;
    let n = phi.ctx().n() as i64;
    let mut acc: Option<AmbientForm> = None;
    for (word, coeff) in e.terms() {
        let c = specialize(coeff, n, w, k);
        let term = eval_word_on(&word.gens(), phi).scale_rat(&c);
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term),
        });
    }
    Some(acc.unwrap_or_else(|| AmbientForm::zero(phi.ctx(), phi.degree(), declared)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::normal_form;
    use crate::ambient::sample::{random_homogeneous_form, rng_for};
    use crate::scalar::QuadricContext;
    use rand::Rng;

    const ALL_GENS: [Gen; 8] = [
        Gen::Q,
        Gen::EpsX,
        Gen::Lap,
        Gen::D,
        Gen::Delta,
        Gen::IotaX,
        Gen::LieX,
        Gen::LieXStar,
    ];

    #[test]
    fn normal_forms_evaluate_like_the_words() {
        let ctx = QuadricContext::new(4).unwrap();
        let mut rng = rng_for(42);
        for _ in 0..40 {
            let len = rng.gen_range(0..=4usize);
            let word: Vec<Gen> = (0..len).map(|_| ALL_GENS[rng.gen_range(0..8)]).collect();
            let k = rng.gen_range(0..=3usize);
            let w = rng.gen_range(-2..=3i64);
            let phi = random_homogeneous_form(&ctx, k, w, &mut rng);
            let direct = eval_word_on(&word, &phi);
            let via_nf = eval_element_on(&normal_form(&word), &phi)
                .expect("sampled form is homogeneous");
            assert_eq!(
                direct, via_nf,
                "word {word:?} on degree {k}, weight {w} form"
            );
        }
    }

    #[test]
    fn evaluation_requires_declared_weight() {
        let ctx = QuadricContext::new(4).unwrap();
        let mut rng = rng_for(3);
        let phi = crate::ambient::sample::random_polynomial_form(&ctx, 1, 2, &mut rng);
        assert!(eval_element_on(&Element::identity(), &phi).is_none());
    }
}
