//! Property tests for the exact scalar layer: ring axioms, derivations,
//! quadric reduction, and JSON round-trips on randomized expressions.

use std::sync::Arc;

use conforms_core::scalar::{
    json, rat, FactorSpec, Poly, QuadricContext, ScalarExpr, VarTable,
};
use proptest::prelude::*;

fn table() -> Arc<VarTable> {
    VarTable::new(&["x", "y", "z"], &["w"])
}

fn factor(t: &Arc<VarTable>) -> Arc<FactorSpec> {
    // omega = x*y + z, so d omega = (y, x, 1).
    FactorSpec::new(
        "scale",
        t,
        vec![
            ScalarExpr::var(t, 1),
            ScalarExpr::var(t, 0),
            ScalarExpr::one(t),
        ],
    )
}

fn arb_rat() -> impl Strategy<Value = conforms_core::scalar::Rat> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| rat(n, d))
}

fn arb_poly(t: Arc<VarTable>) -> impl Strategy<Value = Poly> {
    let term = (arb_rat(), proptest::collection::vec(0u16..3, 4));
    proptest::collection::vec(term, 0..4).prop_map(move |terms| {
        let mut p = Poly::zero(&t);
        for (c, exps) in terms {
            p = p.add(&Poly::monomial(&t, c, &exps));
        }
        p
    })
}

/// Random expression: polynomial numerator over a pool of denominators,
/// times a small power of the formal factor.
fn arb_expr(t: Arc<VarTable>) -> impl Strategy<Value = ScalarExpr> {
    let den = prop_oneof![
        Just(None),
        Just(Some(0usize)),
        Just(Some(1usize)),
        Just(Some(2usize)),
    ];
    (arb_poly(t.clone()), den, -2i64..=2).prop_map(move |(num, den, fpow)| {
        let pool = [
            Poly::var(&t, 0),
            Poly::var(&t, 0).add(&Poly::var(&t, 1)),
            Poly::var(&t, 2).pow(2).add(&Poly::one(&t)),
        ];
        let mut e = match den {
            None => ScalarExpr::from_poly(num),
            Some(i) => ScalarExpr::fraction(num, pool[i].clone()),
        };
        if fpow != 0 {
            e = e.mul(&ScalarExpr::factor_power_of(&factor(&t), fpow));
        }
        e
    })
}

proptest! {
    #[test]
    fn ring_axioms(
        a in arb_expr(table()),
        b in arb_expr(table()),
        c in arb_expr(table()),
    ) {
        let t = table();
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert!(a.add(&a.neg()).is_zero());
        prop_assert_eq!(a.mul(&ScalarExpr::one(&t)), a.clone());
        prop_assert!(a.mul(&ScalarExpr::zero(&t)).is_zero());
    }

    #[test]
    fn subtraction_detects_equality(a in arb_expr(table())) {
        prop_assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn leibniz_rule(
        a in arb_expr(table()),
        b in arb_expr(table()),
        coord in 0usize..3,
    ) {
        let lhs = a.mul(&b).partial_derivative(coord);
        let rhs = a
            .partial_derivative(coord)
            .mul(&b)
            .add(&a.mul(&b.partial_derivative(coord)));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn partials_commute(
        a in arb_expr(table()),
        i in 0usize..3,
        j in 0usize..3,
    ) {
        let dij = a.partial_derivative(i).partial_derivative(j);
        let dji = a.partial_derivative(j).partial_derivative(i);
        prop_assert_eq!(dij, dji);
    }

    #[test]
    fn division_inverts_multiplication(
        a in arb_expr(table()),
        c in arb_rat(),
        e in proptest::collection::vec(0u16..3, 4),
    ) {
        let t = table();
        prop_assume!(!c.numer().eq(&0.into()));
        let b = ScalarExpr::from_poly(Poly::monomial(&t, c, &e));
        let q = a.mul(&b).div(&b).unwrap();
        prop_assert_eq!(q, a);
    }

    #[test]
    fn json_roundtrip(a in arb_expr(table())) {
        let doc = json::expr_to_json(&a);
        let back = json::expr_from_json(&doc).unwrap();
        prop_assert_eq!(&back, &a);
        let doc2 = json::expr_to_json(&back);
        prop_assert_eq!(
            serde_json::to_string(&doc).unwrap(),
            serde_json::to_string(&doc2).unwrap()
        );
    }
}

fn arb_ambient_expr(ctx: QuadricContext) -> impl Strategy<Value = ScalarExpr> {
    let t = Arc::clone(ctx.vars());
    let nv = t.len();
    let term = (arb_rat(), proptest::collection::vec(0u16..2, nv));
    proptest::collection::vec(term, 0..4).prop_map(move |terms| {
        let mut p = Poly::zero(&t);
        for (c, exps) in terms {
            p = p.add(&Poly::monomial(&t, c, &exps));
        }
        ScalarExpr::from_poly(p)
    })
}

proptest! {
    #[test]
    fn reduction_is_linear_idempotent_and_kills_the_ideal(
        a in arb_ambient_expr(QuadricContext::new(4).unwrap()),
        b in arb_ambient_expr(QuadricContext::new(4).unwrap()),
    ) {
        let ctx = QuadricContext::new(4).unwrap();
        let ra = ctx.reduce_mod_quadric(&a).unwrap();
        let rb = ctx.reduce_mod_quadric(&b).unwrap();
        // Idempotent.
        prop_assert_eq!(&ctx.reduce_mod_quadric(&ra).unwrap(), &ra);
        // Linear.
        let sum = ctx.reduce_mod_quadric(&a.add(&b)).unwrap();
        prop_assert_eq!(&sum, &ra.add(&rb));
        // Kills every multiple of the quadric.
        let qa = ctx.q_expr().mul(&a);
        prop_assert!(ctx.is_zero_mod_quadric(&qa).unwrap());
        // Representatives are free of the eliminated coordinate.
        prop_assert!(!ra.depends_on(ctx.idx_minus()));
    }

    #[test]
    fn homogeneous_products_add_degrees(
        da in 0u16..3,
        db in 0u16..3,
        ca in arb_rat(),
        cb in arb_rat(),
    ) {
        let ctx = QuadricContext::new(4).unwrap();
        let t = ctx.vars();
        prop_assume!(!ca.numer().eq(&0.into()) && !cb.numer().eq(&0.into()));
        // Monomial in xp and x1 of degree 2*d built from the quadric too.
        let a = ScalarExpr::from_poly(
            Poly::var(t, 0).pow(da as u32).mul_rat(&ca),
        ).mul(&ctx.q_expr());
        let b = ScalarExpr::from_poly(
            Poly::var(t, 1).pow(db as u32).mul_rat(&cb),
        );
        let (ha, hb) = (a.homogeneity_degree(), b.homogeneity_degree());
        prop_assert_eq!(ha, Some(da as i64 + 2));
        prop_assert_eq!(hb, Some(db as i64));
        prop_assert_eq!(a.mul(&b).homogeneity_degree(), Some(da as i64 + 2 + db as i64));
    }
}
