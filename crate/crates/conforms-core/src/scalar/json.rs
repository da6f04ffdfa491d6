//! Canonical JSON form of scalar expressions.
//!
//! The expression AST uses five node shapes:
//!
//! * `{"op": "+", "args": [..]}` and `{"op": "*", "args": [..]}`,
//! * `{"op": "pow", "base": node, "exp": int}` with negative exponents for
//!   denominator atoms,
//! * `{"op": "var", "name": str}`,
//! * `{"op": "rat", "num": str, "den": str}` with big integers as strings.
//!
//! A full expression document records the variable table, the optional factor
//! declaration with its gradient, and one `{factor_power, expr}` entry per
//! `t`-power. For single-power expressions the exponent is mirrored in a
//! top-level `factor_power` field. Printing a parsed document reproduces it
//! byte for byte because maps serialize with sorted keys and every list is
//! emitted in normal-form order.

use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::One;
use serde_json::{json, Map, Value};

use super::expr::{FactorSpec, RatFunc, ScalarExpr};
use super::poly::{Poly, VarTable};
use super::{Rat, ScalarError};

fn invalid(path: &str, reason: &str) -> ScalarError {
    ScalarError::InvalidAst {
        reason: format!("{path}: {reason}"),
    }
}

// ---- Printing ----

fn rat_to_ast(c: &Rat) -> Value {
    json!({
        "op": "rat",
        "num": c.numer().to_string(),
        "den": c.denom().to_string(),
    })
}

fn pow_ast(base: Value, exp: i64) -> Value {
    if exp == 1 {
        base
    } else {
        json!({"op": "pow", "base": base, "exp": exp})
    }
}

fn product_ast(mut parts: Vec<Value>) -> Value {
    match parts.len() {
        0 => rat_to_ast(&Rat::one()),
        1 => parts.pop().unwrap(),
        _ => json!({"op": "*", "args": parts}),
    }
}

fn poly_to_ast(p: &Poly) -> Value {
    if p.is_zero() {
        return rat_to_ast(&Rat::from_integer(0.into()));
    }
    let vars = p.vars();
    let mut terms: Vec<Value> = Vec::new();
    for (m, c) in p.terms() {
        let mut parts: Vec<Value> = Vec::new();
        if !c.is_one() || m.is_one() {
            parts.push(rat_to_ast(c));
        }
        for (idx, &e) in m.exponents().iter().enumerate() {
            if e > 0 {
                parts.push(pow_ast(
                    json!({"op": "var", "name": vars.name(idx)}),
                    e as i64,
                ));
            }
        }
        terms.push(product_ast(parts));
    }
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        json!({"op": "+", "args": terms})
    }
}

fn ratfunc_to_ast(rf: &RatFunc) -> Value {
    let num = poly_to_ast(rf.num());
    if rf.den().is_empty() {
        return num;
    }
    let mut parts = vec![num];
    for (atom, e) in rf.den() {
        parts.push(pow_ast(poly_to_ast(atom), -(*e as i64)));
    }
    product_ast(parts)
}

/// Full JSON document for an expression, including its variable table.
pub fn expr_to_json(e: &ScalarExpr) -> Value {
    let vars = e.vars();
    let mut doc = Map::new();
    doc.insert("schema".to_owned(), json!(1));
    doc.insert(
        "vars".to_owned(),
        json!({
            "coords": vars.coord_names(),
            "params": vars.param_names(),
        }),
    );
    if let Some(spec) = e.factor() {
        let grads: Vec<Value> = (0..vars.n_coords())
            .map(|a| {
                let g = spec.grad(a);
                g.as_ratfunc()
                    .map(ratfunc_to_ast)
                    .unwrap_or_else(|| rat_to_ast(&Rat::from_integer(0.into())))
            })
            .collect();
        doc.insert(
            "factor".to_owned(),
            json!({"name": spec.name(), "grad": grads}),
        );
    }
    let terms: Vec<Value> = e
        .terms()
        .map(|(k, rf)| json!({"factor_power": k, "expr": ratfunc_to_ast(rf)}))
        .collect();
    doc.insert("terms".to_owned(), Value::Array(terms));
    if let Some(k) = e.factor_power() {
        doc.insert("factor_power".to_owned(), json!(k));
    }
    Value::Object(doc)
}

// ---- Parsing ----

fn get_str<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a str, ScalarError> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| invalid(path, &format!("missing string field `{key}`")))
}

fn parse_bigint(s: &str, path: &str) -> Result<BigInt, ScalarError> {
    BigInt::from_str(s).map_err(|_| invalid(path, &format!("invalid integer `{s}`")))
}

/// Evaluates an AST node over the given variable table.
pub fn ast_to_expr(
    v: &Value,
    vars: &Arc<VarTable>,
    path: &str,
) -> Result<ScalarExpr, ScalarError> {
    let op = get_str(v, "op", path)?;
    match op {
        "+" | "*" => {
            let args = v
                .get("args")
                .and_then(Value::as_array)
                .ok_or_else(|| invalid(path, "missing `args` array"))?;
            let mut acc = if op == "+" {
                ScalarExpr::zero(vars)
            } else {
                ScalarExpr::one(vars)
            };
            for (i, arg) in args.iter().enumerate() {
                let sub = ast_to_expr(arg, vars, &format!("{path}.args[{i}]"))?;
                acc = if op == "+" { acc.add(&sub) } else { acc.mul(&sub) };
            }
            Ok(acc)
        }
        "pow" => {
            let base = v
                .get("base")
                .ok_or_else(|| invalid(path, "missing `base`"))?;
            let exp = v
                .get("exp")
                .and_then(Value::as_i64)
                .ok_or_else(|| invalid(path, "missing integer `exp`"))?;
            let base = ast_to_expr(base, vars, &format!("{path}.base"))?;
            base.pow(exp)
        }
        "var" => {
            let name = get_str(v, "name", path)?;
            vars.index_of(name)
                .map(|idx| ScalarExpr::var(vars, idx))
                .ok_or_else(|| invalid(path, &format!("unknown variable `{name}`")))
        }
        "rat" => {
            let num = parse_bigint(get_str(v, "num", path)?, path)?;
            let den = parse_bigint(get_str(v, "den", path)?, path)?;
            if den == BigInt::from(0) {
                return Err(invalid(path, "zero denominator in rational"));
            }
            Ok(ScalarExpr::constant(vars, Rat::new(num, den)))
        }
        other => Err(invalid(path, &format!("unknown op `{other}`"))),
    }
}

/// Parses a full expression document produced by [`expr_to_json`].
pub fn expr_from_json(v: &Value) -> Result<ScalarExpr, ScalarError> {
    let names = |key: &str| -> Result<Vec<String>, ScalarError> {
        v.get("vars")
            .and_then(|t| t.get(key))
            .and_then(Value::as_array)
            .ok_or_else(|| invalid("$.vars", &format!("missing `{key}` array")))?
            .iter()
            .map(|s| {
                s.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| invalid("$.vars", "variable names must be strings"))
            })
            .collect()
    };
    let coords = names("coords")?;
    let params = names("params")?;
    let vars = VarTable::new(&coords, &params);

    let factor = match v.get("factor") {
        None | Some(Value::Null) => None,
        Some(fv) => {
            let name = get_str(fv, "name", "$.factor")?;
            let grads = fv
                .get("grad")
                .and_then(Value::as_array)
                .ok_or_else(|| invalid("$.factor", "missing `grad` array"))?;
            if grads.len() != vars.n_coords() {
                return Err(invalid("$.factor", "gradient length must match coords"));
            }
            let grad: Result<Vec<ScalarExpr>, ScalarError> = grads
                .iter()
                .enumerate()
                .map(|(i, g)| ast_to_expr(g, &vars, &format!("$.factor.grad[{i}]")))
                .collect();
            Some(FactorSpec::new(name, &vars, grad?))
        }
    };

    let terms = v
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid("$", "missing `terms` array"))?;
    let mut acc = ScalarExpr::zero(&vars);
    for (i, term) in terms.iter().enumerate() {
        let path = format!("$.terms[{i}]");
        let k = term
            .get("factor_power")
            .and_then(Value::as_i64)
            .ok_or_else(|| invalid(&path, "missing integer `factor_power`"))?;
        let expr = term
            .get("expr")
            .ok_or_else(|| invalid(&path, "missing `expr`"))?;
        let mut e = ast_to_expr(expr, &vars, &format!("{path}.expr"))?;
        if k != 0 {
            let spec = factor
                .as_ref()
                .ok_or_else(|| invalid(&path, "factor power without factor declaration"))?;
            e = e.mul(&ScalarExpr::factor_power_of(spec, k));
        }
        acc = acc.add(&e);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::super::rat;
    use super::*;

    fn table() -> Arc<VarTable> {
        VarTable::new(&["x", "y"], &["w"])
    }

    fn roundtrip(e: &ScalarExpr) {
        let doc = expr_to_json(e);
        let back = expr_from_json(&doc).unwrap();
        assert_eq!(&back, e);
        // Printing the reparsed expression is byte-identical.
        let doc2 = expr_to_json(&back);
        assert_eq!(
            serde_json::to_string(&doc).unwrap(),
            serde_json::to_string(&doc2).unwrap()
        );
    }

    #[test]
    fn roundtrip_polynomials_and_fractions() {
        let t = table();
        let x = ScalarExpr::var(&t, 0);
        let y = ScalarExpr::var(&t, 1);
        let w = ScalarExpr::var(&t, 2);
        roundtrip(&ScalarExpr::zero(&t));
        roundtrip(&ScalarExpr::constant(&t, rat(-7, 3)));
        roundtrip(&x.mul(&x).add(&y.mul_rat(&rat(2, 5))).mul(&w));
        let f = ScalarExpr::fraction(
            Poly::var(&t, 1),
            Poly::var(&t, 0)
                .mul(&Poly::var(&t, 0))
                .add(&Poly::one(&t)),
        );
        roundtrip(&f.add(&x));
    }

    #[test]
    fn roundtrip_factor_powers() {
        let t = table();
        let x = ScalarExpr::var(&t, 0);
        let y = ScalarExpr::var(&t, 1);
        let spec = FactorSpec::new("scale", &t, vec![y.clone(), x.clone()]);
        let e = ScalarExpr::factor_power_of(&spec, 2)
            .mul(&x)
            .add(&ScalarExpr::factor_power_of(&spec, -1).mul(&y));
        roundtrip(&e);
        let doc = expr_to_json(&e);
        // Two distinct powers: no top-level factor_power field.
        assert!(doc.get("factor_power").is_none());
        let single = ScalarExpr::factor_power_of(&spec, -3).mul(&x);
        let doc = expr_to_json(&single);
        assert_eq!(doc.get("factor_power").and_then(Value::as_i64), Some(-3));
    }

    #[test]
    fn parse_rejects_malformed_nodes() {
        let t = table();
        let bad = json!({"op": "nope"});
        assert!(matches!(
            ast_to_expr(&bad, &t, "$"),
            Err(ScalarError::InvalidAst { .. })
        ));
        let bad = json!({"op": "var", "name": "zz"});
        assert!(matches!(
            ast_to_expr(&bad, &t, "$"),
            Err(ScalarError::InvalidAst { .. })
        ));
        let bad = json!({"op": "rat", "num": "1", "den": "0"});
        assert!(matches!(
            ast_to_expr(&bad, &t, "$"),
            Err(ScalarError::InvalidAst { .. })
        ));
    }

    #[test]
    fn negative_pow_builds_denominators() {
        let t = table();
        let ast = json!({
            "op": "*",
            "args": [
                {"op": "var", "name": "y"},
                {"op": "pow", "base": {"op": "var", "name": "x"}, "exp": -2},
            ]
        });
        let e = ast_to_expr(&ast, &t, "$").unwrap();
        let expect = ScalarExpr::fraction(Poly::var(&t, 1), Poly::var(&t, 0).pow(2));
        assert_eq!(e, expect);
    }
}
