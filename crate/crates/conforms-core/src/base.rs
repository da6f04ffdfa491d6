//! Coordinates and forms on the conformally flat base.
//!
//! Base coordinates are `y1, .., yn`. A degree-`k` base form stores its
//! components over these `n` letters in a [`FormData`].

use std::sync::Arc;

use crate::forms::FormData;
use crate::scalar::{Poly, ScalarExpr, VarTable};

/// The base coordinate table for dimension `n`.
#[derive(Debug, Clone)]
pub struct BaseContext {
    n: usize,
    vars: Arc<VarTable>,
}

impl BaseContext {
    pub fn new(n: usize) -> Self {
        Self::with_params(n, &[])
    }

    pub fn with_params(n: usize, params: &[&str]) -> Self {
        assert!(n >= 1 && n <= 14, "base dimension out of range");
        let coords: Vec<String> = (1..=n).map(|i| format!("y{i}")).collect();
        let params: Vec<String> = params.iter().map(|s| (*s).to_owned()).collect();
        BaseContext {
            n,
            vars: VarTable::new(&coords, &params),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    /// Variable index of the coordinate `y_i`, `i` in `1..=n`.
    pub fn idx(&self, i: usize) -> usize {
        assert!((1..=self.n).contains(&i), "coordinate index out of range");
        i - 1
    }

    pub fn coord(&self, i: usize) -> ScalarExpr {
        ScalarExpr::var(&self.vars, self.idx(i))
    }

    /// `|y|^2 = sum_i y_i^2`.
    pub fn norm_sq(&self) -> Poly {
        let mut s = Poly::zero(&self.vars);
        for i in 1..=self.n {
            let yi = Poly::var(&self.vars, self.idx(i));
            s = s.add(&yi.mul(&yi));
        }
        s
    }

    pub fn zero_form(&self, degree: usize) -> FormData {
        FormData::zero(&self.vars, self.n, degree)
    }

    /// Form with a single component: a 0-form from a scalar.
    pub fn scalar_form(&self, f: ScalarExpr) -> FormData {
        let mut data = self.zero_form(0);
        data.set(0, f);
        data
    }

    /// Euclidean exterior derivative of a base form.
    pub fn d(&self, form: &FormData) -> FormData {
        if form.degree() == self.n {
            return self.zero_form(self.n);
        }
        form.d_with(|a, f| f.partial_derivative(a))
    }

    /// Euclidean codifferential (`delta = -div`, adjoint to [`BaseContext::d`]).
    pub fn delta_euclid(&self, form: &FormData) -> FormData {
        if form.degree() == 0 {
            return self.zero_form(0);
        }
        form.codiff_with(|a| a, |a, f| f.partial_derivative(a))
    }
}
