//! Exterior calculus of homogeneous forms on the flat metric cone.
//!
//! Forms live over the ambient coordinates of a [`QuadricContext`]; letters of
//! the component bitmask follow the coordinate order `xp, x1, .., xn, xm`.
//! The operator set consists of the exterior derivative `d`, the
//! codifferential `delta` normalized so that the form Laplacian
//! `lap = d delta + delta d` equals minus the coordinate Laplacian, the wedge
//! `eps(X)` and contraction `iota(X)` with the Euler field, multiplication by
//! the quadric `Q`, and the derived operators `lie(X)`, `lie*(X)`, `grad(X)`,
//! `K(X) = n + 2 grad(X) + 2`.
//!
//! A form may carry a declared homogeneity weight `w`, meaning
//! `lie(X) phi = w phi`, equivalently every component is homogeneous of
//! coordinate degree `w - k`. Weights are scalar expressions so that inert
//! parameters can enter (used by the dimensional-continuation route); checked
//! constructors verify the componentwise degree identity exactly.

pub mod sample;
pub mod scale;
pub mod tables;

use std::fmt;
use std::sync::Arc;

use crate::forms::FormData;
use crate::scalar::{QuadricContext, Rat, ScalarExpr};

/// Errors from ambient form construction and restriction.
#[derive(Debug, thiserror::Error)]
pub enum AmbientError {
    #[error("component at mask {mask:#b} is not homogeneous of the declared weight")]
    WeightMismatch { mask: u16 },

    #[error("form degree {degree} does not fit {dim} letters")]
    DegreeOutOfRange { degree: usize, dim: usize },

    #[error(transparent)]
    Scalar(#[from] crate::scalar::ScalarError),
}

/// A differential form on the ambient space, with an optional declared
/// homogeneity weight (the `lie(X)` eigenvalue).
#[derive(Clone)]
pub struct AmbientForm {
    ctx: QuadricContext,
    data: FormData,
    weight: Option<ScalarExpr>,
}

impl AmbientForm {
    // ---- Constructors ----

    /// Zero form of the given degree with a declared weight.
    pub fn zero(ctx: &QuadricContext, degree: usize, weight: i64) -> Self {
        AmbientForm {
            ctx: ctx.clone(),
            data: FormData::zero(ctx.vars(), ctx.dim(), degree),
            weight: Some(ScalarExpr::int(ctx.vars(), weight)),
        }
    }

    /// Form from components with no homogeneity claim.
    pub fn general(ctx: &QuadricContext, data: FormData) -> Self {
        assert_eq!(data.dim(), ctx.dim());
        AmbientForm {
            ctx: ctx.clone(),
            data,
            weight: None,
        }
    }

    /// Form from components with a declared integer weight, verified exactly.
    pub fn homogeneous(
        ctx: &QuadricContext,
        data: FormData,
        weight: i64,
    ) -> Result<Self, AmbientError> {
        Self::homogeneous_expr(ctx, data, ScalarExpr::int(ctx.vars(), weight))
    }

    /// Form from components with a declared weight expression (constants and
    /// inert parameters only), verified via `grad(X) phi_I = (w - k) phi_I`.
    pub fn homogeneous_expr(
        ctx: &QuadricContext,
        data: FormData,
        weight: ScalarExpr,
    ) -> Result<Self, AmbientError> {
        assert_eq!(data.dim(), ctx.dim());
        let k = data.degree() as i64;
        let comp_weight = weight.sub(&ScalarExpr::int(ctx.vars(), k));
        for (mask, f) in data.iter() {
            let mut euler = ScalarExpr::zero(ctx.vars());
            for a in 0..ctx.dim() {
                euler = euler.add(&ctx.euler_component(a).mul(&f.partial_derivative(a)));
            }
            if !euler.sub(&comp_weight.mul(f)).is_zero() {
                return Err(AmbientError::WeightMismatch { mask });
            }
        }
        Ok(AmbientForm {
            ctx: ctx.clone(),
            data,
            weight: Some(weight),
        })
    }

    fn with_data(&self, data: FormData, weight_shift: i64) -> AmbientForm {
        let weight = self
            .weight
            .as_ref()
            .map(|w| w.add(&ScalarExpr::int(self.ctx.vars(), weight_shift)));
        AmbientForm {
            ctx: self.ctx.clone(),
            data,
            weight,
        }
    }

    fn zero_like(&self, degree: usize, weight_shift: i64) -> AmbientForm {
        let data = FormData::zero(self.ctx.vars(), self.ctx.dim(), degree);
        self.with_data(data, weight_shift)
    }

    // ---- Accessors ----

    pub fn ctx(&self) -> &QuadricContext {
        &self.ctx
    }

    pub fn data(&self) -> &FormData {
        &self.data
    }

    pub fn degree(&self) -> usize {
        self.data.degree()
    }

    /// Declared `lie(X)` weight, when the form carries one.
    pub fn weight(&self) -> Option<&ScalarExpr> {
        self.weight.as_ref()
    }

    pub fn weight_int(&self) -> Option<i64> {
        self.weight
            .as_ref()
            .and_then(|w| w.as_rat_const())
            .and_then(|c| {
                if c.is_integer() {
                    i64::try_from(c.to_integer()).ok()
                } else {
                    None
                }
            })
    }

    pub fn is_zero(&self) -> bool {
        self.data.is_zero()
    }

    /// Every component lies in the ideal generated by the quadric.
    pub fn is_in_quadric_ideal(&self) -> Result<bool, AmbientError> {
        for (_, f) in self.data.iter() {
            if !self.ctx.is_zero_mod_quadric(f)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    // ---- Linear structure ----

    pub fn add(&self, other: &AmbientForm) -> AmbientForm {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let weight = match (&self.weight, &other.weight) {
            (Some(a), Some(b)) if a == b => Some(a.clone()),
            _ => None,
        };
        AmbientForm {
            ctx: self.ctx.clone(),
            data: self.data.add(&other.data),
            weight,
        }
    }

    pub fn sub(&self, other: &AmbientForm) -> AmbientForm {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> AmbientForm {
        AmbientForm {
            ctx: self.ctx.clone(),
            data: self.data.neg(),
            weight: self.weight.clone(),
        }
    }

    pub fn scale_rat(&self, c: &Rat) -> AmbientForm {
        AmbientForm {
            ctx: self.ctx.clone(),
            data: self.data.scale_rat(c),
            weight: self.weight.clone(),
        }
    }

    pub fn scale_int(&self, c: i64) -> AmbientForm {
        self.scale_rat(&crate::scalar::rat_int(c))
    }

    // ---- Operators ----

    /// Exterior derivative. Weight shift 0.
    pub fn d(&self) -> AmbientForm {
        if self.degree() == self.ctx.dim() {
            return self.zero_like(self.degree(), 0);
        }
        let data = self.data.d_with(|a, f| f.partial_derivative(a));
        self.with_data(data, 0)
    }

    /// Codifferential `delta phi = -iota(d^a) d_a phi`. Weight shift -2.
    pub fn delta(&self) -> AmbientForm {
        if self.degree() == 0 {
            return self.zero_like(0, -2);
        }
        let pair = {
            let ctx = self.ctx.clone();
            move |a: usize| ctx.h_pair(a)
        };
        let data = self
            .data
            .codiff_with(pair, |a, f| f.partial_derivative(a));
        self.with_data(data, -2)
    }

    /// Form Laplacian `d delta + delta d`. Weight shift -2.
    ///
    /// At the extreme degrees one summand vanishes identically; using the
    /// surviving route alone keeps the degree bookkeeping exact even when the
    /// result is the zero form.
    pub fn lap(&self) -> AmbientForm {
        if self.degree() == 0 {
            return self.d().delta();
        }
        if self.degree() == self.ctx.dim() {
            return self.delta().d();
        }
        self.d().delta().add(&self.delta().d())
    }

    /// Minus the coordinate Laplacian applied componentwise; equals [`lap`]
    /// (checked by tests, both routes are kept).
    pub fn lap_direct(&self) -> AmbientForm {
        let ctx = self.ctx.clone();
        let data = self.data.map(|_, f| {
            let mut acc = ScalarExpr::zero(ctx.vars());
            for a in 0..ctx.dim() {
                let d2 = f
                    .partial_derivative(a)
                    .partial_derivative(ctx.h_pair(a));
                acc = acc.add(&d2);
            }
            acc.neg()
        });
        self.with_data(data, -2)
    }

    /// Wedge with the tautological one-form `X_flat`. Weight shift +2.
    pub fn eps_x(&self) -> AmbientForm {
        if self.degree() == self.ctx.dim() {
            return self.zero_like(self.degree(), 2);
        }
        let cov: Vec<ScalarExpr> = (0..self.ctx.dim())
            .map(|a| self.ctx.x_flat_component(a))
            .collect();
        self.with_data(self.data.wedge1(&cov), 2)
    }

    /// Contraction with the Euler field. Weight shift 0.
    pub fn iota_x(&self) -> AmbientForm {
        if self.degree() == 0 {
            return self.zero_like(0, 0);
        }
        let contra: Vec<ScalarExpr> = (0..self.ctx.dim())
            .map(|a| self.ctx.euler_component(a))
            .collect();
        self.with_data(self.data.contract1(&contra), 0)
    }

    /// Coordinate degree operator `grad(X) = x^A d_A` componentwise.
    pub fn grad_x(&self) -> AmbientForm {
        let ctx = self.ctx.clone();
        let data = self.data.map(|_, f| {
            let mut acc = ScalarExpr::zero(ctx.vars());
            for a in 0..ctx.dim() {
                acc = acc.add(&ctx.euler_component(a).mul(&f.partial_derivative(a)));
            }
            acc
        });
        self.with_data(data, 0)
    }

    /// Lie derivative along the Euler field, via the Cartan formula.
    pub fn lie_x(&self) -> AmbientForm {
        self.iota_x().d().add(&self.d().iota_x())
    }

    /// `lie(X)` computed componentwise as `grad(X) + k`; equals [`lie_x`].
    pub fn lie_x_direct(&self) -> AmbientForm {
        self.grad_x().add(&self.scale_int(self.degree() as i64))
    }

    /// Adjoint Lie operator `{delta, eps(X)}`.
    pub fn lie_x_star(&self) -> AmbientForm {
        self.eps_x().delta().add(&self.delta().eps_x())
    }

    /// `lie*(X)` componentwise as `(k - n - 2) - grad(X)`; equals
    /// [`lie_x_star`].
    pub fn lie_x_star_direct(&self) -> AmbientForm {
        let c = self.degree() as i64 - self.ctx.n() as i64 - 2;
        self.scale_int(c).sub(&self.grad_x())
    }

    /// Multiplication by the quadric. Weight shift +2.
    pub fn q_mul(&self) -> AmbientForm {
        let q = self.ctx.q_expr();
        self.with_data(self.data.scale(&q), 2)
    }

    /// `K(X) = n + 2 grad(X) + 2 = lie(X) - lie*(X)`.
    pub fn k_x(&self) -> AmbientForm {
        let c = self.ctx.n() as i64 + 2;
        self.grad_x().scale_int(2).add(&self.scale_int(c))
    }
}

impl PartialEq for AmbientForm {
    /// Data equality; all zero forms compare equal regardless of degree.
    fn eq(&self, other: &Self) -> bool {
        if self.is_zero() && other.is_zero() {
            return true;
        }
        self.degree() == other.degree() && self.data == other.data
    }
}

impl fmt::Debug for AmbientForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AmbientForm(n={}, {:?}", self.ctx.n(), self.data)?;
        if let Some(w) = &self.weight {
            write!(f, ", weight {w}")?;
        }
        write!(f, ")")
    }
}

/// Operator parity in the graded algebra.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Parity {
    Even,
    Odd,
}

/// A named composable operator on ambient forms.
#[derive(Clone)]
pub struct AmbientOp {
    name: String,
    parity: Parity,
    f: Arc<dyn Fn(&AmbientForm) -> AmbientForm + Send + Sync>,
}

impl AmbientOp {
    pub fn new(
        name: &str,
        parity: Parity,
        f: impl Fn(&AmbientForm) -> AmbientForm + Send + Sync + 'static,
    ) -> Self {
        AmbientOp {
            name: name.to_owned(),
            parity,
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn apply(&self, phi: &AmbientForm) -> AmbientForm {
        (self.f)(phi)
    }

    /// Composition `self . inner` (apply `inner` first).
    pub fn compose(&self, inner: &AmbientOp) -> AmbientOp {
        let parity = if self.parity == inner.parity {
            Parity::Even
        } else {
            Parity::Odd
        };
        let (f, g) = (Arc::clone(&self.f), Arc::clone(&inner.f));
        AmbientOp {
            name: format!("{} {}", self.name, inner.name),
            parity,
            f: Arc::new(move |phi| f(&g(phi))),
        }
    }

    pub fn scaled(&self, c: i64) -> AmbientOp {
        let f = Arc::clone(&self.f);
        AmbientOp {
            name: format!("{c} {}", self.name),
            parity: self.parity,
            f: Arc::new(move |phi| f(phi).scale_int(c)),
        }
    }

    /// Iterated composition `self^m`.
    pub fn power(&self, m: u32) -> AmbientOp {
        let f = Arc::clone(&self.f);
        let parity = if m % 2 == 0 { Parity::Even } else { self.parity };
        AmbientOp {
            name: format!("{}^{m}", self.name),
            parity,
            f: Arc::new(move |phi| {
                let mut acc = phi.clone();
                for _ in 0..m {
                    acc = f(&acc);
                }
                acc
            }),
        }
    }
}

/// Graded bracket `[a, b] = a b - (-1)^{|a||b|} b a`: the anticommutator when
/// both operators are odd, the commutator otherwise.
pub fn graded_bracket(a: &AmbientOp, b: &AmbientOp, phi: &AmbientForm) -> AmbientForm {
    let ab = a.apply(&b.apply(phi));
    let ba = b.apply(&a.apply(phi));
    if a.parity == Parity::Odd && b.parity == Parity::Odd {
        ab.add(&ba)
    } else {
        ab.sub(&ba)
    }
}

/// The standard operator family on a context.
pub struct AmbientOps {
    pub d: AmbientOp,
    pub delta: AmbientOp,
    pub lap: AmbientOp,
    pub eps_x: AmbientOp,
    pub iota_x: AmbientOp,
    pub lie_x: AmbientOp,
    pub lie_x_star: AmbientOp,
    pub q: AmbientOp,
    pub grad_x: AmbientOp,
    pub k_x: AmbientOp,
}

impl AmbientOps {
    pub fn new(_ctx: &QuadricContext) -> Self {
        AmbientOps {
            d: AmbientOp::new("d", Parity::Odd, |p| p.d()),
            delta: AmbientOp::new("delta", Parity::Odd, |p| p.delta()),
            lap: AmbientOp::new("lap", Parity::Even, |p| p.lap()),
            eps_x: AmbientOp::new("eps(X)", Parity::Odd, |p| p.eps_x()),
            iota_x: AmbientOp::new("iota(X)", Parity::Odd, |p| p.iota_x()),
            lie_x: AmbientOp::new("lie(X)", Parity::Even, |p| p.lie_x()),
            lie_x_star: AmbientOp::new("lie*(X)", Parity::Even, |p| p.lie_x_star()),
            q: AmbientOp::new("Q", Parity::Even, |p| p.q_mul()),
            grad_x: AmbientOp::new("grad(X)", Parity::Even, |p| p.grad_x()),
            k_x: AmbientOp::new("K(X)", Parity::Even, |p| p.k_x()),
        }
    }
}
