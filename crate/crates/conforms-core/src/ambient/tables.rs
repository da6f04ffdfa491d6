//! The closed bracket table of the ambient operator family.
//!
//! The family splits into odd generators (d, delta, eps(X), iota(X)) and even
//! ones (lap, lie(X), lie*(X), Q). Every graded bracket of two generators is
//! again an integer multiple of a single generator (or K(X), or zero), and
//! each row of that table is an exact operator identity on all forms: no
//! homogeneity and no reduction modulo the cone is needed.

use super::{graded_bracket, AmbientForm, AmbientOp, AmbientOps};
use crate::scalar::QuadricContext;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Block {
    /// Anticommutator of two odd generators.
    OddOdd,
    /// Commutator of an even with an odd generator.
    EvenOdd,
    /// Commutator of two even generators.
    EvenEven,
}

/// One verified identity: `[left, right] = coeff * rhs` (graded bracket),
/// with `rhs = None` meaning the bracket vanishes.
pub struct TableRow {
    id: String,
    block: Block,
    left: AmbientOp,
    right: AmbientOp,
    rhs: Option<(i64, AmbientOp)>,
}

impl TableRow {
    fn new(block: Block, left: &AmbientOp, right: &AmbientOp, rhs: Option<(i64, &AmbientOp)>) -> Self {
        let tag = match block {
            Block::OddOdd => "anti",
            Block::EvenOdd | Block::EvenEven => "comm",
        };
        TableRow {
            id: format!("{tag}:{},{}", left.name(), right.name()),
            block,
            left: left.clone(),
            right: right.clone(),
            rhs: rhs.map(|(c, op)| (c, op.clone())),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn block(&self) -> Block {
        self.block
    }

    /// Human-readable statement of the identity.
    pub fn statement(&self) -> String {
        let braces = if self.block == Block::OddOdd {
            ("{", "}")
        } else {
            ("[", "]")
        };
        let rhs = match &self.rhs {
            None => "0".to_owned(),
            Some((1, op)) => op.name().to_owned(),
            Some((c, op)) => format!("{c} {}", op.name()),
        };
        format!(
            "{}{}, {}{} = {rhs}",
            braces.0,
            self.left.name(),
            self.right.name(),
            braces.1
        )
    }

    /// Bracket minus expected right-hand side, evaluated on one form.
    pub fn residual(&self, phi: &AmbientForm) -> AmbientForm {
        let lhs = graded_bracket(&self.left, &self.right, phi);
        match &self.rhs {
            None => lhs,
            Some((c, op)) => lhs.sub(&op.apply(phi).scale_int(*c)),
        }
    }

    pub fn holds_on(&self, phi: &AmbientForm) -> bool {
        self.residual(phi).is_zero()
    }
}

/// The 16 ordered odd-odd anticommutator rows.
pub fn odd_odd_rows(ctx: &QuadricContext) -> Vec<TableRow> {
    let ops = AmbientOps::new(ctx);
    let odd = [&ops.d, &ops.delta, &ops.eps_x, &ops.iota_x];
    let mut rows = Vec::new();
    for (i, a) in odd.iter().enumerate() {
        for (j, b) in odd.iter().enumerate() {
            // Unordered expectations; the anticommutator is symmetric.
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            let rhs: Option<(i64, &AmbientOp)> = match (lo, hi) {
                (0, 1) => Some((1, &ops.lap)),
                (0, 3) => Some((1, &ops.lie_x)),
                (1, 2) => Some((1, &ops.lie_x_star)),
                (2, 3) => Some((1, &ops.q)),
                _ => None,
            };
            rows.push(TableRow::new(Block::OddOdd, a, b, rhs));
        }
    }
    rows
}

/// The 16 even-odd commutator rows.
pub fn even_odd_rows(ctx: &QuadricContext) -> Vec<TableRow> {
    let ops = AmbientOps::new(ctx);
    let even = [&ops.lap, &ops.lie_x, &ops.lie_x_star, &ops.q];
    let odd = [&ops.d, &ops.delta, &ops.eps_x, &ops.iota_x];
    let mut rows = Vec::new();
    for (i, a) in even.iter().enumerate() {
        for (j, b) in odd.iter().enumerate() {
            let rhs: Option<(i64, &AmbientOp)> = match (i, j) {
                (0, 2) => Some((-2, &ops.d)),
                (0, 3) => Some((2, &ops.delta)),
                (1, 1) => Some((-2, &ops.delta)),
                (1, 2) => Some((2, &ops.eps_x)),
                (2, 0) => Some((2, &ops.d)),
                (2, 3) => Some((-2, &ops.iota_x)),
                (3, 0) => Some((-2, &ops.eps_x)),
                (3, 1) => Some((2, &ops.iota_x)),
                _ => None,
            };
            rows.push(TableRow::new(Block::EvenOdd, a, b, rhs));
        }
    }
    rows
}

/// The 6 independent even-even commutator rows.
pub fn even_even_rows(ctx: &QuadricContext) -> Vec<TableRow> {
    let ops = AmbientOps::new(ctx);
    vec![
        TableRow::new(Block::EvenEven, &ops.lap, &ops.lie_x, Some((2, &ops.lap))),
        TableRow::new(
            Block::EvenEven,
            &ops.lap,
            &ops.lie_x_star,
            Some((-2, &ops.lap)),
        ),
        TableRow::new(Block::EvenEven, &ops.lap, &ops.q, Some((-2, &ops.k_x))),
        TableRow::new(Block::EvenEven, &ops.lie_x, &ops.lie_x_star, None),
        TableRow::new(Block::EvenEven, &ops.lie_x, &ops.q, Some((2, &ops.q))),
        TableRow::new(Block::EvenEven, &ops.lie_x_star, &ops.q, Some((-2, &ops.q))),
    ]
}

/// The 32 generator-pair rows checked by the table suite.
pub fn bracket_rows(ctx: &QuadricContext) -> Vec<TableRow> {
    let mut rows = odd_odd_rows(ctx);
    rows.extend(even_odd_rows(ctx));
    rows
}

/// All 38 rows including the even-even block.
pub fn all_rows(ctx: &QuadricContext) -> Vec<TableRow> {
    let mut rows = bracket_rows(ctx);
    rows.extend(even_even_rows(ctx));
    rows
}
