//! Block-PSD programs with a linear plus weighted-log objective.
//!
//! ```text
//! maximize    <C, X> + sum_l w_l ln <G_l, X>
//! subject to  <A_i, X> <= b_i,  <E_j, X> = e_j,
//!             X_b[i,i] <= cap,   X_b[i,i] = pin,   X_b >= 0 for every block b
//! ```
//!
//! `<A, X>` is `sum_b Re tr(A_b X_b)` over the blocks a form touches. All
//! three subproblems of the alternating scheme (the Charnes-Cooper beamformer
//! program, its penalized rank-one refinements, and the per-iteration
//! minorizer of the RIS step) are instances of this form; scalars are 1x1
//! blocks.

mod barrier;

use std::io::Write;

use crate::error::{Error, Result};
use crate::numerics::{frobenius_inner, CMatrix, HermitianMatrix};

pub use barrier::{feasible_start, solve, SolverOptions, StartPoint};

#[derive(Clone, Debug)]
pub enum Coefficient {
    Dense(HermitianMatrix),
    Identity,
    /// `e_i e_i^T`.
    Unit(usize),
}

impl Coefficient {
    fn check_dim(&self, dim: usize) -> bool {
        match self {
            Coefficient::Dense(m) => m.dim() == dim,
            Coefficient::Identity => true,
            Coefficient::Unit(i) => *i < dim,
        }
    }

    fn frobenius_norm(&self, dim: usize) -> f64 {
        match self {
            Coefficient::Dense(m) => m.frobenius_norm(),
            Coefficient::Identity => (dim as f64).sqrt(),
            Coefficient::Unit(_) => 1.0,
        }
    }

    /// `Re tr(self X)` for Hermitian `X`.
    pub(crate) fn pair(&self, x: &CMatrix) -> f64 {
        match self {
            Coefficient::Dense(m) => frobenius_inner(m.as_matrix(), x),
            Coefficient::Identity => (0..x.nrows()).map(|i| x[(i, i)].re).sum(),
            Coefficient::Unit(i) => x[(*i, *i)].re,
        }
    }

    fn to_dense(&self, dim: usize) -> CMatrix {
        match self {
            Coefficient::Dense(m) => m.as_matrix().clone(),
            Coefficient::Identity => CMatrix::identity(dim, dim),
            Coefficient::Unit(i) => {
                let mut m = CMatrix::zeros(dim, dim);
                m[(*i, *i)] = 1.0.into();
                m
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Term {
    pub block: usize,
    pub coefficient: Coefficient,
    pub weight: f64,
}

/// A real linear functional over the block variables.
#[derive(Clone, Debug, Default)]
pub struct LinearForm {
    pub terms: Vec<Term>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(block: usize, coefficient: Coefficient) -> Self {
        Self::new().with(block, coefficient, 1.0)
    }

    pub fn with(mut self, block: usize, coefficient: Coefficient, weight: f64) -> Self {
        self.terms.push(Term { block, coefficient, weight });
        self
    }

    pub fn evaluate(&self, blocks: &[HermitianMatrix]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * t.coefficient.pair(blocks[t.block].as_matrix()))
            .sum()
    }

    pub(crate) fn evaluate_raw(&self, blocks: &[CMatrix]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * t.coefficient.pair(&blocks[t.block]))
            .sum()
    }

    fn norm(&self, dims: &[usize]) -> f64 {
        self.terms
            .iter()
            .map(|t| (t.weight * t.coefficient.frobenius_norm(dims[t.block])).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn scaled(&self, c: f64) -> LinearForm {
        LinearForm {
            terms: self
                .terms
                .iter()
                .map(|t| Term { weight: t.weight * c, ..t.clone() })
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LogTerm {
    pub weight: f64,
    pub form: LinearForm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Equal,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub form: LinearForm,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalBound {
    pub block: usize,
    pub index: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ConicProblem {
    /// Dimension of each Hermitian PSD block.
    pub blocks: Vec<usize>,
    pub objective: LinearForm,
    pub logs: Vec<LogTerm>,
    pub constraints: Vec<Constraint>,
    pub diagonal_caps: Vec<DiagonalBound>,
    pub diagonal_pins: Vec<DiagonalBound>,
}

impl ConicProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        Self { blocks, ..Default::default() }
    }

    pub fn add_objective(&mut self, block: usize, coefficient: Coefficient, weight: f64) {
        self.objective.terms.push(Term { block, coefficient, weight });
    }

    pub fn add_log(&mut self, weight: f64, form: LinearForm) {
        self.logs.push(LogTerm { weight, form });
    }

    pub fn add_constraint(&mut self, form: LinearForm, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { form, relation, rhs });
    }

    pub fn cap_diagonal(&mut self, block: usize, index: usize, value: f64) {
        self.diagonal_caps.push(DiagonalBound { block, index, value });
    }

    pub fn pin_diagonal(&mut self, block: usize, index: usize, value: f64) {
        self.diagonal_pins.push(DiagonalBound { block, index, value });
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.blocks.is_empty() || self.blocks.contains(&0) {
            return bad("every problem needs at least one block of positive dimension".into());
        }
        let check_form = |form: &LinearForm, what: &str| -> Result<()> {
            for t in &form.terms {
                if t.block >= self.blocks.len() {
                    return Err(Error::InvalidInput(format!("{what}: block {} out of range", t.block)));
                }
                if !t.coefficient.check_dim(self.blocks[t.block]) {
                    return Err(Error::InvalidInput(format!("{what}: coefficient does not match block {}", t.block)));
                }
                if !t.weight.is_finite() {
                    return Err(Error::InvalidInput(format!("{what}: non-finite weight")));
                }
            }
            Ok(())
        };
        check_form(&self.objective, "objective")?;
        for (i, l) in self.logs.iter().enumerate() {
            if !(l.weight > 0.0 && l.weight.is_finite()) {
                return bad(format!("log term {i} has non-positive weight"));
            }
            check_form(&l.form, "log term")?;
        }
        for c in &self.constraints {
            check_form(&c.form, "constraint")?;
            if !c.rhs.is_finite() {
                return bad("constraint right-hand side is not finite".into());
            }
        }
        for b in self.diagonal_caps.iter().chain(&self.diagonal_pins) {
            if b.block >= self.blocks.len() || b.index >= self.blocks[b.block] || !b.value.is_finite() {
                return bad(format!("diagonal bound {b:?} is out of range"));
            }
        }
        Ok(())
    }

    /// Objective at `blocks`; `-inf` outside the domain of a log term.
    pub fn objective_value(&self, blocks: &[HermitianMatrix]) -> f64 {
        let mut value = self.objective.evaluate(blocks);
        for l in &self.logs {
            let g = l.form.evaluate(blocks);
            if g <= 0.0 {
                return f64::NEG_INFINITY;
            }
            value += l.weight * g.ln();
        }
        value
    }

    /// Constraints and diagonal bounds as plain `(form, relation, rhs)` rows.
    pub(crate) fn rows(&self) -> Vec<Constraint> {
        let mut rows = self.constraints.clone();
        for b in &self.diagonal_caps {
            rows.push(Constraint {
                form: LinearForm::single(b.block, Coefficient::Unit(b.index)),
                relation: Relation::LessEq,
                rhs: b.value,
            });
        }
        for b in &self.diagonal_pins {
            rows.push(Constraint {
                form: LinearForm::single(b.block, Coefficient::Unit(b.index)),
                relation: Relation::Equal,
                rhs: b.value,
            });
        }
        rows
    }

    /// Largest violation of any constraint at `blocks`, normalized per row.
    pub fn max_violation(&self, blocks: &[HermitianMatrix]) -> f64 {
        self.rows()
            .iter()
            .map(|row| {
                let scale = row.form.norm(&self.blocks).max(1e-300);
                let lhs = row.form.evaluate(blocks);
                let v = match row.relation {
                    Relation::LessEq => (lhs - row.rhs).max(0.0),
                    Relation::Equal => (lhs - row.rhs).abs(),
                };
                v / scale
            })
            .fold(0.0, f64::max)
    }

    /// Plain-text listing: a header, then one `%%` section per matrix with
    /// `row col re im` triplets for the nonzero upper-triangular entries,
    /// 1-based as in MatrixMarket coordinate files.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "%%ConicProblem blocks {}", join(&self.blocks))?;
        let write_form = |out: &mut W, label: &str, form: &LinearForm| -> std::io::Result<()> {
            for t in &form.terms {
                let dim = self.blocks[t.block];
                let m = t.coefficient.to_dense(dim);
                let nnz: Vec<_> = (0..dim)
                    .flat_map(|i| (i..dim).map(move |j| (i, j)))
                    .filter(|&(i, j)| m[(i, j)].norm() != 0.0)
                    .collect();
                writeln!(out, "%% {label} block {} weight {:e} nnz {}", t.block, t.weight, nnz.len())?;
                for (i, j) in nnz {
                    writeln!(out, "{} {} {:e} {:e}", i + 1, j + 1, m[(i, j)].re, m[(i, j)].im)?;
                }
            }
            Ok(())
        };
        write_form(&mut out, "objective", &self.objective)?;
        for (k, l) in self.logs.iter().enumerate() {
            writeln!(out, "%% log {k} weight {:e}", l.weight)?;
            write_form(&mut out, "log-form", &l.form)?;
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let rel = match c.relation {
                Relation::LessEq => "<=",
                Relation::Equal => "==",
            };
            writeln!(out, "%% constraint {k} {rel} {:e}", c.rhs)?;
            write_form(&mut out, "constraint-form", &c.form)?;
        }
        for b in &self.diagonal_caps {
            writeln!(out, "%% cap block {} index {} <= {:e}", b.block, b.index + 1, b.value)?;
        }
        for b in &self.diagonal_pins {
            writeln!(out, "%% pin block {} index {} == {:e}", b.block, b.index + 1, b.value)?;
        }
        Ok(())
    }
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub blocks: Vec<HermitianMatrix>,
    pub objective: f64,
    pub status: SolveStatus,
    /// Barrier bound on the distance to the optimum.
    pub duality_gap: f64,
    pub newton_steps: usize,
}
