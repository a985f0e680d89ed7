//! Penalty-based rank-one recovery for a lifted PSD block.
//!
//! The rank constraint `tr X - lambda_max(X) <= 0` is moved into the
//! objective with weight `p`; each inner problem linearizes `lambda_max` at
//! the current iterate through its top eigenvector, which keeps the inner
//! problem convex and makes the penalized value non-increasing for fixed `p`.

use crate::conic::{solve, Coefficient, ConicProblem, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::numerics::{max_eigenpair, rank_one_gap, HermitianMatrix};

#[derive(Clone, Debug)]
pub struct PenaltyConfig {
    pub p0: f64,
    pub growth: f64,
    /// Target rank-one gap.
    pub eps1: f64,
    /// Frobenius distance below which an inner solve counts as a stall.
    pub eps2: f64,
    pub max_penalty: f64,
    pub solver: SolverOptions,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { p0: 10.0, growth: 2.0, eps1: 1e-3, eps2: 1e-3, max_penalty: 1e8, solver: SolverOptions::default() }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.p0 > 0.0 && self.growth > 1.0 && self.eps1 > 0.0 && self.eps2 > 0.0 && self.max_penalty >= self.p0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("penalty configuration out of range: {self:?}")))
        }
    }
}

/// One accepted iterate of the recovery loop.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyStep {
    pub iteration: usize,
    /// Penalized objective in minimization form: `-base + p * gap`.
    pub objective: f64,
    pub gap: f64,
    pub penalty: f64,
}

#[derive(Clone, Debug)]
pub struct PenaltyOutcome {
    pub blocks: Vec<HermitianMatrix>,
    pub gap: f64,
    pub penalty: f64,
    pub trace: Vec<PenaltyStep>,
    pub inner_solves: usize,
}

fn penalized_value(problem: &ConicProblem, blocks: &[HermitianMatrix], p: f64, gap: f64) -> f64 {
    -problem.objective_value(blocks) + p * gap
}

/// Drives block `block` of a feasible point of `base` to rank one.
///
/// `start` must be feasible for `base`. The returned point is feasible for
/// `base` up to solver accuracy and has rank-one gap at most `eps1`.
pub fn penalty_recover(
    base: &ConicProblem,
    block: usize,
    start: Vec<HermitianMatrix>,
    config: &PenaltyConfig,
) -> Result<PenaltyOutcome> {
    config.validate()?;
    if block >= base.blocks.len() || start.len() != base.blocks.len() {
        return Err(Error::InvalidInput("penalty block or start point does not match the problem".into()));
    }
    let mut x = start;
    let mut p = config.p0;
    let mut trace = Vec::new();
    let mut inner_solves = 0;
    for iteration in 0.. {
        let gap = rank_one_gap(&x[block])?;
        trace.push(PenaltyStep { iteration, objective: penalized_value(base, &x, p, gap), gap, penalty: p });
        if gap <= config.eps1 {
            return Ok(PenaltyOutcome { blocks: x, gap, penalty: p, trace, inner_solves });
        }
        let u = max_eigenpair(&x[block]).vector;
        let direction = HermitianMatrix::outer(&u);
        loop {
            let mut inner = base.clone();
            inner.add_objective(block, Coefficient::Identity, -p);
            inner.add_objective(block, Coefficient::Dense(direction.clone()), p);
            let sol = solve(&inner, &config.solver)?;
            inner_solves += 1;
            if sol.status != SolveStatus::Optimal {
                return Err(Error::Solver {
                    status: sol.status,
                    context: format!("penalized subproblem at iteration {iteration}, penalty {p:.3e}"),
                });
            }
            let moved = sol.blocks[block].sub(&x[block]).frobenius_norm();
            if moved > config.eps2 {
                x = sol.blocks;
                break;
            }
            // Stalled, but the stalled point may already meet the target.
            if rank_one_gap(&sol.blocks[block])? <= config.eps1 {
                x = sol.blocks;
                break;
            }
            p *= config.growth;
            if p > config.max_penalty {
                return Err(Error::RecoveryFailed { gap, penalty: p });
            }
        }
    }
    unreachable!()
}
