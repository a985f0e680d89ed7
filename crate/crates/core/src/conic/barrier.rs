//! Primal path-following barrier method.
//!
//! For a barrier weight `tau` the method minimizes
//!
//! ```text
//! phi(X) = -tau (<C, X> + sum_l w_l ln <G_l, X>) - sum_b logdet X_b - sum_i ln(b_i - <A_i, X>)
//! ```
//!
//! subject to the equality rows. The Hessian of `phi` is
//! `X^-1 (.) X^-1` plus one rank-one term per log term and per inequality,
//! so each Newton system reduces to a dense symmetric system whose size is
//! the number of log terms, inequalities and equalities:
//!
//! ```text
//! Delta = X (-grad - sum_k y_k F_k - sum_j nu_j E_j) X
//! [ D^-1 + M_FF   M_FE ] [ y  ]   [ <F, X(-grad)X>     ]
//! [ M_EF          M_EE ] [ nu ] = [ <E, X(-grad)X> - r ]
//! ```
//!
//! with `M_ab = <P_a, X P_b X>`, `D` the rank-one curvatures and `r` the
//! equality residual, which lets the same step restore equality
//! feasibility from an infeasible start.

use nalgebra::{Cholesky, DMatrix, Dyn, LU};
use num_complex::Complex64;

use super::{Coefficient, ConicProblem, ConicSolution, LinearForm, Relation, SolveStatus, Term};
use crate::error::Result;
use crate::numerics::{frobenius_inner, CMatrix, HermitianMatrix};

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub mu_start: f64,
    /// `mu` is divided by this after every centering stage.
    pub mu_decrease: f64,
    pub mu_final: f64,
    /// Budget shared by phase I and the main barrier loop.
    pub max_newton_steps: usize,
    pub armijo_slope: f64,
    pub backtrack: f64,
    /// Centering stops once half the squared Newton decrement is below this.
    pub centering_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mu_start: 1.0,
            mu_decrease: 10.0,
            mu_final: 1e-8,
            max_newton_steps: 500,
            armijo_slope: 0.01,
            backtrack: 0.5,
            centering_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub enum StartPoint {
    Feasible(Vec<HermitianMatrix>),
    Infeasible,
    MaxIterations,
}

/// Required normalized slack of a phase-I point.
const PHASE_ONE_MARGIN: f64 = 1e-8;
/// Inside this Newton decrement (squared) full steps are safe.
const QUADRATIC_REGION: f64 = 0.0625;
const MIN_STEP: f64 = 1e-14;

struct Compiled {
    dims: Vec<usize>,
    objective: LinearForm,
    logs: Vec<(f64, LinearForm)>,
    ineq: Vec<(LinearForm, f64)>,
    eq: Vec<(LinearForm, f64)>,
}

impl Compiled {
    /// Row-normalized copy of `problem`; `None` when a constant row is violated.
    fn new(problem: &ConicProblem) -> Option<Self> {
        let dims = problem.blocks.clone();
        let mut ineq = Vec::new();
        let mut eq = Vec::new();
        for row in problem.rows() {
            let norm = row.form.norm(&dims);
            if norm == 0.0 {
                let ok = match row.relation {
                    Relation::LessEq => row.rhs >= 0.0,
                    Relation::Equal => row.rhs == 0.0,
                };
                if ok {
                    continue;
                }
                return None;
            }
            let entry = (row.form.scaled(1.0 / norm), row.rhs / norm);
            match row.relation {
                Relation::LessEq => ineq.push(entry),
                Relation::Equal => eq.push(entry),
            }
        }
        let logs = problem
            .logs
            .iter()
            .map(|l| {
                let norm = l.form.norm(&dims).max(f64::MIN_POSITIVE);
                (l.weight, l.form.scaled(1.0 / norm))
            })
            .collect();
        Some(Self { dims, objective: problem.objective.clone(), logs, ineq, eq })
    }

    fn barrier_parameter(&self) -> f64 {
        (self.dims.iter().sum::<usize>() + self.ineq.len()) as f64
    }

    fn residual_tol(&self) -> f64 {
        1e-10 * (1.0 + self.eq.iter().fold(0.0_f64, |m, (_, e)| m.max(e.abs())))
    }
}

/// A point strictly inside every block cone, inequality and log domain.
struct Point {
    x: Vec<CMatrix>,
    chol: Vec<Cholesky<Complex64, Dyn>>,
    logdet: f64,
    logs: Vec<f64>,
    slacks: Vec<f64>,
    residuals: Vec<f64>,
}

impl Point {
    fn new(c: &Compiled, x: Vec<CMatrix>) -> Option<Self> {
        let mut chol = Vec::with_capacity(x.len());
        let mut logdet = 0.0;
        for b in &x {
            let f = Cholesky::new(b.clone())?;
            for i in 0..b.nrows() {
                // Complex square roots never fail, so an indefinite pivot
                // shows up as a diagonal entry off the positive real axis.
                let d = f.l_dirty()[(i, i)];
                if !(d.re > 0.0) || !d.re.is_finite() || d.im.abs() > 1e-12 * d.re {
                    return None;
                }
                logdet += 2.0 * d.re.ln();
            }
            chol.push(f);
        }
        let logs: Vec<f64> = c.logs.iter().map(|(_, f)| f.evaluate_raw(&x)).collect();
        if logs.iter().any(|&g| !(g > 0.0)) {
            return None;
        }
        let slacks: Vec<f64> = c.ineq.iter().map(|(f, b)| b - f.evaluate_raw(&x)).collect();
        if slacks.iter().any(|&s| !(s > 0.0)) {
            return None;
        }
        let residuals = c.eq.iter().map(|(f, e)| e - f.evaluate_raw(&x)).collect();
        Some(Self { x, chol, logdet, logs, slacks, residuals })
    }

    fn residual_norm(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

fn add_coefficient(target: &mut CMatrix, coefficient: &Coefficient, scale: f64) {
    match coefficient {
        Coefficient::Dense(m) => {
            for (t, z) in target.iter_mut().zip(m.as_matrix().iter()) {
                *t += z * scale;
            }
        }
        Coefficient::Identity => {
            for i in 0..target.nrows() {
                target[(i, i)] += scale;
            }
        }
        Coefficient::Unit(i) => target[(*i, *i)] += scale,
    }
}

fn accumulate(target: &mut [CMatrix], form: &LinearForm, scale: f64) {
    for t in &form.terms {
        add_coefficient(&mut target[t.block], &t.coefficient, scale * t.weight);
    }
}

/// `X P X` for every block `P` touches.
fn sandwich(x: &[CMatrix], form: &LinearForm) -> Vec<Option<CMatrix>> {
    let mut out: Vec<Option<CMatrix>> = vec![None; x.len()];
    for Term { block, coefficient, weight } in &form.terms {
        let xb = &x[*block];
        let d = xb.nrows();
        let slot = out[*block].get_or_insert_with(|| CMatrix::zeros(d, d));
        match coefficient {
            Coefficient::Unit(i) => {
                let col = xb.column(*i);
                for c in 0..d {
                    let right = col[c].conj() * *weight;
                    for r in 0..d {
                        slot[(r, c)] += col[r] * right;
                    }
                }
            }
            Coefficient::Identity => *slot += (xb * xb) * Complex64::new(*weight, 0.0),
            Coefficient::Dense(m) => *slot += (xb * m.as_matrix() * xb) * Complex64::new(*weight, 0.0),
        }
    }
    out
}

fn pair_form(form: &LinearForm, y: &[Option<CMatrix>]) -> f64 {
    form.terms
        .iter()
        .map(|t| match &y[t.block] {
            Some(m) => t.weight * t.coefficient.pair(m),
            None => 0.0,
        })
        .sum()
}

struct NewtonStep {
    delta: Vec<CMatrix>,
    decrement_sq: f64,
    /// `<grad phi, Delta>`.
    slope: f64,
}

fn newton_step(c: &Compiled, pt: &Point, tau: f64) -> Option<NewtonStep> {
    let nb = c.dims.len();
    let mut grad: Vec<CMatrix> = c.dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
    accumulate(&mut grad, &c.objective, -tau);
    for ((w, f), g) in c.logs.iter().zip(&pt.logs) {
        accumulate(&mut grad, f, -tau * w / g);
    }
    for ((f, _), s) in c.ineq.iter().zip(&pt.slacks) {
        accumulate(&mut grad, f, 1.0 / s);
    }
    for (g, chol) in grad.iter_mut().zip(&pt.chol) {
        *g -= chol.inverse();
    }

    let w: Vec<CMatrix> = (0..nb).map(|b| -(&pt.x[b] * &grad[b] * &pt.x[b])).collect();

    // Low-rank curvature terms first, then equality rows.
    let mut forms: Vec<&LinearForm> = Vec::new();
    let mut curvature: Vec<f64> = Vec::new();
    for ((wt, f), g) in c.logs.iter().zip(&pt.logs) {
        forms.push(f);
        curvature.push(tau * wt / (g * g));
    }
    for ((f, _), s) in c.ineq.iter().zip(&pt.slacks) {
        forms.push(f);
        curvature.push(1.0 / (s * s));
    }
    let k = forms.len();
    forms.extend(c.eq.iter().map(|(f, _)| f));
    let total = forms.len();

    let ys: Vec<Vec<Option<CMatrix>>> = forms.iter().map(|f| sandwich(&pt.x, f)).collect();
    let mut system = DMatrix::<f64>::zeros(total, total);
    let mut rhs = nalgebra::DVector::<f64>::zeros(total);
    let wopt: Vec<Option<CMatrix>> = w.iter().cloned().map(Some).collect();
    for a in 0..total {
        for b in a..total {
            let v = pair_form(forms[a], &ys[b]);
            system[(a, b)] = v;
            system[(b, a)] = v;
        }
        rhs[a] = pair_form(forms[a], &wopt);
        if a < k {
            system[(a, a)] += 1.0 / curvature[a];
        } else {
            rhs[a] -= pt.residuals[a - k];
        }
    }
    let factor = Cholesky::new(system.clone());
    let lu = if factor.is_none() { Some(LU::new(system)) } else { None };
    let solve_system = |b: &nalgebra::DVector<f64>| match (&factor, &lu) {
        (Some(f), _) => Some(f.solve(b)),
        (None, Some(l)) => l.solve(b),
        (None, None) => None,
    };
    let apply = |delta: &mut Vec<CMatrix>, z: &nalgebra::DVector<f64>| {
        for (a, y) in ys.iter().enumerate() {
            for (b, yb) in y.iter().enumerate() {
                if let Some(m) = yb {
                    delta[b] -= m * Complex64::new(z[a], 0.0);
                }
            }
        }
    };

    let mut z = solve_system(&rhs)?;
    let mut delta = w;
    apply(&mut delta, &z);
    // At large tau, W and the correction nearly cancel; refine the reduced
    // system against residuals measured on Delta itself.
    for _ in 0..2 {
        let mut defect = nalgebra::DVector::<f64>::zeros(total);
        for a in 0..total {
            let measured = forms[a].evaluate_raw(&delta);
            defect[a] = if a < k { measured - z[a] / curvature[a] } else { measured - pt.residuals[a - k] };
        }
        let dz = solve_system(&defect)?;
        apply(&mut delta, &dz);
        z += dz;
    }
    if z.iter().any(|v| !v.is_finite()) {
        return None;
    }
    for d in delta.iter_mut() {
        *d = HermitianMatrix::hermitian_part(d).into_matrix();
    }
    let slope: f64 = grad.iter().zip(&delta).map(|(g, d)| frobenius_inner(g, d)).sum();
    let nu_r: f64 = (k..total).map(|a| z[a] * pt.residuals[a - k]).sum();
    Some(NewtonStep { delta, decrement_sq: -slope - nu_r, slope })
}

/// `phi(candidate) - phi(current)` evaluated term by term.
fn barrier_change(c: &Compiled, cur: &Point, cand: &Point, delta: &[CMatrix], alpha: f64, tau: f64) -> f64 {
    let mut objective_change = alpha * c.objective.evaluate_raw(delta);
    for (((w, _), g0), g1) in c.logs.iter().zip(&cur.logs).zip(&cand.logs) {
        objective_change += w * (g1 / g0).ln();
    }
    let mut change = -tau * objective_change - (cand.logdet - cur.logdet);
    for (s0, s1) in cur.slacks.iter().zip(&cand.slacks) {
        change -= (s1 / s0).ln();
    }
    change
}

#[derive(Debug, PartialEq)]
enum LoopStatus {
    Converged,
    Stopped,
    MaxIterations,
    Stalled,
}

enum Flow {
    Continue,
    Stop,
}

struct LoopOutcome {
    point: Point,
    tau: f64,
    status: LoopStatus,
}

fn barrier_loop(
    c: &Compiled,
    start: Point,
    opts: &SolverOptions,
    steps: &mut usize,
    mut after_centering: impl FnMut(&Point, f64) -> Flow,
) -> LoopOutcome {
    let mut pt = start;
    let mut tau = 1.0 / opts.mu_start;
    let res_tol = c.residual_tol();
    loop {
        // Centering.
        let mut previous_decrement = f64::INFINITY;
        loop {
            if *steps >= opts.max_newton_steps {
                return LoopOutcome { point: pt, tau, status: LoopStatus::MaxIterations };
            }
            let Some(step) = newton_step(c, &pt, tau) else {
                return LoopOutcome { point: pt, tau, status: LoopStatus::Stalled };
            };
            let feasible = pt.residual_norm() <= res_tol;
            if feasible && step.decrement_sq * 0.5 <= opts.centering_tol {
                break;
            }
            // Newton contracts quadratically here; a stuck decrement is rounding.
            if feasible && step.decrement_sq < QUADRATIC_REGION && step.decrement_sq > 0.5 * previous_decrement {
                break;
            }
            previous_decrement = step.decrement_sq;
            let full_steps = !feasible || step.decrement_sq < QUADRATIC_REGION;
            let mut alpha = 1.0;
            let accepted = loop {
                let cand_x: Vec<CMatrix> = pt
                    .x
                    .iter()
                    .zip(&step.delta)
                    .map(|(x, d)| x + d * Complex64::new(alpha, 0.0))
                    .collect();
                if let Some(cand) = Point::new(c, cand_x) {
                    if full_steps
                        || barrier_change(c, &pt, &cand, &step.delta, alpha, tau)
                            <= opts.armijo_slope * alpha * step.slope
                    {
                        break Some(cand);
                    }
                }
                alpha *= opts.backtrack;
                if alpha < MIN_STEP {
                    break None;
                }
            };
            *steps += 1;
            match accepted {
                Some(cand) => pt = cand,
                // Progress is below rounding: treat the point as centered.
                None if feasible => break,
                None => return LoopOutcome { point: pt, tau, status: LoopStatus::Stalled },
            }
        }
        if let Flow::Stop = after_centering(&pt, tau) {
            return LoopOutcome { point: pt, tau, status: LoopStatus::Stopped };
        }
        if 1.0 / tau <= opts.mu_final * (1.0 + 1e-9) {
            return LoopOutcome { point: pt, tau, status: LoopStatus::Converged };
        }
        tau *= opts.mu_decrease;
    }
}

enum PhaseOne {
    Feasible(Point),
    Infeasible,
    MaxIterations,
}

fn phase_one(c: &Compiled, opts: &SolverOptions, steps: &mut usize) -> PhaseOne {
    // Scaled identity: puts every inequality halfway to its bound when possible.
    if c.eq.is_empty() {
        let identity: Vec<CMatrix> = c.dims.iter().map(|&d| CMatrix::identity(d, d)).collect();
        let mut scale: f64 = f64::INFINITY;
        for (f, b) in &c.ineq {
            let a = f.evaluate_raw(&identity);
            if a > 0.0 {
                scale = scale.min(0.5 * b / a);
            }
        }
        if !scale.is_finite() {
            scale = 1.0;
        }
        if scale > 0.0 {
            let x = identity.iter().map(|m| m * Complex64::new(scale, 0.0)).collect();
            if let Some(pt) = Point::new(c, x) {
                if pt.slacks.iter().all(|&s| s >= PHASE_ONE_MARGIN) {
                    return PhaseOne::Feasible(pt);
                }
            }
        }
    }

    // Minimize the common violation s over (X, s' = s + s0), s' >= 0.
    let identity: Vec<CMatrix> = c.dims.iter().map(|&d| CMatrix::identity(d, d)).collect();
    let extra = c.dims.len();
    let mut worst: f64 = 0.0;
    for (f, b) in &c.ineq {
        worst = worst.max(f.evaluate_raw(&identity) - b);
    }
    for (_, f) in &c.logs {
        worst = worst.max(-f.evaluate_raw(&identity));
    }
    let s_init = worst + 1.0;
    let s0 = s_init + 1.0;

    let shift = |f: &LinearForm| f.clone().with(extra, Coefficient::Unit(0), -1.0);
    let mut ineq: Vec<(LinearForm, f64)> = c.ineq.iter().map(|(f, b)| (shift(f), b - s0)).collect();
    ineq.extend(c.logs.iter().map(|(_, f)| (shift(&f.scaled(-1.0)), -s0)));
    let mut dims = c.dims.clone();
    dims.push(1);
    let aux = Compiled {
        dims,
        objective: LinearForm::single(extra, Coefficient::Unit(0)).scaled(-1.0),
        logs: Vec::new(),
        ineq,
        eq: c.eq.clone(),
    };
    let mut x0 = identity;
    x0.push(CMatrix::from_element(1, 1, Complex64::new(s_init + s0, 0.0)));
    let Some(start) = Point::new(&aux, x0) else {
        return PhaseOne::Infeasible;
    };

    let nu = aux.barrier_parameter();
    let mut verdict_infeasible = false;
    let outcome = barrier_loop(&aux, start, opts, steps, |pt, tau| {
        let s = pt.x[extra][(0, 0)].re - s0;
        if s <= -PHASE_ONE_MARGIN {
            return Flow::Stop;
        }
        // Lower bound on the optimal violation is already positive.
        if s - nu / tau > 0.0 {
            verdict_infeasible = true;
            return Flow::Stop;
        }
        Flow::Continue
    });
    match outcome.status {
        LoopStatus::Stopped if !verdict_infeasible => {
            let mut x = outcome.point.x;
            x.truncate(extra);
            match Point::new(c, x) {
                Some(pt) => PhaseOne::Feasible(pt),
                None => PhaseOne::Infeasible,
            }
        }
        LoopStatus::MaxIterations => PhaseOne::MaxIterations,
        _ => PhaseOne::Infeasible,
    }
}

fn to_hermitian(x: &[CMatrix]) -> Vec<HermitianMatrix> {
    x.iter().map(HermitianMatrix::hermitian_part).collect()
}

/// Strictly feasible point for `problem`, or a verdict that none exists.
pub fn feasible_start(problem: &ConicProblem, opts: &SolverOptions) -> Result<StartPoint> {
    problem.validate()?;
    let Some(c) = Compiled::new(problem) else {
        return Ok(StartPoint::Infeasible);
    };
    let mut steps = 0;
    Ok(match phase_one(&c, opts, &mut steps) {
        PhaseOne::Feasible(pt) => StartPoint::Feasible(to_hermitian(&pt.x)),
        PhaseOne::Infeasible => StartPoint::Infeasible,
        PhaseOne::MaxIterations => StartPoint::MaxIterations,
    })
}

pub fn solve(problem: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    problem.validate()?;
    let zeros = || problem.blocks.iter().map(|&d| HermitianMatrix::zeros(d)).collect::<Vec<_>>();
    let failed = |status, steps| ConicSolution {
        blocks: zeros(),
        objective: f64::NAN,
        status,
        duality_gap: f64::INFINITY,
        newton_steps: steps,
    };
    let Some(c) = Compiled::new(problem) else {
        return Ok(failed(SolveStatus::Infeasible, 0));
    };
    let mut steps = 0;
    let start = match phase_one(&c, opts, &mut steps) {
        PhaseOne::Feasible(pt) => pt,
        PhaseOne::Infeasible => return Ok(failed(SolveStatus::Infeasible, steps)),
        PhaseOne::MaxIterations => return Ok(failed(SolveStatus::MaxIterations, steps)),
    };
    let outcome = barrier_loop(&c, start, opts, &mut steps, |_, _| Flow::Continue);
    let status = match outcome.status {
        LoopStatus::Converged => SolveStatus::Optimal,
        _ => SolveStatus::MaxIterations,
    };
    let blocks = to_hermitian(&outcome.point.x);
    Ok(ConicSolution {
        objective: problem.objective_value(&blocks),
        blocks,
        status,
        duality_gap: c.barrier_parameter() / outcome.tau,
        newton_steps: steps,
    })
}
