//! Reflection step: with `w` fixed, optimize the RIS coefficients.
//!
//! With `v = q*` and the lift `V = [v; 1][v; 1]^H` the secrecy rate becomes
//!
//! ```text
//! C(V) = ln tr(H_AB V) - ln tr(H_IB V) - ln tr(H_AE V) + ln tr(H_IE V)
//! ```
//!
//! which is a difference of concave functions. Each minorize-maximize step
//! linearizes the two subtracted logs at the anchor `V~` and maximizes the
//! resulting concave surrogate over the relaxed feasible set; the solution is
//! pushed to rank one with the penalty method and becomes the next anchor.

use num_complex::Complex64;

use crate::beamopt::{penalty_recover, PenaltyConfig};
use crate::channel::ChannelSet;
use crate::conic::{solve, Coefficient, ConicProblem, LinearForm, Relation, SolveStatus};
use crate::error::{Error, Result};
use crate::numerics::{max_eigenpair, rank_one_gap, CMatrix, CVector, HermitianMatrix};
use crate::system::{Beamformer, ReflectCoefficients, RisModel, SystemParams};

/// Coefficient matrices of the lifted problem, all `(n+1) x (n+1)`.
#[derive(Clone, Debug)]
pub struct LiftedRisMatrices {
    /// RIS amplification power.
    pub h_a: HermitianMatrix,
    pub h_ab: HermitianMatrix,
    pub h_ae: HermitianMatrix,
    pub h_ib: HermitianMatrix,
    pub h_ie: HermitianMatrix,
    pub tau_b: f64,
    pub tau_e: f64,
}

/// `[v; 1][v; 1]^H`.
pub fn lift(v: &CVector) -> HermitianMatrix {
    let n = v.len();
    let x = CVector::from_fn(n + 1, |i, _| if i < n { v[i] } else { Complex64::new(1.0, 0.0) });
    HermitianMatrix::outer(&x)
}

pub fn build_lifted(ch: &ChannelSet, w: &Beamformer, params: &SystemParams) -> Result<LiftedRisMatrices> {
    ch.check_dims(params.m, params.n)?;
    if w.w.len() != params.m {
        return Err(Error::InvalidInput(format!("beamformer has {} entries, expected {}", w.w.len(), params.m)));
    }
    let n = params.n;
    let incident = &ch.h_ai * &w.w;

    let mut h_a = CMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        h_a[(i, i)] = Complex64::new(incident[i].norm_sqr() + params.sigma2_i, 0.0);
    }

    // Returns (H_Aj, H_Ij, tau_j) for one receiver.
    let receiver = |direct: &CVector, ris_row: &CVector, sigma2: f64| {
        let b = ris_row.component_mul(&incident);
        let c = direct.dot(&w.w);
        let tau = sigma2 + c.norm_sqr();
        let mut signal = CMatrix::zeros(n + 1, n + 1);
        let mut noise = CMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for k in 0..n {
                signal[(i, k)] = b[i] * b[k].conj();
            }
            let leak = params.sigma2_i * ris_row[i].norm_sqr();
            signal[(i, i)] += leak;
            noise[(i, i)] = Complex64::new(leak, 0.0);
            signal[(i, n)] = b[i] * c.conj();
            signal[(n, i)] = c * b[i].conj();
        }
        signal[(n, n)] = Complex64::new(tau, 0.0);
        noise[(n, n)] = Complex64::new(sigma2, 0.0);
        (HermitianMatrix::hermitian_part(&signal), HermitianMatrix::hermitian_part(&noise), tau)
    };
    let (h_ab, h_ib, tau_b) = receiver(&ch.h_ab, &ch.h_ib, params.sigma2_b);
    let (h_ae, h_ie, tau_e) = receiver(&ch.h_ae, &ch.h_ie, params.sigma2_e);
    Ok(LiftedRisMatrices { h_a: HermitianMatrix::hermitian_part(&h_a), h_ab, h_ae, h_ib, h_ie, tau_b, tau_e })
}

/// The lifted secrecy rate `C(V)`.
pub fn lifted_objective(v: &HermitianMatrix, m: &LiftedRisMatrices) -> f64 {
    m.h_ab.inner(v).ln() - m.h_ib.inner(v).ln() - m.h_ae.inner(v).ln() + m.h_ie.inner(v).ln()
}

/// Minorizer `C~(V; V~)`: the subtracted logs replaced by their tangent at `anchor`.
pub fn surrogate_value(v: &HermitianMatrix, anchor: &HermitianMatrix, m: &LiftedRisMatrices) -> f64 {
    let tangent = |h: &HermitianMatrix| {
        let at = h.inner(anchor);
        at.ln() + (h.inner(v) - at) / at
    };
    m.h_ab.inner(v).ln() + m.h_ie.inner(v).ln() - tangent(&m.h_ib) - tangent(&m.h_ae)
}

/// The convex surrogate problem over `V` for a given anchor.
pub fn build_surrogate_problem(
    m: &LiftedRisMatrices,
    anchor: &HermitianMatrix,
    params: &SystemParams,
    model: RisModel,
) -> ConicProblem {
    let n = params.n;
    let mut problem = ConicProblem::new(vec![n + 1]);
    problem.add_log(1.0, LinearForm::single(0, Coefficient::Dense(m.h_ab.clone())));
    problem.add_log(1.0, LinearForm::single(0, Coefficient::Dense(m.h_ie.clone())));
    let linear = m.h_ib.scale(1.0 / m.h_ib.inner(anchor)).add(&m.h_ae.scale(1.0 / m.h_ae.inner(anchor)));
    problem.add_objective(0, Coefficient::Dense(linear), -1.0);
    if params.has_ris_power_budget() {
        problem.add_constraint(LinearForm::single(0, Coefficient::Dense(m.h_a.clone())), Relation::LessEq, params.p_i);
    }
    for (i, eta) in params.eta.iter().enumerate() {
        match model {
            RisModel::Active => problem.cap_diagonal(0, i, eta * eta),
            RisModel::Passive => problem.pin_diagonal(0, i, 1.0),
        }
    }
    problem.pin_diagonal(0, n, 1.0);
    problem
}

/// Relative distance below a cap within which an amplitude is moved onto it.
pub const CAP_SNAP: f64 = 1e-3;

/// Rank-one `V` to coefficients: scaled top eigenvector rotated so its last
/// entry is real, first `n` entries conjugated, then clipped to the model.
pub fn extract_coefficients(
    v: &HermitianMatrix,
    w: &Beamformer,
    ch: &ChannelSet,
    params: &SystemParams,
    model: RisModel,
) -> ReflectCoefficients {
    let n = params.n;
    let top = max_eigenpair(v);
    let mut x = top.vector * Complex64::new(top.value.max(0.0).sqrt(), 0.0);
    let corner = x[n];
    if corner.norm() > 0.0 {
        x *= corner.conj() / corner.norm();
    }
    let mut q = ReflectCoefficients { q: CVector::from_fn(n, |i, _| x[i].conj()) };
    for (z, eta) in q.q.iter_mut().zip(&params.eta) {
        let r = z.norm();
        match model {
            RisModel::Passive => *z = if r > 0.0 { *z / r } else { Complex64::new(1.0, 0.0) },
            // Interior-point solutions stop just short of an active cap.
            RisModel::Active if r >= eta * (1.0 - CAP_SNAP) => *z *= eta / r,
            RisModel::Active => {}
        }
    }
    if model == RisModel::Active && params.has_ris_power_budget() {
        let used = crate::system::ris_power(ch, w, &q, params);
        if used > params.p_i {
            q.q *= Complex64::new((params.p_i / used).sqrt(), 0.0);
        }
    }
    q
}

#[derive(Clone, Debug)]
pub struct MmConfig {
    pub eps3: f64,
    pub max_iterations: usize,
    pub penalty: PenaltyConfig,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self { eps3: 1e-3, max_iterations: 50, penalty: PenaltyConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmStep {
    pub iteration: usize,
    /// `C` at the accepted rank-one anchor.
    pub objective: f64,
    /// Rank-one gap of the recovered `V` before extraction.
    pub rank_gap: f64,
    /// Inner penalty iterations spent on recovery.
    pub penalty_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MmStatus {
    Converged,
    IterationCapped,
    /// A step would have lowered `C`; the previous iterate was kept.
    Guarded,
}

#[derive(Clone, Debug)]
pub struct MmOutcome {
    pub q: ReflectCoefficients,
    pub objective: f64,
    pub trace: Vec<MmStep>,
    pub status: MmStatus,
    /// Largest rank-one gap observed after recovery.
    pub max_rank_gap: f64,
}

fn check_start(q: &ReflectCoefficients, w: &Beamformer, ch: &ChannelSet, params: &SystemParams, model: RisModel) -> Result<()> {
    const TOL: f64 = 1e-9;
    let bad = q.q.iter().zip(&params.eta).any(|(z, eta)| match model {
        RisModel::Active => z.norm() > eta + TOL,
        RisModel::Passive => (z.norm() - 1.0).abs() > TOL,
    });
    if bad {
        return Err(Error::InvalidInput("initial reflection coefficients violate the element constraints".into()));
    }
    if model == RisModel::Active
        && params.has_ris_power_budget()
        && crate::system::ris_power(ch, w, q, params) > params.p_i * (1.0 + TOL)
    {
        return Err(Error::InvalidInput("initial reflection coefficients exceed the RIS power budget".into()));
    }
    Ok(())
}

/// Minorize-maximize loop from `q_init`.
pub fn mm_optimize(
    ch: &ChannelSet,
    w: &Beamformer,
    params: &SystemParams,
    model: RisModel,
    q_init: &ReflectCoefficients,
    config: &MmConfig,
) -> Result<MmOutcome> {
    check_start(q_init, w, ch, params, model)?;
    let m = build_lifted(ch, w, params)?;
    let mut q = q_init.clone();
    let mut anchor = lift(&q.v());
    let mut objective = lifted_objective(&anchor, &m);
    let mut trace = vec![MmStep { iteration: 0, objective, rank_gap: 0.0, penalty_iterations: 0 }];
    let mut max_rank_gap: f64 = 0.0;

    for iteration in 1..=config.max_iterations {
        let problem = build_surrogate_problem(&m, &anchor, params, model);
        let sol = solve(&problem, &config.penalty.solver)?;
        if sol.status != SolveStatus::Optimal {
            return Err(Error::Solver {
                status: sol.status,
                context: format!("solving the reflection surrogate at iteration {iteration}"),
            });
        }
        // A rank-one anchor that already solves the relaxation is a fixed point.
        let anchor_value = problem.objective_value(std::slice::from_ref(&anchor));
        if sol.objective <= anchor_value + sol.duality_gap + 1e-12 * anchor_value.abs() {
            trace.push(MmStep { iteration, objective, rank_gap: 0.0, penalty_iterations: 0 });
            return Ok(MmOutcome { q, objective, trace, status: MmStatus::Converged, max_rank_gap });
        }
        let recovered = penalty_recover(&problem, 0, sol.blocks, &config.penalty)?;
        let rank_gap = rank_one_gap(&recovered.blocks[0])?;
        max_rank_gap = max_rank_gap.max(rank_gap);

        let candidate = extract_coefficients(&recovered.blocks[0], w, ch, params, model);
        let candidate_anchor = lift(&candidate.v());
        let candidate_objective = lifted_objective(&candidate_anchor, &m);
        if candidate_objective < objective - 1e-9 {
            return Ok(MmOutcome { q, objective, trace, status: MmStatus::Guarded, max_rank_gap });
        }
        let gain = candidate_objective - objective;
        q = candidate;
        anchor = candidate_anchor;
        objective = candidate_objective;
        trace.push(MmStep { iteration, objective, rank_gap, penalty_iterations: recovered.trace.len() - 1 });
        if gain.abs() <= config.eps3 {
            return Ok(MmOutcome { q, objective, trace, status: MmStatus::Converged, max_rank_gap });
        }
    }
    Ok(MmOutcome { q, objective, trace, status: MmStatus::IterationCapped, max_rank_gap })
}
