//! Beamformer step: with the reflection coefficients fixed, maximize the
//! secrecy-rate ratio over `w`.
//!
//! The ratio `(1 + |h~_B w|^2) / (1 + |h~_E w|^2)` is lifted to `S = w w^H`,
//! the rank constraint is dropped, and the Charnes-Cooper substitution
//! `S~ = t S`, `t = 1 / (1 + h~_E S h~_E^H)` turns the fraction into the
//! linear program over `(S~, t)`
//!
//! ```text
//! maximize  t + h~_B S~ h~_B^H
//! s.t.      tr S~ <= t P_T,   tr(Q H_AI S~ H_AI^H Q^H) <= t P~_I,
//!           h~_E S~ h~_E^H + t = 1,   S~ >= 0,  t >= 0
//! ```
//!
//! with `P~_I = P_I - |Q|_F^2 sigma_I^2`. A rank-one `S~` is then recovered
//! with [`penalty_recover`].

mod penalty;

use num_complex::Complex64;

pub use penalty::{penalty_recover, PenaltyConfig, PenaltyOutcome, PenaltyStep};

use crate::channel::ChannelSet;
use crate::conic::{solve, Coefficient, ConicProblem, LinearForm, Relation, SolveStatus};
use crate::error::{Error, Result};
use crate::numerics::{apply_phase_convention, max_eigenpair, rank_one_gap, HermitianMatrix};
use crate::system::{effective_channels, secrecy_rate, Beamformer, ReflectCoefficients, SystemParams};

/// Block indices of the transformed program.
const S_BLOCK: usize = 0;
const T_BLOCK: usize = 1;

/// Below this `t` the transformed solution cannot be mapped back.
pub const DEGENERATE_T: f64 = 1e-10;

/// A point of the transformed program.
#[derive(Clone, Debug, PartialEq)]
pub struct CctState {
    pub s_tilde: HermitianMatrix,
    pub t: f64,
}

impl CctState {
    pub fn from_blocks(blocks: &[HermitianMatrix]) -> Self {
        Self { s_tilde: blocks[S_BLOCK].clone(), t: blocks[T_BLOCK].get(0, 0).re }
    }

    pub fn blocks(&self) -> Vec<HermitianMatrix> {
        vec![self.s_tilde.clone(), HermitianMatrix::from_real_diagonal(&[self.t])]
    }

    /// Transmit covariance `S = S~ / t`.
    pub fn covariance(&self) -> HermitianMatrix {
        self.s_tilde.scale(1.0 / self.t)
    }
}

/// `P_I - |q|^2 sigma_I^2`, the RIS power left for the amplified signal.
pub fn remaining_ris_power(q: &ReflectCoefficients, params: &SystemParams) -> f64 {
    params.p_i - q.q.norm_squared() * params.sigma2_i
}

pub fn build_cct_problem(ch: &ChannelSet, q: &ReflectCoefficients, params: &SystemParams) -> Result<ConicProblem> {
    ch.check_dims(params.m, params.n)?;
    let eff = effective_channels(ch, q, params);
    let mut problem = ConicProblem::new(vec![params.m, 1]);
    // Row channel h acts as h S h^H = <h^H h, S>; h^H h is the outer product of conj(h).
    let gram = |h: &crate::numerics::CVector| HermitianMatrix::outer(&h.map(|z| z.conj()));

    problem.add_objective(T_BLOCK, Coefficient::Unit(0), 1.0);
    problem.add_objective(S_BLOCK, Coefficient::Dense(gram(&eff.htilde_b)), 1.0);

    problem.add_constraint(
        LinearForm::single(S_BLOCK, Coefficient::Identity).with(T_BLOCK, Coefficient::Unit(0), -params.p_t),
        Relation::LessEq,
        0.0,
    );
    if params.has_ris_power_budget() {
        let remaining = remaining_ris_power(q, params);
        if !(remaining > 0.0) {
            return Err(Error::InfeasibleReflection { remaining });
        }
        // Q H_AI S H_AI^H Q^H traced: <H_AI^H Q^H Q H_AI, S>.
        let weighted = crate::numerics::CMatrix::from_fn(params.n, params.m, |i, j| q.q[i] * ch.h_ai[(i, j)]);
        let reflect = HermitianMatrix::hermitian_part(&(weighted.adjoint() * &weighted));
        problem.add_constraint(
            LinearForm::single(S_BLOCK, Coefficient::Dense(reflect)).with(T_BLOCK, Coefficient::Unit(0), -remaining),
            Relation::LessEq,
            0.0,
        );
    }
    problem.add_constraint(
        LinearForm::single(S_BLOCK, Coefficient::Dense(gram(&eff.htilde_e))).with(T_BLOCK, Coefficient::Unit(0), 1.0),
        Relation::Equal,
        1.0,
    );
    Ok(problem)
}

/// Ratio `(1 + h~_B S h~_B^H) / (1 + h~_E S h~_E^H)` at a covariance `S`.
pub fn sinr_ratio(ch: &ChannelSet, q: &ReflectCoefficients, params: &SystemParams, s: &HermitianMatrix) -> f64 {
    let eff = effective_channels(ch, q, params);
    let quad = |h: &crate::numerics::CVector| s.quad_form(&h.map(|z| z.conj()));
    (1.0 + quad(&eff.htilde_b)) / (1.0 + quad(&eff.htilde_e))
}

/// Global optimum of the relaxed program.
pub fn solve_relaxed(problem: &ConicProblem, config: &PenaltyConfig) -> Result<(CctState, f64)> {
    let sol = solve(problem, &config.solver)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver { status: sol.status, context: "solving the relaxed beamformer program".into() });
    }
    Ok((CctState::from_blocks(&sol.blocks), sol.objective))
}

#[derive(Clone, Debug)]
pub struct RankOneState {
    pub state: CctState,
    pub trace: Vec<PenaltyStep>,
}

/// Rank-one point of `problem` starting from the relaxed optimum `relaxed`.
pub fn recover_rank_one(relaxed: &CctState, problem: &ConicProblem, config: &PenaltyConfig) -> Result<RankOneState> {
    let out = penalty_recover(problem, S_BLOCK, relaxed.blocks(), config)?;
    Ok(RankOneState { state: CctState::from_blocks(&out.blocks), trace: out.trace })
}

#[derive(Clone, Debug)]
pub struct BeamformerOutcome {
    pub w: Beamformer,
    /// Optimal value of the relaxed transformed program.
    pub relaxed_objective: f64,
    /// Transformed objective at the recovered rank-one point.
    pub recovered_objective: f64,
    pub rank_gap: f64,
    pub trace: Vec<PenaltyStep>,
    /// `t` collapsed at the optimum; `w` fell back to zero.
    pub degenerate: bool,
    /// The incoming beamformer was kept because the new one did not improve.
    pub kept_previous: bool,
}

/// `w` from a rank-one covariance, scaled back inside every budget that
/// rounding may have overshot.
fn extract_beamformer(ch: &ChannelSet, q: &ReflectCoefficients, params: &SystemParams, s: &HermitianMatrix) -> Beamformer {
    let top = max_eigenpair(s);
    let mut v = top.vector * Complex64::new(top.value.max(0.0).sqrt(), 0.0);
    apply_phase_convention(&mut v);
    let mut w = Beamformer { w: v };
    let power = w.power();
    if power > params.p_t {
        w.w *= Complex64::new((params.p_t / power).sqrt(), 0.0);
    }
    if params.has_ris_power_budget() {
        let room = remaining_ris_power(q, params);
        let incident = &ch.h_ai * &w.w;
        let signal: f64 = incident.iter().zip(q.q.iter()).map(|(a, b)| (a * b).norm_sqr()).sum();
        if signal > room && signal > 0.0 {
            w.w *= Complex64::new((room.max(0.0) / signal).sqrt(), 0.0);
        }
    }
    w
}

/// Beamformer step. With `previous` given, the result never lowers the
/// secrecy rate below that of `previous`.
pub fn optimize_beamformer(
    ch: &ChannelSet,
    q: &ReflectCoefficients,
    params: &SystemParams,
    config: &PenaltyConfig,
    previous: Option<&Beamformer>,
) -> Result<BeamformerOutcome> {
    let problem = build_cct_problem(ch, q, params)?;
    let (relaxed, relaxed_objective) = solve_relaxed(&problem, config)?;
    let mut outcome = if relaxed.t < DEGENERATE_T {
        BeamformerOutcome {
            w: Beamformer::zeros(params.m),
            relaxed_objective,
            recovered_objective: f64::NAN,
            rank_gap: f64::NAN,
            trace: Vec::new(),
            degenerate: true,
            kept_previous: false,
        }
    } else {
        let recovered = recover_rank_one(&relaxed, &problem, config)?;
        let state = recovered.state;
        BeamformerOutcome {
            w: extract_beamformer(ch, q, params, &state.covariance()),
            relaxed_objective,
            recovered_objective: problem.objective_value(&state.blocks()),
            rank_gap: rank_one_gap(&state.s_tilde)?,
            trace: recovered.trace,
            degenerate: false,
            kept_previous: false,
        }
    };
    if let Some(prev) = previous {
        if secrecy_rate(ch, prev, q, params) > secrecy_rate(ch, &outcome.w, q, params) {
            outcome.w = prev.clone();
            outcome.kept_previous = true;
        }
    }
    Ok(outcome)
}
