//! Alternating optimization of `(w, q)` and the two reference designs.

use nalgebra::Cholesky;
use num_complex::Complex64;

use crate::beamopt::{optimize_beamformer, PenaltyStep};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::numerics::{max_eigenpair, CMatrix, CVector, HermitianMatrix};
use crate::risopt::{mm_optimize, MmConfig, MmStep};
use crate::system::{ris_power, secrecy_rate, Beamformer, ReflectCoefficients, RisModel, SystemParams};

#[derive(Clone, Debug)]
pub struct AoConfig {
    pub eps_ao: f64,
    pub max_outer: usize,
    pub mm: MmConfig,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self { eps_ao: 1e-3, max_outer: 30, mm: MmConfig::default() }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_ao > 0.0) || self.max_outer == 0 || !(self.mm.eps3 > 0.0) || self.mm.max_iterations == 0 {
            return Err(Error::InvalidInput(format!("alternating-optimization settings out of range: {self:?}")));
        }
        self.mm.penalty.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AoStatus {
    Converged,
    IterationCapped,
    /// A subproblem failed; the result holds the last consistent iterate.
    Failed(String),
}

impl AoStatus {
    pub fn label(&self) -> &'static str {
        match self {
            AoStatus::Converged => "converged",
            AoStatus::IterationCapped => "capped",
            AoStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AoResult {
    pub model: RisModel,
    pub w: Beamformer,
    pub q: ReflectCoefficients,
    /// Unclamped secrecy rate at `(w, q)`, nats.
    pub sr: f64,
    /// Entry 0 is the starting point, entry `k` the rate after outer iteration `k`.
    pub sr_trace: Vec<f64>,
    /// Penalty-recovery trace of every beamformer step.
    pub w_traces: Vec<Vec<PenaltyStep>>,
    /// Relaxed and recovered transformed objective of every beamformer step.
    pub w_objectives: Vec<(f64, f64)>,
    /// Minorize-maximize trace of every reflection step.
    pub q_traces: Vec<Vec<MmStep>>,
    pub status: AoStatus,
    /// Largest rank-one gap accepted in any subproblem.
    pub max_rank_gap: f64,
    /// Amplification power `|Q H_AI w|^2 + |Q|_F^2 sigma_I^2` at exit, watts.
    pub ris_power: f64,
}

impl AoResult {
    pub fn outer_iterations(&self) -> usize {
        self.sr_trace.len() - 1
    }

    /// Operational secrecy rate.
    pub fn clamped_sr(&self) -> f64 {
        self.sr.max(0.0)
    }
}

/// Starting coefficients `Q = I`, clipped to the element caps of the model.
pub fn initial_coefficients(params: &SystemParams, model: RisModel) -> ReflectCoefficients {
    let mut q = ReflectCoefficients::ones(params.n);
    if model == RisModel::Active {
        for (z, eta) in q.q.iter_mut().zip(&params.eta) {
            *z = Complex64::new(eta.min(1.0), 0.0);
        }
    }
    q
}

fn run_ao(ch: &ChannelSet, params: &SystemParams, model: RisModel, config: &AoConfig) -> Result<AoResult> {
    config.validate()?;
    ch.check_dims(params.m, params.n)?;
    let mut w = Beamformer::zeros(params.m);
    let mut q = initial_coefficients(params, model);
    let mut sr = secrecy_rate(ch, &w, &q, params);
    let mut result = AoResult {
        model,
        w: w.clone(),
        q: q.clone(),
        sr,
        sr_trace: vec![sr],
        w_traces: Vec::new(),
        w_objectives: Vec::new(),
        q_traces: Vec::new(),
        status: AoStatus::IterationCapped,
        max_rank_gap: 0.0,
        ris_power: 0.0,
    };

    for iteration in 1..=config.max_outer {
        let step = optimize_beamformer(ch, &q, params, &config.mm.penalty, Some(&w));
        let step = match step {
            Ok(s) => s,
            Err(e) => {
                result.status = AoStatus::Failed(format!("beamformer step {iteration}: {e}"));
                break;
            }
        };
        if step.rank_gap.is_finite() && !step.kept_previous {
            result.max_rank_gap = result.max_rank_gap.max(step.rank_gap);
        }
        result.w_objectives.push((step.relaxed_objective, step.recovered_objective));
        result.w_traces.push(step.trace);
        w = step.w;

        let mm = match mm_optimize(ch, &w, params, model, &q, &config.mm) {
            Ok(m) => m,
            Err(e) => {
                // The new beamformer is consistent with the old coefficients.
                result.status = AoStatus::Failed(format!("reflection step {iteration}: {e}"));
                sr = secrecy_rate(ch, &w, &q, params);
                result.sr_trace.push(sr);
                break;
            }
        };
        result.max_rank_gap = result.max_rank_gap.max(mm.max_rank_gap);
        result.q_traces.push(mm.trace);
        if secrecy_rate(ch, &w, &mm.q, params) >= secrecy_rate(ch, &w, &q, params) {
            q = mm.q;
        }

        let next = secrecy_rate(ch, &w, &q, params);
        result.sr_trace.push(next);
        let gain = next - sr;
        sr = next;
        if gain <= config.eps_ao {
            result.status = AoStatus::Converged;
            break;
        }
    }
    result.ris_power = ris_power(ch, &w, &q, params);
    result.w = w;
    result.q = q;
    result.sr = sr;
    Ok(result)
}

/// Active-RIS design.
pub fn alternating_optimize(ch: &ChannelSet, params: &SystemParams, config: &AoConfig) -> Result<AoResult> {
    params.validate()?;
    run_ao(ch, params, RisModel::Active, config)
}

/// Passive-RIS design on the same channels: no RIS noise, no amplification
/// budget, unit-modulus coefficients.
pub fn passive_baseline(ch: &ChannelSet, params: &SystemParams, config: &AoConfig) -> Result<AoResult> {
    params.validate()?;
    run_ao(ch, &params.for_model(RisModel::Passive), RisModel::Passive, config)
}

/// Best full-power beamformer without the RIS: the top generalized
/// eigenvector of `(I + P_T/sigma_B^2 h_AB^H h_AB, I + P_T/sigma_E^2 h_AE^H h_AE)`.
pub fn no_ris_baseline(ch: &ChannelSet, params: &SystemParams) -> Result<(Beamformer, f64)> {
    params.validate()?;
    ch.check_dims(params.m, params.n)?;
    let m = params.m;
    let pencil = |h: &CVector, sigma2: f64| {
        let g = h.map(|z| z.conj());
        CMatrix::identity(m, m) + (&g * g.adjoint()) * Complex64::new(params.p_t / sigma2, 0.0)
    };
    let a = pencil(&ch.h_ab, params.sigma2_b);
    let b = pencil(&ch.h_ae, params.sigma2_e);
    let chol = Cholesky::new(b).ok_or_else(|| Error::InvalidInput("eavesdropper pencil is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("eavesdropper pencil is singular".into()))?;
    let whitened = HermitianMatrix::hermitian_part(&(&l_inv * a * l_inv.adjoint()));
    let y = max_eigenpair(&whitened).vector;
    let u = l_inv.adjoint() * y;
    let mut w = u.normalize() * Complex64::new(params.p_t.sqrt(), 0.0);
    crate::numerics::apply_phase_convention(&mut w);
    let w = Beamformer { w };
    let sr = secrecy_rate(ch, &w, &ReflectCoefficients::zeros(params.n), params);
    Ok((w, sr))
}
